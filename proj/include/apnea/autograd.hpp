#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <type_traits>
#include <utility>
#include <vector>

#include "apnea/errors.hpp"
#include "apnea/kernels.hpp"
#include "apnea/rng.hpp"
#include "apnea/tensor.hpp"

namespace apnea::ag {

template <typename T>
using Var = std::shared_ptr<Tensor<T>>;

template <typename T>
Var<T> make_var(Tensor<T> t, bool requires_grad = false) {
    auto v = std::make_shared<Tensor<T>>(std::move(t));
    v->set_requires_grad(requires_grad);
    return v;
}

// Reverse-mode tape: operations push a backward step during the forward pass;
// backward() replays them in exact reverse order, accumulating additively so
// fan-out gets the sum of all downstream contributions.
template <typename T>
class Tape {
public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    void backward(const Var<T>& loss) {
        if (loss->numel() != 1) throw ConfigError("backward: loss must be scalar");
        if (loss->grad.empty()) loss->grad.assign(1, T{});
        loss->grad[0] = T{1};
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    std::vector<std::function<void()>> steps_;
};

enum class Padding { same, valid };

namespace detail {

template <typename T>
inline bool wants_grad(const Var<T>& v) {
    return v && v->requires_grad;
}

template <typename T>
inline void ensure_grad(const Var<T>& v) {
    if (v->grad.size() != v->values.size()) v->grad.assign(v->values.size(), T{});
}

}  // namespace detail

// --- layers ---

template <typename T>
Var<T> conv2d(Tape<T>* tape, const Var<T>& x, const Var<T>& w,
              const std::type_identity_t<Var<T>>& bias, std::size_t stride, Padding padding) {
    if (x->rank() != 4 || w->rank() != 4) throw ConfigError("conv2d: expects 4-d input and weight");
    if (x->dim(1) != w->dim(1))
        throw ConfigError("conv2d: input channels " + std::to_string(x->dim(1)) +
                          " != weight channels " + std::to_string(w->dim(1)));
    if (bias && (bias->rank() != 1 || bias->dim(0) != w->dim(0)))
        throw ConfigError("conv2d: bias shape mismatch");

    const auto d = kernels::conv2d_dims(x->dim(0), x->dim(1), x->dim(2), x->dim(3), w->dim(0),
                                        w->dim(2), w->dim(3), stride, padding == Padding::same);
    auto out = std::make_shared<Tensor<T>>(
        std::vector<std::size_t>{d.n, d.c_out, d.h_out, d.w_out});
    kernels::conv2d_forward(x->values.data(), w->values.data(), out->values.data(), d);
    if (bias) {
        const std::size_t hw = d.h_out * d.w_out;
        for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t f = 0; f < d.c_out; ++f) {
                T* row = out->values.data() + (n * d.c_out + f) * hw;
                const T bv = bias->values[f];
                for (std::size_t i = 0; i < hw; ++i) row[i] += bv;
            }
    }

    const bool rg = detail::wants_grad(x) || detail::wants_grad(w) || detail::wants_grad(bias);
    out->set_requires_grad(rg);
    if (rg && tape) {
        tape->record([x, w, bias, out, d]() {
            if (x->requires_grad) {
                detail::ensure_grad(x);
                kernels::conv2d_backward_input(out->grad.data(), w->values.data(), x->grad.data(), d);
            }
            if (w->requires_grad) {
                detail::ensure_grad(w);
                kernels::conv2d_backward_weight(x->values.data(), out->grad.data(), w->grad.data(), d);
            }
            if (bias && bias->requires_grad) {
                detail::ensure_grad(bias);
                const std::size_t hw = d.h_out * d.w_out;
                for (std::size_t f = 0; f < d.c_out; ++f) {
                    T acc{};
                    for (std::size_t n = 0; n < d.n; ++n) {
                        const T* row = out->grad.data() + (n * d.c_out + f) * hw;
                        for (std::size_t i = 0; i < hw; ++i) acc += row[i];
                    }
                    bias->grad[f] += acc;
                }
            }
        });
    }
    return out;
}

// Per-channel batch statistics over (N, H, W) in train mode, running
// statistics in eval mode; running stats updated in place with
// running = (1 - momentum) * running + momentum * batch.
template <typename T>
Var<T> batchnorm2d(Tape<T>* tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   std::vector<T>& running_mean, std::vector<T>& running_var, bool train,
                   T momentum, T eps) {
    if (x->rank() != 4) throw ConfigError("batchnorm2d: expects 4-d input");
    const std::size_t N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (gamma->numel() != C || beta->numel() != C || running_mean.size() != C ||
        running_var.size() != C)
        throw ConfigError("batchnorm2d: per-channel parameter size mismatch");
    const std::size_t m = N * H * W;
    if (train && m < 2) throw ConfigError("batchnorm2d: batch variance undefined for fewer than 2 elements");

    auto out = std::make_shared<Tensor<T>>(x->shape);
    std::vector<T> mean(C), var(C);
    if (train) {
        const std::int64_t c_total = static_cast<std::int64_t>(C);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < c_total; ++c) {
            T sum{};
            for (std::size_t n = 0; n < N; ++n) {
                const T* base = x->values.data() + (n * C + c) * H * W;
                for (std::size_t i = 0; i < H * W; ++i) sum += base[i];
            }
            const T mu = sum / static_cast<T>(m);
            T sq{};
            for (std::size_t n = 0; n < N; ++n) {
                const T* base = x->values.data() + (n * C + c) * H * W;
                for (std::size_t i = 0; i < H * W; ++i) {
                    const T dv = base[i] - mu;
                    sq += dv * dv;
                }
            }
            mean[c] = mu;
            var[c] = sq / static_cast<T>(m);  // biased, matching the normalization
        }
        for (std::size_t c = 0; c < C; ++c) {
            running_mean[c] = (T{1} - momentum) * running_mean[c] + momentum * mean[c];
            running_var[c] = (T{1} - momentum) * running_var[c] + momentum * var[c];
        }
    } else {
        mean = running_mean;
        var = running_var;
    }

    std::vector<T> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = T{1} / std::sqrt(var[c] + eps);

    {
        const std::int64_t c_total = static_cast<std::int64_t>(C);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < c_total; ++c) {
            const T g = gamma->values[c], b = beta->values[c], mu = mean[c], is = inv_std[c];
            for (std::size_t n = 0; n < N; ++n) {
                const T* in_base = x->values.data() + (n * C + c) * H * W;
                T* out_base = out->values.data() + (n * C + c) * H * W;
                for (std::size_t i = 0; i < H * W; ++i) out_base[i] = g * (in_base[i] - mu) * is + b;
            }
        }
    }

    const bool rg = detail::wants_grad(x) || detail::wants_grad(gamma) || detail::wants_grad(beta);
    out->set_requires_grad(rg);
    if (rg && tape) {
        auto mean_c = std::make_shared<std::vector<T>>(std::move(mean));
        auto inv_std_c = std::make_shared<std::vector<T>>(std::move(inv_std));
        tape->record([x, gamma, beta, out, mean_c, inv_std_c, train, N, C, H, W]() {
            const std::size_t m = N * H * W;
            if (gamma->requires_grad) detail::ensure_grad(gamma);
            if (beta->requires_grad) detail::ensure_grad(beta);
            if (x->requires_grad) detail::ensure_grad(x);
            const std::int64_t c_total = static_cast<std::int64_t>(C);
#pragma omp parallel for schedule(static)
            for (std::int64_t c = 0; c < c_total; ++c) {
                const T mu = (*mean_c)[c], is = (*inv_std_c)[c], g = gamma->values[c];
                // per-channel reductions of dL/dy and dL/dy * x_hat
                T sum_dy{}, sum_dy_xhat{};
                for (std::size_t n = 0; n < N; ++n) {
                    const T* dy = out->grad.data() + (n * C + c) * H * W;
                    const T* xv = x->values.data() + (n * C + c) * H * W;
                    for (std::size_t i = 0; i < H * W; ++i) {
                        sum_dy += dy[i];
                        sum_dy_xhat += dy[i] * (xv[i] - mu) * is;
                    }
                }
                if (gamma->requires_grad) gamma->grad[c] += sum_dy_xhat;
                if (beta->requires_grad) beta->grad[c] += sum_dy;
                if (x->requires_grad) {
                    if (train) {
                        const T inv_m = T{1} / static_cast<T>(m);
                        for (std::size_t n = 0; n < N; ++n) {
                            const T* dy = out->grad.data() + (n * C + c) * H * W;
                            const T* xv = x->values.data() + (n * C + c) * H * W;
                            T* dx = x->grad.data() + (n * C + c) * H * W;
                            for (std::size_t i = 0; i < H * W; ++i) {
                                const T xhat = (xv[i] - mu) * is;
                                dx[i] += g * is * (dy[i] - inv_m * sum_dy - inv_m * xhat * sum_dy_xhat);
                            }
                        }
                    } else {
                        for (std::size_t n = 0; n < N; ++n) {
                            const T* dy = out->grad.data() + (n * C + c) * H * W;
                            T* dx = x->grad.data() + (n * C + c) * H * W;
                            for (std::size_t i = 0; i < H * W; ++i) dx[i] += g * is * dy[i];
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Var<T> relu(Tape<T>* tape, const Var<T>& x) {
    auto out = std::make_shared<Tensor<T>>(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = x->values[i] > T{0} ? x->values[i] : T{0};
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i)
                if (x->values[i] > T{0}) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

// 2x2 max pooling, stride 2; gradient routed to the first maximum in
// row-major window order.
template <typename T>
Var<T> maxpool2d(Tape<T>* tape, const Var<T>& x) {
    if (x->rank() != 4) throw ConfigError("maxpool2d: expects 4-d input");
    const std::size_t N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (H % 2 != 0 || W % 2 != 0) throw ConfigError("maxpool2d: spatial dimensions must be even");
    const std::size_t Ho = H / 2, Wo = W / 2;
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(out->numel());

    const std::int64_t nc_total = static_cast<std::int64_t>(N * C);
#pragma omp parallel for schedule(static)
    for (std::int64_t nc = 0; nc < nc_total; ++nc) {
        const T* in_base = x->values.data() + nc * H * W;
        T* out_base = out->values.data() + nc * Ho * Wo;
        std::uint32_t* arg_base = argmax->data() + nc * Ho * Wo;
        for (std::size_t oh = 0; oh < Ho; ++oh) {
            for (std::size_t ow = 0; ow < Wo; ++ow) {
                const std::size_t i0 = (2 * oh) * W + 2 * ow;
                const std::size_t cand[4] = {i0, i0 + 1, i0 + W, i0 + W + 1};
                std::size_t best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (in_base[cand[k]] > in_base[best]) best = cand[k];
                out_base[oh * Wo + ow] = in_base[best];
                arg_base[oh * Wo + ow] = static_cast<std::uint32_t>(best);
            }
        }
    }

    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out, argmax, N, C, H, W, Ho, Wo]() {
            detail::ensure_grad(x);
            for (std::size_t nc = 0; nc < N * C; ++nc) {
                const T* dy = out->grad.data() + nc * Ho * Wo;
                const std::uint32_t* arg = argmax->data() + nc * Ho * Wo;
                T* dx = x->grad.data() + nc * H * W;
                for (std::size_t i = 0; i < Ho * Wo; ++i) dx[arg[i]] += dy[i];
            }
        });
    }
    return out;
}

template <typename T>
Var<T> global_avg_pool(Tape<T>* tape, const Var<T>& x) {
    if (x->rank() != 4) throw ConfigError("global_avg_pool: expects 4-d input");
    const std::size_t N = x->dim(0), C = x->dim(1), HW = x->dim(2) * x->dim(3);
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{N, C});
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const T* base = x->values.data() + nc * HW;
        T acc{};
        for (std::size_t i = 0; i < HW; ++i) acc += base[i];
        out->values[nc] = acc / static_cast<T>(HW);
    }
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out, N, C, HW]() {
            detail::ensure_grad(x);
            const T inv = T{1} / static_cast<T>(HW);
            for (std::size_t nc = 0; nc < N * C; ++nc) {
                const T g = out->grad[nc] * inv;
                T* dx = x->grad.data() + nc * HW;
                for (std::size_t i = 0; i < HW; ++i) dx[i] += g;
            }
        });
    }
    return out;
}

// x [N,D] * w [D,U] + b [U]
template <typename T>
Var<T> dense(Tape<T>* tape, const Var<T>& x, const Var<T>& w,
             const std::type_identity_t<Var<T>>& bias) {
    if (x->rank() != 2 || w->rank() != 2 || x->dim(1) != w->dim(0))
        throw ConfigError("dense: shape mismatch");
    if (bias && bias->numel() != w->dim(1)) throw ConfigError("dense: bias shape mismatch");
    const std::size_t N = x->dim(0), D = x->dim(1), U = w->dim(1);
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{N, U});
    kernels::matmul_nn(x->values.data(), w->values.data(), out->values.data(), N, D, U);
    if (bias)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t u = 0; u < U; ++u) out->values[n * U + u] += bias->values[u];

    const bool rg = detail::wants_grad(x) || detail::wants_grad(w) || detail::wants_grad(bias);
    out->set_requires_grad(rg);
    if (rg && tape) {
        tape->record([x, w, bias, out, N, D, U]() {
            if (x->requires_grad) {
                detail::ensure_grad(x);
                kernels::matmul_nt(out->grad.data(), w->values.data(), x->grad.data(), N, U, D);
            }
            if (w->requires_grad) {
                detail::ensure_grad(w);
                kernels::matmul_tn(x->values.data(), out->grad.data(), w->grad.data(), D, N, U);
            }
            if (bias && bias->requires_grad) {
                detail::ensure_grad(bias);
                for (std::size_t u = 0; u < U; ++u) {
                    T acc{};
                    for (std::size_t n = 0; n < N; ++n) acc += out->grad[n * U + u];
                    bias->grad[u] += acc;
                }
            }
        });
    }
    return out;
}

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode is the identity. Mask order is the rng
// draw order, so the stream position is part of the determinism contract.
template <typename T>
Var<T> dropout(Tape<T>* tape, const Var<T>& x, T rate, bool train, RngStream& rng) {
    if (!(rate >= T{0} && rate < T{1})) throw ConfigError("dropout: rate must be in [0, 1)");
    if (!train || rate == T{0}) {
        auto out = std::make_shared<Tensor<T>>(*x);
        out->set_requires_grad(detail::wants_grad(x));
        if (out->requires_grad && tape) {
            tape->record([x, out]() {
                detail::ensure_grad(x);
                for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
            });
        }
        return out;
    }
    auto out = std::make_shared<Tensor<T>>(x->shape);
    auto mask = std::make_shared<std::vector<T>>(x->numel());
    const T scale = T{1} / (T{1} - rate);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const T keep = rng.uniform() < static_cast<double>(rate) ? T{0} : scale;
        (*mask)[i] = keep;
        out->values[i] = x->values[i] * keep;
    }
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out, mask]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i] * (*mask)[i];
        });
    }
    return out;
}

template <typename T>
inline T stable_sigmoid(T v) {
    if (v >= T{0}) {
        const T e = std::exp(-v);
        return T{1} / (T{1} + e);
    }
    const T e = std::exp(v);
    return e / (T{1} + e);
}

template <typename T>
Var<T> sigmoid(Tape<T>* tape, const Var<T>& x) {
    auto out = std::make_shared<Tensor<T>>(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = stable_sigmoid(x->values[i]);
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i) {
                const T y = out->values[i];
                x->grad[i] += out->grad[i] * y * (T{1} - y);
            }
        });
    }
    return out;
}

template <typename T>
Var<T> add(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
    if (a->shape != b->shape) throw ConfigError("add: shape mismatch");
    auto out = std::make_shared<Tensor<T>>(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->values[i] = a->values[i] + b->values[i];
    out->set_requires_grad(detail::wants_grad(a) || detail::wants_grad(b));
    if (out->requires_grad && tape) {
        tape->record([a, b, out]() {
            if (a->requires_grad) {
                detail::ensure_grad(a);
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                detail::ensure_grad(b);
                for (std::size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

// elementwise multiply by a constant (non-differentiated) coefficient tensor
template <typename T>
Var<T> cmul(Tape<T>* tape, const Var<T>& x, std::vector<T> coeffs) {
    if (coeffs.size() != x->numel()) throw ConfigError("cmul: coefficient length mismatch");
    auto out = std::make_shared<Tensor<T>>(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->values[i] = x->values[i] * coeffs[i];
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        auto c = std::make_shared<std::vector<T>>(std::move(coeffs));
        tape->record([x, out, c]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i] * (*c)[i];
        });
    }
    return out;
}

template <typename T>
Var<T> reduce_sum(Tape<T>* tape, const Var<T>& x) {
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{1});
    T acc{};
    for (const T v : x->values) acc += v;
    out->values[0] = acc;
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[0];
        });
    }
    return out;
}

template <typename T>
Var<T> reshape(Tape<T>* tape, const Var<T>& x, std::vector<std::size_t> shape) {
    if (Tensor<T>::numel_of(shape) != x->numel()) throw ConfigError("reshape: element count mismatch");
    auto out = std::make_shared<Tensor<T>>(std::move(shape), x->values);
    out->set_requires_grad(detail::wants_grad(x));
    if (out->requires_grad && tape) {
        tape->record([x, out]() {
            detail::ensure_grad(x);
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

// Central-difference comparison of the tape gradient of a scalar function.
// Returns max over coordinates of |analytic - numeric| / max(1e-8, |a| + |n|).
template <typename T>
T grad_check(const std::function<Var<T>(Tape<T>&, const Var<T>&)>& f, const Tensor<T>& point,
             T eps) {
    auto x = make_var(point, true);
    Tape<T> tape;
    auto loss = f(tape, x);
    if (loss->numel() != 1) throw ConfigError("grad_check: function must be scalar-valued");
    tape.backward(loss);
    std::vector<T> analytic = x->grad;

    T worst{};
    for (std::size_t i = 0; i < point.numel(); ++i) {
        auto eval_at = [&](T delta) {
            Tensor<T> shifted = point;
            shifted.values[i] += delta;
            auto xi = make_var(std::move(shifted), false);
            Tape<T> scratch;
            return f(scratch, xi)->values[0];
        };
        const T numeric = (eval_at(eps) - eval_at(-eps)) / (T{2} * eps);
        const T a = analytic[i];
        const T denom = std::max(T{1e-8}, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace apnea::ag
