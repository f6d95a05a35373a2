// The fixed finite-difference suite: every layer plus all three losses,
// checked in 64-bit precision. Shared by the unit tests and the acceptance
// runner.
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "apnea/autograd.hpp"
#include "apnea/losses.hpp"
#include "apnea/rng.hpp"
#include "apnea/tensor.hpp"

namespace apnea::testing {

struct GradCase {
    std::string name;
    double max_rel_err;
};

namespace detail {

using D = double;
using VarD = ag::Var<D>;
using TapeD = ag::Tape<D>;

inline Tensor<D> random_tensor(const std::vector<std::size_t>& shape, std::uint64_t seed,
                               double min_abs = 0.0) {
    RngStream rng(seed);
    Tensor<D> t(shape);
    for (auto& v : t.values) {
        v = rng.normal();
        if (min_abs > 0.0 && std::abs(v) < min_abs) v += v >= 0.0 ? min_abs : -min_abs;
    }
    return t;
}

inline std::vector<D> random_coeffs(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<D> c(n);
    for (auto& v : c) v = rng.normal();
    return c;
}

// random-weighted sum makes the scalar sensitive to every output element
inline VarD probe(TapeD& tape, const VarD& x, std::uint64_t seed) {
    return ag::reduce_sum(&tape, ag::cmul(&tape, x, random_coeffs(x->numel(), seed)));
}

inline std::vector<D> unit_labels(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<D> y(n);
    for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return y;
}

inline Tensor<D> probs_tensor(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    Tensor<D> t({n});
    for (auto& v : t.values) v = rng.uniform(0.1, 0.9);
    return t;
}

}  // namespace detail

inline std::vector<GradCase> run_gradcheck_suite() {
    using namespace detail;
    constexpr double kEps = 1e-5;
    std::vector<GradCase> results;

    auto run = [&](const std::string& name, const Tensor<D>& point,
                   std::function<VarD(TapeD&, const VarD&)> f) {
        results.push_back({name, ag::grad_check<D>(f, point, kEps)});
    };

    // conv2d
    {
        const auto w = ag::make_var(random_tensor({3, 2, 3, 3}, 101), false);
        const auto b = ag::make_var(random_tensor({3}, 102), false);
        run("conv2d_s1_same_input", random_tensor({1, 2, 5, 5}, 103),
            [=](TapeD& t, const VarD& x) {
                return probe(t, ag::conv2d(&t, x, w, b, 1, ag::Padding::same), 1);
            });
    }
    {
        const auto x = ag::make_var(random_tensor({1, 2, 5, 5}, 104), false);
        const auto b = ag::make_var(random_tensor({3}, 105), false);
        run("conv2d_s1_same_weight", random_tensor({3, 2, 3, 3}, 106),
            [=](TapeD& t, const VarD& w) {
                return probe(t, ag::conv2d(&t, x, w, b, 1, ag::Padding::same), 2);
            });
    }
    {
        const auto w = ag::make_var(random_tensor({2, 1, 3, 3}, 107), false);
        run("conv2d_s2_same_input", random_tensor({2, 1, 6, 6}, 108),
            [=](TapeD& t, const VarD& x) {
                return probe(t, ag::conv2d(&t, x, w, nullptr, 2, ag::Padding::same), 3);
            });
    }
    {
        const auto x = ag::make_var(random_tensor({1, 2, 6, 6}, 109), false);
        run("conv2d_valid_weight", random_tensor({2, 2, 3, 3}, 110),
            [=](TapeD& t, const VarD& w) {
                return probe(t, ag::conv2d(&t, x, w, nullptr, 1, ag::Padding::valid), 4);
            });
    }
    {
        const auto x = ag::make_var(random_tensor({1, 2, 4, 4}, 111), false);
        const auto w = ag::make_var(random_tensor({3, 2, 3, 3}, 112), false);
        run("conv2d_bias", random_tensor({3}, 113), [=](TapeD& t, const VarD& b) {
            return probe(t, ag::conv2d(&t, x, w, b, 1, ag::Padding::same), 5);
        });
    }

    // batchnorm (train mode, fresh running stats per evaluation)
    {
        const auto gamma = ag::make_var(random_tensor({3}, 114, 0.2), false);
        const auto beta = ag::make_var(random_tensor({3}, 115), false);
        run("batchnorm_train_input", random_tensor({2, 3, 4, 4}, 116),
            [=](TapeD& t, const VarD& x) {
                std::vector<D> rm(3, 0.0), rv(3, 1.0);
                return probe(t, ag::batchnorm2d(&t, x, gamma, beta, rm, rv, true, 0.1, 1e-5), 6);
            });
    }
    {
        const auto x = ag::make_var(random_tensor({2, 3, 4, 4}, 117), false);
        const auto beta = ag::make_var(random_tensor({3}, 118), false);
        run("batchnorm_train_gamma", random_tensor({3}, 119, 0.2),
            [=](TapeD& t, const VarD& gamma) {
                std::vector<D> rm(3, 0.0), rv(3, 1.0);
                return probe(t, ag::batchnorm2d(&t, x, gamma, beta, rm, rv, true, 0.1, 1e-5), 7);
            });
    }
    {
        const auto x = ag::make_var(random_tensor({2, 3, 4, 4}, 120), false);
        const auto gamma = ag::make_var(random_tensor({3}, 121, 0.2), false);
        run("batchnorm_train_beta", random_tensor({3}, 122), [=](TapeD& t, const VarD& beta) {
            std::vector<D> rm(3, 0.0), rv(3, 1.0);
            return probe(t, ag::batchnorm2d(&t, x, gamma, beta, rm, rv, true, 0.1, 1e-5), 8);
        });
    }

    // activations and pooling
    run("relu_input", random_tensor({2, 3, 4, 4}, 123, 0.05), [](TapeD& t, const VarD& x) {
        return probe(t, ag::relu(&t, x), 9);
    });
    run("maxpool_input", random_tensor({2, 2, 4, 4}, 124, 0.01), [](TapeD& t, const VarD& x) {
        return probe(t, ag::maxpool2d(&t, x), 10);
    });
    run("gap_input", random_tensor({2, 3, 4, 4}, 125), [](TapeD& t, const VarD& x) {
        return probe(t, ag::global_avg_pool(&t, x), 11);
    });

    // dense
    {
        const auto w = ag::make_var(random_tensor({5, 4}, 126), false);
        const auto b = ag::make_var(random_tensor({4}, 127), false);
        run("dense_input", random_tensor({3, 5}, 128), [=](TapeD& t, const VarD& x) {
            return probe(t, ag::dense(&t, x, w, b), 12);
        });
    }
    {
        const auto x = ag::make_var(random_tensor({3, 5}, 129), false);
        const auto b = ag::make_var(random_tensor({4}, 130), false);
        run("dense_weight", random_tensor({5, 4}, 131), [=](TapeD& t, const VarD& w) {
            return probe(t, ag::dense(&t, x, w, b), 13);
        });
    }
    {
        const auto x = ag::make_var(random_tensor({3, 5}, 132), false);
        const auto w = ag::make_var(random_tensor({5, 4}, 133), false);
        run("dense_bias", random_tensor({4}, 134), [=](TapeD& t, const VarD& b) {
            return probe(t, ag::dense(&t, x, w, b), 14);
        });
    }

    run("sigmoid_input", random_tensor({2, 7}, 135), [](TapeD& t, const VarD& x) {
        return probe(t, ag::sigmoid(&t, x), 15);
    });

    // residual-style fan-out: x feeds both the branch and the shortcut
    run("residual_add_fanout", random_tensor({2, 3, 4, 4}, 136, 0.05),
        [](TapeD& t, const VarD& x) {
            return probe(t, ag::add(&t, ag::relu(&t, x), x), 16);
        });

    // dropout with a mask frozen by reseeding per evaluation
    run("dropout_train_input", random_tensor({4, 8}, 137), [](TapeD& t, const VarD& x) {
        RngStream rng(4242);
        return probe(t, ag::dropout(&t, x, 0.5, true, rng), 17);
    });

    // losses
    {
        const auto y = unit_labels(16, 138);
        run("bce_prob", probs_tensor(16, 139), [=](TapeD& t, const VarD& p) {
            return train::bce_loss(&t, p, y);
        });
        run("weighted_bce_prob", probs_tensor(16, 140), [=](TapeD& t, const VarD& p) {
            return train::weighted_bce_loss(&t, p, y, 2.5, 0.5);
        });
        run("focal_prob", probs_tensor(16, 141), [=](TapeD& t, const VarD& p) {
            return train::focal_loss(&t, p, y, 0.25, 2.0);
        });
    }

    return results;
}

}  // namespace apnea::testing
