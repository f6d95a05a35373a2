#include "apnea/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <vector>

#include "apnea/errors.hpp"

namespace apnea::kernels {

namespace {

std::atomic<bool> g_parallel{true};

using i64 = std::int64_t;

// valid output index range [lo, hi) so that o*stride + k - pad lands in [0, size)
inline void valid_range(i64 out_size, i64 in_size, i64 stride, i64 k, i64 pad, i64& lo, i64& hi) {
    const i64 off = k - pad;  // in = o*stride + off
    lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    hi = std::min(out_size, off >= in_size ? i64{0} : (in_size - 1 - off) / stride + 1);
    lo = std::min(lo, hi);
}

// --- serial reference implementations -------------------------------------
//
// Straightforward loop nests, kept for tests and benchmarking. The fast path
// below goes through im2col + GEMM with the identical per-element
// accumulation order, so the two stay bit-comparable.

template <typename T>
void conv2d_forward_ref(const T* in, const T* w, T* out, const Conv2dDims& d, i64 n, i64 f) {
    const i64 C = d.c_in, H = d.h_in, W = d.w_in, KH = d.kh, KW = d.kw;
    const i64 Ho = d.h_out, Wo = d.w_out, s = d.stride, pt = d.pad_top, pl = d.pad_left;
    T* out_base = out + (n * static_cast<i64>(d.c_out) + f) * Ho * Wo;
    for (i64 c = 0; c < C; ++c) {
        for (i64 ki = 0; ki < KH; ++ki) {
            i64 oh_lo, oh_hi;
            valid_range(Ho, H, s, ki, pt, oh_lo, oh_hi);
            for (i64 kj = 0; kj < KW; ++kj) {
                i64 ow_lo, ow_hi;
                valid_range(Wo, W, s, kj, pl, ow_lo, ow_hi);
                const T wv = w[((f * C + c) * KH + ki) * KW + kj];
                for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                    const i64 ih = oh * s + ki - pt;
                    const T* in_row = in + ((n * C + c) * H + ih) * W;
                    T* out_row = out_base + oh * Wo;
                    for (i64 ow = ow_lo; ow < ow_hi; ++ow)
                        out_row[ow] += wv * in_row[ow * s + kj - pl];
                }
            }
        }
    }
}

// gather form matching the col2im accumulation order: per (c, ki, kj) a
// weight-row dot with the upstream gradient
template <typename T>
void conv2d_backward_input_ref(const T* dy, const T* w, T* dx, const Conv2dDims& d, i64 n) {
    const i64 C = d.c_in, H = d.h_in, W = d.w_in, F = d.c_out, KH = d.kh, KW = d.kw;
    const i64 Ho = d.h_out, Wo = d.w_out, s = d.stride, pt = d.pad_top, pl = d.pad_left;
    const i64 K = C * KH * KW;
    for (i64 c = 0; c < C; ++c) {
        for (i64 ki = 0; ki < KH; ++ki) {
            i64 oh_lo, oh_hi;
            valid_range(Ho, H, s, ki, pt, oh_lo, oh_hi);
            for (i64 kj = 0; kj < KW; ++kj) {
                i64 ow_lo, ow_hi;
                valid_range(Wo, W, s, kj, pl, ow_lo, ow_hi);
                const i64 k = (c * KH + ki) * KW + kj;
                for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                    const i64 ih = oh * s + ki - pt;
                    T* dx_row = dx + ((n * C + c) * H + ih) * W;
                    for (i64 ow = ow_lo; ow < ow_hi; ++ow) {
                        T acc{};
                        for (i64 f = 0; f < F; ++f)
                            acc += w[f * K + k] * dy[((n * F + f) * Ho + oh) * Wo + ow];
                        dx_row[ow * s + kj - pl] += acc;
                    }
                }
            }
        }
    }
}

// sample-major partial sums matching the per-sample GEMM accumulation order
template <typename T>
void conv2d_backward_weight_ref(const T* in, const T* dy, T* dw, const Conv2dDims& d, i64 f) {
    const i64 N = d.n, C = d.c_in, H = d.h_in, W = d.w_in, KH = d.kh, KW = d.kw;
    const i64 Ho = d.h_out, Wo = d.w_out, s = d.stride, pt = d.pad_top, pl = d.pad_left;
    for (i64 n = 0; n < N; ++n) {
        const T* dy_base = dy + (n * static_cast<i64>(d.c_out) + f) * Ho * Wo;
        for (i64 c = 0; c < C; ++c) {
            for (i64 ki = 0; ki < KH; ++ki) {
                i64 oh_lo, oh_hi;
                valid_range(Ho, H, s, ki, pt, oh_lo, oh_hi);
                for (i64 kj = 0; kj < KW; ++kj) {
                    i64 ow_lo, ow_hi;
                    valid_range(Wo, W, s, kj, pl, ow_lo, ow_hi);
                    T acc{};
                    for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                        const i64 ih = oh * s + ki - pt;
                        const T* in_row = in + ((n * C + c) * H + ih) * W;
                        const T* dy_row = dy_base + oh * Wo;
                        for (i64 ow = ow_lo; ow < ow_hi; ++ow)
                            acc += dy_row[ow] * in_row[ow * s + kj - pl];
                    }
                    dw[((f * C + c) * KH + ki) * KW + kj] += acc;
                }
            }
        }
    }
}

// --- im2col fast path ------------------------------------------------------

// col is [C*kh*kw x Ho*Wo], zero-padded taps included
template <typename T>
void im2col(const T* in, const Conv2dDims& d, i64 n, std::vector<T>& col) {
    const i64 C = d.c_in, H = d.h_in, W = d.w_in, KH = d.kh, KW = d.kw;
    const i64 Ho = d.h_out, Wo = d.w_out, s = d.stride, pt = d.pad_top, pl = d.pad_left;
    const i64 hw_out = Ho * Wo;
    col.assign(static_cast<std::size_t>(C * KH * KW * hw_out), T{});
    for (i64 c = 0; c < C; ++c) {
        for (i64 ki = 0; ki < KH; ++ki) {
            i64 oh_lo, oh_hi;
            valid_range(Ho, H, s, ki, pt, oh_lo, oh_hi);
            for (i64 kj = 0; kj < KW; ++kj) {
                i64 ow_lo, ow_hi;
                valid_range(Wo, W, s, kj, pl, ow_lo, ow_hi);
                T* col_row = col.data() + ((c * KH + ki) * KW + kj) * hw_out;
                for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                    const i64 ih = oh * s + ki - pt;
                    const T* in_row = in + ((n * C + c) * H + ih) * W;
                    T* dst = col_row + oh * Wo;
                    if (s == 1) {
                        const T* src = in_row + kj - pl + ow_lo;
                        for (i64 ow = ow_lo; ow < ow_hi; ++ow) dst[ow] = src[ow - ow_lo];
                    } else {
                        for (i64 ow = ow_lo; ow < ow_hi; ++ow) dst[ow] = in_row[ow * s + kj - pl];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const std::vector<T>& col, const Conv2dDims& d, i64 n, T* dx) {
    const i64 C = d.c_in, H = d.h_in, W = d.w_in, KH = d.kh, KW = d.kw;
    const i64 Ho = d.h_out, Wo = d.w_out, s = d.stride, pt = d.pad_top, pl = d.pad_left;
    const i64 hw_out = Ho * Wo;
    for (i64 c = 0; c < C; ++c) {
        for (i64 ki = 0; ki < KH; ++ki) {
            i64 oh_lo, oh_hi;
            valid_range(Ho, H, s, ki, pt, oh_lo, oh_hi);
            for (i64 kj = 0; kj < KW; ++kj) {
                i64 ow_lo, ow_hi;
                valid_range(Wo, W, s, kj, pl, ow_lo, ow_hi);
                const T* col_row = col.data() + ((c * KH + ki) * KW + kj) * hw_out;
                for (i64 oh = oh_lo; oh < oh_hi; ++oh) {
                    const i64 ih = oh * s + ki - pt;
                    T* dx_row = dx + ((n * C + c) * H + ih) * W;
                    const T* src = col_row + oh * Wo;
                    for (i64 ow = ow_lo; ow < ow_hi; ++ow) dx_row[ow * s + kj - pl] += src[ow];
                }
            }
        }
    }
}

// out[M,N] += A[M,K] * B[K,N], single-thread body shared by the matmul entry
// points and the per-sample conv GEMMs
template <typename T>
void gemm_nn_body(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* out_row = out + i * n;
        const T* a_row = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = a_row[kk];
            const T* b_row = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
        }
    }
}

template <typename T>
void gemm_nt_body(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* a_row = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* b_row = b + j * k;
            T acc{};
            for (std::size_t kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
            out[i * n + j] += acc;
        }
    }
}

template <typename T>
void gemm_tn_body(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const T* a_row = a + kk * m;
        const T* b_row = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = a_row[i];
            T* out_row = out + i * n;
            for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
        }
    }
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

Conv2dDims conv2d_dims(std::size_t n, std::size_t c_in, std::size_t h_in, std::size_t w_in,
                       std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t stride,
                       bool same_padding) {
    Conv2dDims d;
    d.n = n;
    d.c_in = c_in;
    d.h_in = h_in;
    d.w_in = w_in;
    d.c_out = c_out;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    if (same_padding) {
        d.h_out = (h_in + stride - 1) / stride;
        d.w_out = (w_in + stride - 1) / stride;
        const std::size_t pad_h = std::max<std::size_t>((d.h_out - 1) * stride + kh, h_in) - h_in;
        const std::size_t pad_w = std::max<std::size_t>((d.w_out - 1) * stride + kw, w_in) - w_in;
        d.pad_top = pad_h / 2;
        d.pad_left = pad_w / 2;
    } else {
        if (h_in < kh || w_in < kw)
            throw ConfigError("conv2d: kernel larger than input under valid padding");
        d.h_out = (h_in - kh) / stride + 1;
        d.w_out = (w_in - kw) / stride + 1;
    }
    return d;
}

template <typename T>
void conv2d_forward_serial(const T* in, const T* w, T* out, const Conv2dDims& d) {
    for (i64 n = 0; n < static_cast<i64>(d.n); ++n)
        for (i64 f = 0; f < static_cast<i64>(d.c_out); ++f) conv2d_forward_ref(in, w, out, d, n, f);
}

template <typename T>
void conv2d_forward(const T* in, const T* w, T* out, const Conv2dDims& d) {
    if (!parallel_enabled()) {
        conv2d_forward_serial(in, w, out, d);
        return;
    }
    const i64 n_total = d.n;
    const std::size_t K = d.c_in * d.kh * d.kw;
    const std::size_t hw_out = d.h_out * d.w_out;
#pragma omp parallel
    {
        std::vector<T> col;
#pragma omp for schedule(static)
        for (i64 n = 0; n < n_total; ++n) {
            im2col(in, d, n, col);
            gemm_nn_body(w, col.data(), out + static_cast<std::size_t>(n) * d.c_out * hw_out,
                         d.c_out, K, hw_out);
        }
    }
}

template <typename T>
void conv2d_backward_input_serial(const T* dy, const T* w, T* dx, const Conv2dDims& d) {
    for (i64 n = 0; n < static_cast<i64>(d.n); ++n) conv2d_backward_input_ref(dy, w, dx, d, n);
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const Conv2dDims& d) {
    if (!parallel_enabled()) {
        conv2d_backward_input_serial(dy, w, dx, d);
        return;
    }
    const i64 n_total = d.n;
    const std::size_t K = d.c_in * d.kh * d.kw;
    const std::size_t hw_out = d.h_out * d.w_out;
#pragma omp parallel
    {
        std::vector<T> dcol;
#pragma omp for schedule(static)
        for (i64 n = 0; n < n_total; ++n) {
            dcol.assign(K * hw_out, T{});
            gemm_tn_body(w, dy + static_cast<std::size_t>(n) * d.c_out * hw_out, dcol.data(), K,
                         d.c_out, hw_out);
            col2im_add(dcol, d, n, dx);
        }
    }
}

template <typename T>
void conv2d_backward_weight_serial(const T* in, const T* dy, T* dw, const Conv2dDims& d) {
    for (i64 f = 0; f < static_cast<i64>(d.c_out); ++f) conv2d_backward_weight_ref(in, dy, dw, d, f);
}

template <typename T>
void conv2d_backward_weight(const T* in, const T* dy, T* dw, const Conv2dDims& d) {
    if (!parallel_enabled()) {
        conv2d_backward_weight_serial(in, dy, dw, d);
        return;
    }
    const std::size_t K = d.c_in * d.kh * d.kw;
    const std::size_t hw_out = d.h_out * d.w_out;
    // per-sample GEMMs accumulate in sample order; the weight matrix is
    // shared, so samples run sequentially with the GEMM rows parallelized
    std::vector<T> col;
    for (std::size_t n = 0; n < d.n; ++n) {
        im2col(in, d, static_cast<i64>(n), col);
        const T* dy_n = dy + n * d.c_out * hw_out;
        const i64 f_total = static_cast<i64>(d.c_out);
#pragma omp parallel for schedule(static)
        for (i64 f = 0; f < f_total; ++f)
            gemm_nt_body(dy_n + static_cast<std::size_t>(f) * hw_out, col.data(),
                         dw + static_cast<std::size_t>(f) * K, 1, hw_out, K);
    }
}

template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    gemm_nn_body(a, b, out, m, k, n);
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    if (!parallel_enabled()) {
        matmul_nn_serial(a, b, out, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < static_cast<i64>(m); ++i)
        gemm_nn_body(a + static_cast<std::size_t>(i) * k, b, out + static_cast<std::size_t>(i) * n,
                     1, k, n);
}

template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    gemm_nt_body(a, b, out, m, k, n);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    if (!parallel_enabled()) {
        matmul_nt_serial(a, b, out, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < static_cast<i64>(m); ++i)
        gemm_nt_body(a + static_cast<std::size_t>(i) * k, b, out + static_cast<std::size_t>(i) * n,
                     1, k, n);
}

template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    gemm_tn_body(a, b, out, m, k, n);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
    if (!parallel_enabled()) {
        matmul_tn_serial(a, b, out, m, k, n);
        return;
    }
    // column blocks keep the k-major accumulation order per output element
    const std::size_t n_threads_hint = 4;
    const std::size_t block = std::max<std::size_t>(1, (n + n_threads_hint - 1) / n_threads_hint);
    const i64 n_blocks = static_cast<i64>((n + block - 1) / block);
#pragma omp parallel for schedule(static)
    for (i64 bi = 0; bi < n_blocks; ++bi) {
        const std::size_t j0 = static_cast<std::size_t>(bi) * block;
        const std::size_t j1 = std::min(n, j0 + block);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T* a_row = a + kk * m;
            const T* b_row = b + kk * n;
            for (std::size_t i = 0; i < m; ++i) {
                const T av = a_row[i];
                T* out_row = out + i * n;
                for (std::size_t j = j0; j < j1; ++j) out_row[j] += av * b_row[j];
            }
        }
    }
}

#define APNEA_INSTANTIATE_KERNELS(T)                                                               \
    template void conv2d_forward<T>(const T*, const T*, T*, const Conv2dDims&);                    \
    template void conv2d_forward_serial<T>(const T*, const T*, T*, const Conv2dDims&);             \
    template void conv2d_backward_input<T>(const T*, const T*, T*, const Conv2dDims&);             \
    template void conv2d_backward_input_serial<T>(const T*, const T*, T*, const Conv2dDims&);      \
    template void conv2d_backward_weight<T>(const T*, const T*, T*, const Conv2dDims&);            \
    template void conv2d_backward_weight_serial<T>(const T*, const T*, T*, const Conv2dDims&);     \
    template void matmul_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);     \
    template void matmul_nn_serial<T>(const T*, const T*, T*, std::size_t, std::size_t,            \
                                      std::size_t);                                                \
    template void matmul_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);     \
    template void matmul_nt_serial<T>(const T*, const T*, T*, std::size_t, std::size_t,            \
                                      std::size_t);                                                \
    template void matmul_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);     \
    template void matmul_tn_serial<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);

APNEA_INSTANTIATE_KERNELS(float)
APNEA_INSTANTIATE_KERNELS(double)

#undef APNEA_INSTANTIATE_KERNELS

}  // namespace apnea::kernels
