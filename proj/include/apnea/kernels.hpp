#pragma once

#include <cstddef>

namespace apnea::kernels {

// Runtime switch between the OpenMP kernels and the serial reference ones.
// Both variants accumulate each output element in the same order, so results
// are bit-identical; the serial path is kept for tests and benchmarking.
bool parallel_enabled();
void set_parallel(bool on);

struct Conv2dDims {
    std::size_t n = 0, c_in = 0, h_in = 0, w_in = 0;
    std::size_t c_out = 0, kh = 0, kw = 0;
    std::size_t stride = 1;
    std::size_t pad_top = 0, pad_left = 0;
    std::size_t h_out = 0, w_out = 0;
};

// Output size rules: same -> ceil(H/stride) with zero padding, valid ->
// floor((H-k)/stride)+1 with no padding.
Conv2dDims conv2d_dims(std::size_t n, std::size_t c_in, std::size_t h_in, std::size_t w_in,
                       std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t stride,
                       bool same_padding);

// All kernels accumulate into the output buffer (callers zero-fill for a
// plain assignment). Layouts: in [N,C,H,W], w [F,C,kh,kw], out [N,F,Ho,Wo].

template <typename T>
void conv2d_forward(const T* in, const T* w, T* out, const Conv2dDims& d);
template <typename T>
void conv2d_forward_serial(const T* in, const T* w, T* out, const Conv2dDims& d);

// dx [N,C,H,W] += dy convolved back through w
template <typename T>
void conv2d_backward_input(const T* dy, const T* w, T* dx, const Conv2dDims& d);
template <typename T>
void conv2d_backward_input_serial(const T* dy, const T* w, T* dx, const Conv2dDims& d);

// dw [F,C,kh,kw] += correlation of input with dy
template <typename T>
void conv2d_backward_weight(const T* in, const T* dy, T* dw, const Conv2dDims& d);
template <typename T>
void conv2d_backward_weight_serial(const T* in, const T* dy, T* dw, const Conv2dDims& d);

// out[M,N] += A[M,K] * B[K,N]
template <typename T>
void matmul_nn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);

// out[M,N] += A[M,K] * B^T, B stored [N,K]
template <typename T>
void matmul_nt(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);

// out[M,N] += A^T * B, A stored [K,M]
template <typename T>
void matmul_tn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n);

}  // namespace apnea::kernels
