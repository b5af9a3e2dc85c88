#pragma once

#include <stdexcept>

#include "posekit/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Convolution kernels, two implementations each:
//   *_naive  - direct loop nest, kept as the reference for tests/benchmarks
//   *_fast   - im2col + GEMM, OpenMP-parallel over the batch
// Convention: cross-correlation, "same" padding for odd kernels,
// out = (in + 2*pad - k) / stride + 1 with pad = (k - 1) / 2.

namespace posekit::kernels {

inline int conv_out_dim(int in, int k, int stride) {
    const int pad = (k - 1) / 2;
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void check_conv_shapes(const Tensor<T>& x, const Tensor<T>& w, int stride) {
    if (x.rank() != 4 || w.rank() != 4)
        throw std::invalid_argument("conv2d: expected 4-d input and kernel");
    if (x.dim(1) != w.dim(1))
        throw std::invalid_argument("conv2d: channel mismatch " + shape_str(x.shape()) +
                                    " vs " + shape_str(w.shape()));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
}

template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& x, const Tensor<T>& w, int stride) {
    check_conv_shapes(x, w, stride);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int Ho = conv_out_dim(H, kh, stride), Wo = conv_out_dim(W, kw, stride);
    Tensor<T> y({N, F, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    T acc = 0;
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride + ky - ph;
                                const int ix = ox * stride + kx - pw;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x.at(n, c, iy, ix) * w.at(f, c, ky, kx);
                            }
                    y.at(n, f, oy, ox) = acc;
                }
    return y;
}

// C[M,N] += A[M,K] * B[K,N], all row-major dense.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<int64_t>(i) * k;
        T* crow = c + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride, T* col) {
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int Ho = conv_out_dim(H, kh, stride), Wo = conv_out_dim(W, kw, stride);
    int64_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx, ++r) {
                T* dst = col + r * Ho * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ky - ph;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kx - pw;
                        dst[oy * Wo + ox] =
                            (iy < 0 || iy >= H || ix < 0 || ix >= W)
                                ? T(0)
                                : img[(static_cast<int64_t>(c) * H + iy) * W + ix];
                    }
                }
            }
}

template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int kh, int kw, int stride, T* img) {
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int Ho = conv_out_dim(H, kh, stride), Wo = conv_out_dim(W, kw, stride);
    int64_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx, ++r) {
                const T* src = col + r * Ho * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ky - ph;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kx - pw;
                        if (ix < 0 || ix >= W) continue;
                        img[(static_cast<int64_t>(c) * H + iy) * W + ix] += src[oy * Wo + ox];
                    }
                }
            }
}

template <typename T>
Tensor<T> conv2d_forward_fast(const Tensor<T>& x, const Tensor<T>& w, int stride) {
    check_conv_shapes(x, w, stride);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Ho = conv_out_dim(H, kh, stride), Wo = conv_out_dim(W, kw, stride);
    const int K = C * kh * kw;
    Tensor<T> y({N, F, Ho, Wo});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int n = 0; n < N; ++n) {
        std::vector<T> col(static_cast<size_t>(K) * Ho * Wo);
        im2col(x.data() + static_cast<int64_t>(n) * C * H * W, C, H, W, kh, kw, stride,
               col.data());
        gemm_acc(w.data(), col.data(), y.data() + static_cast<int64_t>(n) * F * Ho * Wo,
                 F, K, Ho * Wo);
    }
    return y;
}

template <typename T>
void conv2d_backward_naive(const Tensor<T>& x, const Tensor<T>& w, int stride,
                           const Tensor<T>& gy, Tensor<T>& gx, Tensor<T>& gw) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    const T g = gy.at(n, f, oy, ox);
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride + ky - ph;
                                const int ix = ox * stride + kx - pw;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                gx.at(n, c, iy, ix) += g * w.at(f, c, ky, kx);
                                gw.at(f, c, ky, kx) += g * x.at(n, c, iy, ix);
                            }
                }
}

// Accumulates into gx and gw (both must be pre-sized, zero or carrying prior grads).
template <typename T>
void conv2d_backward_fast(const Tensor<T>& x, const Tensor<T>& w, int stride,
                          const Tensor<T>& gy, Tensor<T>& gx, Tensor<T>& gw) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Ho = gy.dim(2), Wo = gy.dim(3);
    const int K = C * kh * kw;

    // gw = sum_n gy_n * col_n^T; gx_n = w^T * gy_n scattered back.
    // Transposed weight layout [K, F] built once.
    std::vector<T> wt(static_cast<size_t>(K) * F);
    for (int f = 0; f < F; ++f)
        for (int p = 0; p < K; ++p) wt[static_cast<size_t>(p) * F + f] = w[static_cast<int64_t>(f) * K + p];

#ifdef _OPENMP
    const int nthreads = omp_get_max_threads();
#else
    const int nthreads = 1;
#endif
    std::vector<std::vector<T>> gw_acc(static_cast<size_t>(nthreads),
                                       std::vector<T>(static_cast<size_t>(F) * K, T(0)));

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int n = 0; n < N; ++n) {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        std::vector<T> col(static_cast<size_t>(K) * Ho * Wo);
        std::vector<T> colt(static_cast<size_t>(Ho) * Wo * K);
        im2col(x.data() + static_cast<int64_t>(n) * C * H * W, C, H, W, kh, kw, stride,
               col.data());
        // col^T for the weight-gradient GEMM
        for (int p = 0; p < K; ++p)
            for (int q = 0; q < Ho * Wo; ++q)
                colt[static_cast<size_t>(q) * K + p] = col[static_cast<size_t>(p) * Ho * Wo + q];
        const T* gyn = gy.data() + static_cast<int64_t>(n) * F * Ho * Wo;
        gemm_acc(gyn, colt.data(), gw_acc[static_cast<size_t>(tid)].data(), F, Ho * Wo, K);

        std::vector<T> colg(static_cast<size_t>(K) * Ho * Wo, T(0));
        gemm_acc(wt.data(), gyn, colg.data(), K, F, Ho * Wo);
        col2im_acc(colg.data(), C, H, W, kh, kw, stride,
                   gx.data() + static_cast<int64_t>(n) * C * H * W);
    }
    for (int t = 0; t < nthreads; ++t)
        for (int64_t i = 0; i < gw.size(); ++i) gw[i] += gw_acc[static_cast<size_t>(t)][static_cast<size_t>(i)];
}

}  // namespace posekit::kernels
