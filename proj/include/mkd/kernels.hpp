#pragma once

// Dense compute kernels used by the network layers.
//
// Every kernel exists twice: `serial::` is the plain reference loop nest kept
// for testing, `parallel::` is the OpenMP version the layers call. Both take
// contiguous row-major buffers and must agree to rounding.

#include <cstddef>

#include "mkd/tensor.hpp"

namespace mkd::kernels {

/// Geometry of a square-kernel, unit-stride 2-D convolution.
struct ConvGeometry {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t kernel = 3;
    std::size_t pad = 1;

    std::size_t out_height() const { return height + 2 * pad - kernel + 1; }
    std::size_t out_width() const { return width + 2 * pad - kernel + 1; }
    std::size_t patch_size() const { return channels * kernel * kernel; }
};

namespace serial {

/// C[MxN] = beta*C + A[MxK] * B[KxN]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);
/// C[MxN] = beta*C + A[MxK] * B[NxK]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);
/// C[MxN] = beta*C + A[KxM]^T * B[KxN]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);

/// images [B, C, H, W] -> columns [C*k*k, B*OH*OW]
void im2col(const ConvGeometry& g, std::size_t batch, const Scalar* images, Scalar* cols);
/// Adjoint of im2col: accumulates columns back into [B, C, H, W] (output is overwritten).
void col2im(const ConvGeometry& g, std::size_t batch, const Scalar* cols, Scalar* images);

/// 2x2/stride-2 max pooling over [planes, H, W]; argmax holds the flat input index per output.
void maxpool2(std::size_t planes, std::size_t h, std::size_t w, const Scalar* in, Scalar* out,
              std::size_t* argmax);
void maxpool2_backward(std::size_t planes, std::size_t h, std::size_t w, const Scalar* grad_out,
                       const std::size_t* argmax, Scalar* grad_in);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta = 0.0);
void im2col(const ConvGeometry& g, std::size_t batch, const Scalar* images, Scalar* cols);
void col2im(const ConvGeometry& g, std::size_t batch, const Scalar* cols, Scalar* images);
void maxpool2(std::size_t planes, std::size_t h, std::size_t w, const Scalar* in, Scalar* out,
              std::size_t* argmax);
void maxpool2_backward(std::size_t planes, std::size_t h, std::size_t w, const Scalar* grad_out,
                       const std::size_t* argmax, Scalar* grad_in);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace mkd::kernels
