#include <algorithm>

#include "mkd/kernels.hpp"

namespace mkd::kernels::serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Scalar acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = (beta == 0.0 ? 0.0 : beta * c[i * n + j]) + acc;
        }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Scalar acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = (beta == 0.0 ? 0.0 : beta * c[i * n + j]) + acc;
        }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Scalar acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = (beta == 0.0 ? 0.0 : beta * c[i * n + j]) + acc;
        }
}

void im2col(const ConvGeometry& g, std::size_t batch, const Scalar* images, Scalar* cols) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const std::size_t ncols = batch * oh * ow;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const std::size_t row = (c * g.kernel + ki) * g.kernel + kj;
                for (std::size_t bi = 0; bi < batch; ++bi)
                    for (std::size_t y = 0; y < oh; ++y)
                        for (std::size_t x = 0; x < ow; ++x) {
                            const auto iy = static_cast<std::ptrdiff_t>(y + ki) - static_cast<std::ptrdiff_t>(g.pad);
                            const auto ix = static_cast<std::ptrdiff_t>(x + kj) - static_cast<std::ptrdiff_t>(g.pad);
                            Scalar v = 0.0;
                            if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width))
                                v = images[((bi * g.channels + c) * g.height + static_cast<std::size_t>(iy)) * g.width +
                                           static_cast<std::size_t>(ix)];
                            cols[row * ncols + (bi * oh + y) * ow + x] = v;
                        }
            }
}

void col2im(const ConvGeometry& g, std::size_t batch, const Scalar* cols, Scalar* images) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const std::size_t ncols = batch * oh * ow;
    std::fill_n(images, batch * g.channels * g.height * g.width, 0.0);
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const std::size_t row = (c * g.kernel + ki) * g.kernel + kj;
                for (std::size_t bi = 0; bi < batch; ++bi)
                    for (std::size_t y = 0; y < oh; ++y)
                        for (std::size_t x = 0; x < ow; ++x) {
                            const auto iy = static_cast<std::ptrdiff_t>(y + ki) - static_cast<std::ptrdiff_t>(g.pad);
                            const auto ix = static_cast<std::ptrdiff_t>(x + kj) - static_cast<std::ptrdiff_t>(g.pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
                                ix >= static_cast<std::ptrdiff_t>(g.width))
                                continue;
                            images[((bi * g.channels + c) * g.height + static_cast<std::size_t>(iy)) * g.width +
                                   static_cast<std::size_t>(ix)] += cols[row * ncols + (bi * oh + y) * ow + x];
                        }
            }
}

void maxpool2(std::size_t planes, std::size_t h, std::size_t w, const Scalar* in, Scalar* out,
              std::size_t* argmax) {
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                std::size_t best = (p * h + 2 * y) * w + 2 * x;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (p * h + 2 * y + dy) * w + 2 * x + dx;
                        if (in[idx] > in[best]) best = idx;
                    }
                out[(p * oh + y) * ow + x] = in[best];
                argmax[(p * oh + y) * ow + x] = best;
            }
}

void maxpool2_backward(std::size_t planes, std::size_t h, std::size_t w, const Scalar* grad_out,
                       const std::size_t* argmax, Scalar* grad_in) {
    std::fill_n(grad_in, planes * h * w, 0.0);
    const std::size_t nout = planes * (h / 2) * (w / 2);
    for (std::size_t o = 0; o < nout; ++o) grad_in[argmax[o]] += grad_out[o];
}

}  // namespace mkd::kernels::serial
