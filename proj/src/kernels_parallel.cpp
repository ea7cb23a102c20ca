#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mkd/kernels.hpp"

// Each output row is owned by exactly one thread and accumulated in a fixed
// order, so results do not depend on the thread count.

namespace mkd::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {

namespace {
using Index = std::int64_t;

inline void scale_row(Scalar* __restrict c, std::size_t n, Scalar beta) {
    if (beta == 0.0) {
        std::fill_n(c, n, 0.0);
    } else if (beta != 1.0) {
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) c[j] *= beta;
    }
}
}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        Scalar* __restrict crow = c + static_cast<std::size_t>(i) * n;
        scale_row(crow, n, beta);
        const Scalar* arow = a + static_cast<std::size_t>(i) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const Scalar aip = arow[p];
            if (aip == 0.0) continue;
            const Scalar* __restrict brow = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        const Scalar* __restrict arow = a + static_cast<std::size_t>(i) * k;
        Scalar* crow = c + static_cast<std::size_t>(i) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const Scalar* __restrict brow = b + j * k;
            Scalar acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = (beta == 0.0 ? 0.0 : beta * crow[j]) + acc;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Scalar* a, const Scalar* b, Scalar* c,
             Scalar beta) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        Scalar* __restrict crow = c + static_cast<std::size_t>(i) * n;
        scale_row(crow, n, beta);
        for (std::size_t p = 0; p < k; ++p) {
            const Scalar api = a[p * m + static_cast<std::size_t>(i)];
            if (api == 0.0) continue;
            const Scalar* __restrict brow = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void im2col(const ConvGeometry& g, std::size_t batch, const Scalar* images, Scalar* cols) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const std::size_t ncols = batch * oh * ow;
    const std::size_t kk = g.kernel * g.kernel;
    const auto rows = static_cast<Index>(g.patch_size());
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const std::size_t row = static_cast<std::size_t>(r);
        const std::size_t c = row / kk;
        const std::size_t ki = (row % kk) / g.kernel;
        const std::size_t kj = row % g.kernel;
        Scalar* dst = cols + row * ncols;
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const Scalar* plane = images + (bi * g.channels + c) * g.height * g.width;
            for (std::size_t y = 0; y < oh; ++y) {
                Scalar* out = dst + (bi * oh + y) * ow;
                const auto iy = static_cast<std::ptrdiff_t>(y + ki) - static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
                    std::fill_n(out, ow, 0.0);
                    continue;
                }
                const Scalar* src = plane + static_cast<std::size_t>(iy) * g.width;
                for (std::size_t x = 0; x < ow; ++x) {
                    const auto ix = static_cast<std::ptrdiff_t>(x + kj) - static_cast<std::ptrdiff_t>(g.pad);
                    out[x] = (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) ? src[ix] : 0.0;
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, std::size_t batch, const Scalar* cols, Scalar* images) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const std::size_t ncols = batch * oh * ow;
    const auto planes = static_cast<Index>(batch * g.channels);
#pragma omp parallel for schedule(static)
    for (Index pl = 0; pl < planes; ++pl) {
        const std::size_t bi = static_cast<std::size_t>(pl) / g.channels;
        const std::size_t c = static_cast<std::size_t>(pl) % g.channels;
        Scalar* plane = images + static_cast<std::size_t>(pl) * g.height * g.width;
        std::fill_n(plane, g.height * g.width, 0.0);
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const std::size_t row = (c * g.kernel + ki) * g.kernel + kj;
                const Scalar* src = cols + row * ncols + bi * oh * ow;
                for (std::size_t y = 0; y < oh; ++y) {
                    const auto iy = static_cast<std::ptrdiff_t>(y + ki) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    Scalar* dst = plane + static_cast<std::size_t>(iy) * g.width;
                    for (std::size_t x = 0; x < ow; ++x) {
                        const auto ix = static_cast<std::ptrdiff_t>(x + kj) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[y * ow + x];
                    }
                }
            }
    }
}

void maxpool2(std::size_t planes, std::size_t h, std::size_t w, const Scalar* in, Scalar* out,
              std::size_t* argmax) {
    const std::size_t oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(planes); ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * h * w;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                std::size_t best = base + 2 * y * w + 2 * x;
                const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                for (auto idx : cand)
                    if (in[idx] > in[best]) best = idx;
                const std::size_t o = (static_cast<std::size_t>(p) * oh + y) * ow + x;
                out[o] = in[best];
                argmax[o] = best;
            }
    }
}

void maxpool2_backward(std::size_t planes, std::size_t h, std::size_t w, const Scalar* grad_out,
                       const std::size_t* argmax, Scalar* grad_in) {
    const std::size_t per_plane = (h / 2) * (w / 2);
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(planes); ++p) {
        std::fill_n(grad_in + static_cast<std::size_t>(p) * h * w, h * w, 0.0);
        for (std::size_t o = static_cast<std::size_t>(p) * per_plane; o < (static_cast<std::size_t>(p) + 1) * per_plane;
             ++o)
            grad_in[argmax[o]] += grad_out[o];
    }
}

}  // namespace parallel
}  // namespace mkd::kernels
