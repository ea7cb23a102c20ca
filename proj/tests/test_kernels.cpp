#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mkd/kernels.hpp"
#include "mkd/rng.hpp"

using namespace mkd;
namespace k = mkd::kernels;

namespace {

std::vector<Scalar> random_vec(std::size_t n, Rng& rng) {
    std::vector<Scalar> v(n);
    for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
    return v;
}

void check_close(const std::vector<Scalar>& a, const std::vector<Scalar>& b, double tol = 1e-12) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <= tol * std::max({1.0, std::abs(a[i]), std::abs(b[i])}));
}

}  // namespace

TEST_SUITE("kernels") {
    TEST_CASE("gemm variants: parallel agrees with serial, serial agrees with a naive triple loop") {
        Rng rng = make_rng(1, RngStream::init);
        for (auto [m, n, kk] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 70, 40}}) {
            const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng), c0 = random_vec(m * n, rng);
            std::vector<Scalar> ref(m * n);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.5 * c0[i * n + j];
                    for (std::size_t p = 0; p < kk; ++p) s += a[i * kk + p] * b[p * n + j];
                    ref[i * n + j] = s;
                }
            auto cs = c0, cp = c0;
            k::serial::gemm_nn(m, n, kk, a.data(), b.data(), cs.data(), 0.5);
            k::parallel::gemm_nn(m, n, kk, a.data(), b.data(), cp.data(), 0.5);
            check_close(cs, ref);
            check_close(cp, ref);

            // B stored as [N x K]
            std::vector<Scalar> bt(n * kk);
            for (std::size_t p = 0; p < kk; ++p)
                for (std::size_t j = 0; j < n; ++j) bt[j * kk + p] = b[p * n + j];
            cs = c0, cp = c0;
            k::serial::gemm_nt(m, n, kk, a.data(), bt.data(), cs.data(), 0.5);
            k::parallel::gemm_nt(m, n, kk, a.data(), bt.data(), cp.data(), 0.5);
            check_close(cs, ref);
            check_close(cp, ref);

            // A stored as [K x M]
            std::vector<Scalar> at(kk * m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
            cs = c0, cp = c0;
            k::serial::gemm_tn(m, n, kk, at.data(), b.data(), cs.data(), 0.5);
            k::parallel::gemm_tn(m, n, kk, at.data(), b.data(), cp.data(), 0.5);
            check_close(cs, ref);
            check_close(cp, ref);
        }
    }

    TEST_CASE("im2col and col2im are adjoint, and both implementations agree") {
        Rng rng = make_rng(2, RngStream::init);
        k::ConvGeometry g;
        g.channels = 3, g.height = 5, g.width = 6, g.kernel = 3, g.pad = 1;
        const std::size_t batch = 2;
        const std::size_t cols_n = g.patch_size() * batch * g.out_height() * g.out_width();
        const auto x = random_vec(batch * g.channels * g.height * g.width, rng);
        const auto y = random_vec(cols_n, rng);
        std::vector<Scalar> cs(cols_n), cp(cols_n), xs(x.size()), xp(x.size());
        k::serial::im2col(g, batch, x.data(), cs.data());
        k::parallel::im2col(g, batch, x.data(), cp.data());
        check_close(cs, cp, 0.0);
        k::serial::col2im(g, batch, y.data(), xs.data());
        k::parallel::col2im(g, batch, y.data(), xp.data());
        check_close(xs, xp);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cols_n; ++i) lhs += cs[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * xs[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }

    TEST_CASE("maxpool2 forward and backward agree between implementations") {
        Rng rng = make_rng(3, RngStream::init);
        const std::size_t planes = 4, h = 6, w = 8;
        const auto x = random_vec(planes * h * w, rng);
        const std::size_t out_n = planes * (h / 2) * (w / 2);
        std::vector<Scalar> os(out_n), op(out_n);
        std::vector<std::size_t> as(out_n), ap(out_n);
        k::serial::maxpool2(planes, h, w, x.data(), os.data(), as.data());
        k::parallel::maxpool2(planes, h, w, x.data(), op.data(), ap.data());
        check_close(os, op, 0.0);
        CHECK(as == ap);
        for (std::size_t i = 0; i < out_n; ++i) CHECK(x[as[i]] == os[i]);

        const auto g = random_vec(out_n, rng);
        std::vector<Scalar> gs(x.size()), gp(x.size());
        k::serial::maxpool2_backward(planes, h, w, g.data(), as.data(), gs.data());
        k::parallel::maxpool2_backward(planes, h, w, g.data(), ap.data(), gp.data());
        check_close(gs, gp, 0.0);
        double sum_in = 0.0, sum_out = 0.0;
        for (auto v : gs) sum_in += v;
        for (auto v : g) sum_out += v;
        CHECK(sum_in == doctest::Approx(sum_out));
    }

    TEST_CASE("thread count is positive") { CHECK(k::max_threads() >= 1); }
}
