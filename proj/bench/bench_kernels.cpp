// Serial reference kernels against their OpenMP counterparts, on the shapes
// the default CNN produces for a stream-plus-memory batch of 74 images.

#include <benchmark/benchmark.h>

#include <vector>

#include "mkd/kernels.hpp"
#include "mkd/rng.hpp"

namespace {

using namespace mkd;
using namespace mkd::kernels;

std::vector<Scalar> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Scalar> v(n);
    for (auto& x : v) x = uniform01(rng) - 0.5;
    return v;
}

// Second conv layer: 32 filters over 16 channels, 8x8 maps, 74 images.
constexpr std::size_t kM = 32, kK = 16 * 9, kN = 74 * 64;

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, const Scalar*, const Scalar*, Scalar*, Scalar)>
void BM_GemmNN(benchmark::State& state) {
    const auto a = random_vec(kM * kK, 1), b = random_vec(kK * kN, 2);
    std::vector<Scalar> c(kM * kN);
    for (auto _ : state) {
        Gemm(kM, kN, kK, a.data(), b.data(), c.data(), 0.0);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kM * kN * kK));
}

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, const Scalar*, const Scalar*, Scalar*, Scalar)>
void BM_GemmNT(benchmark::State& state) {
    // Weight gradient: dW[M x K] = dY[M x N] * cols[K x N]^T
    const auto a = random_vec(kM * kN, 1), b = random_vec(kK * kN, 2);
    std::vector<Scalar> c(kM * kK);
    for (auto _ : state) {
        Gemm(kM, kK, kN, a.data(), b.data(), c.data(), 0.0);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kM * kN * kK));
}

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, const Scalar*, const Scalar*, Scalar*, Scalar)>
void BM_GemmTN(benchmark::State& state) {
    // Input gradient: dcols[K x N] = W[M x K]^T * dY[M x N]
    const auto a = random_vec(kM * kK, 1), b = random_vec(kM * kN, 2);
    std::vector<Scalar> c(kK * kN);
    for (auto _ : state) {
        Gemm(kK, kN, kM, a.data(), b.data(), c.data(), 0.0);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kM * kN * kK));
}

template <void (*Im2col)(const ConvGeometry&, std::size_t, const Scalar*, Scalar*)>
void BM_Im2col(benchmark::State& state) {
    const ConvGeometry g{16, 8, 8, 3, 1};
    const std::size_t batch = 74;
    const auto img = random_vec(batch * 16 * 64, 3);
    std::vector<Scalar> cols(g.patch_size() * batch * 64);
    for (auto _ : state) {
        Im2col(g, batch, img.data(), cols.data());
        benchmark::DoNotOptimize(cols.data());
    }
}

template <void (*Pool)(std::size_t, std::size_t, std::size_t, const Scalar*, Scalar*, std::size_t*)>
void BM_Maxpool(benchmark::State& state) {
    const std::size_t planes = 74 * 16, h = 16, w = 16;
    const auto in = random_vec(planes * h * w, 4);
    std::vector<Scalar> out(planes * h * w / 4);
    std::vector<std::size_t> arg(out.size());
    for (auto _ : state) {
        Pool(planes, h, w, in.data(), out.data(), arg.data());
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_GemmNN<serial::gemm_nn>)->Name("gemm_nn/serial");
BENCHMARK(BM_GemmNN<parallel::gemm_nn>)->Name("gemm_nn/parallel");
BENCHMARK(BM_GemmNT<serial::gemm_nt>)->Name("gemm_nt/serial");
BENCHMARK(BM_GemmNT<parallel::gemm_nt>)->Name("gemm_nt/parallel");
BENCHMARK(BM_GemmTN<serial::gemm_tn>)->Name("gemm_tn/serial");
BENCHMARK(BM_GemmTN<parallel::gemm_tn>)->Name("gemm_tn/parallel");
BENCHMARK(BM_Im2col<serial::im2col>)->Name("im2col/serial");
BENCHMARK(BM_Im2col<parallel::im2col>)->Name("im2col/parallel");
BENCHMARK(BM_Maxpool<serial::maxpool2>)->Name("maxpool2/serial");
BENCHMARK(BM_Maxpool<parallel::maxpool2>)->Name("maxpool2/parallel");

BENCHMARK_MAIN();
