// Serial reference kernels against their OpenMP versions. Arg 0 is the image
// extent, arg 1 the channel count; the parallel runs use all OpenMP threads.

#include <random>

#include <benchmark/benchmark.h>

#include "msseg/kernels.hpp"

using namespace msseg;
namespace ks = kernels::serial;
namespace kp = kernels::parallel;

namespace {

Tensor random_tensor(Shape shape, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Tensor t(std::move(shape));
    for (auto& e : t.data()) e = d(rng);
    return t;
}

template <bool Parallel>
void conv(benchmark::State& st) {
    const std::size_t n = st.range(0), c = st.range(1);
    const Tensor x = random_tensor({c, n, n}, 1), w = random_tensor({c, c, 3, 3}, 2);
    for (auto _ : st) {
        Tensor y = Parallel ? kp::conv2d(x, w, nullptr, 1, Padding::SameZero)
                            : ks::conv2d(x, w, nullptr, 1, Padding::SameZero);
        benchmark::DoNotOptimize(y.data().data());
    }
    st.SetItemsProcessed(st.iterations() * c * c * n * n * 9);
}

template <bool Parallel>
void transpose_conv(benchmark::State& st) {
    const std::size_t n = st.range(0), c = st.range(1);
    const Tensor y = random_tensor({c, n / 2, n / 2}, 3), w = random_tensor({c, c, 3, 3}, 4);
    for (auto _ : st) {
        Tensor x = Parallel ? kp::transpose_conv2d(y, w, 2, Padding::SameZero, n, n)
                            : ks::transpose_conv2d(y, w, 2, Padding::SameZero, n, n);
        benchmark::DoNotOptimize(x.data().data());
    }
}

template <bool Parallel>
void weight_grad(benchmark::State& st) {
    const std::size_t n = st.range(0), c = st.range(1);
    const Tensor x = random_tensor({c, n, n}, 5), g = random_tensor({c, n, n}, 6);
    for (auto _ : st) {
        Tensor w = Parallel ? kp::conv2d_weight_grad(x, g, 3, 3, 1, Padding::SameZero)
                            : ks::conv2d_weight_grad(x, g, 3, 3, 1, Padding::SameZero);
        benchmark::DoNotOptimize(w.data().data());
    }
}

template <bool Parallel>
void gaussian(benchmark::State& st) {
    const std::size_t n = st.range(0), c = st.range(1);
    const Tensor x = random_tensor({c, n, n}, 7), k = random_tensor({13, 13}, 8);
    for (auto _ : st) {
        Tensor y = Parallel ? kp::depthwise_conv2d(x, k, Padding::SameReplicate)
                            : ks::depthwise_conv2d(x, k, Padding::SameReplicate);
        benchmark::DoNotOptimize(y.data().data());
    }
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({64, 16})->Args({128, 16})->Args({256, 8})->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(conv<false>)->Name("conv2d/serial")->Apply(shapes);
BENCHMARK(conv<true>)->Name("conv2d/openmp")->Apply(shapes);
BENCHMARK(transpose_conv<false>)->Name("transpose_conv2d/serial")->Apply(shapes);
BENCHMARK(transpose_conv<true>)->Name("transpose_conv2d/openmp")->Apply(shapes);
BENCHMARK(weight_grad<false>)->Name("conv2d_weight_grad/serial")->Apply(shapes);
BENCHMARK(weight_grad<true>)->Name("conv2d_weight_grad/openmp")->Apply(shapes);
BENCHMARK(gaussian<false>)->Name("depthwise_conv2d/serial")->Apply(shapes);
BENCHMARK(gaussian<true>)->Name("depthwise_conv2d/openmp")->Apply(shapes);

BENCHMARK_MAIN();
