// OpenMP kernels against their serial references on 640x480 frames.

#include <benchmark/benchmark.h>

#include <vector>

#include "clarifier/kernels.hpp"
#include "clarifier/scenegen.hpp"

using namespace clarifier;

namespace {

const scenegen::SceneBundle& scene() {
    static const scenegen::SceneBundle b = [] {
        std::uint64_t seed = 0;
        for (;; ++seed) {
            auto spec = scenegen::random_spec(seed);
            if (spec.gesture) return scenegen::generate(spec);
        }
    }();
    return b;
}

const GrayImage& gray() {
    static const GrayImage g = kernels::serial::luma(scene().image);
    return g;
}

template <auto Fn>
void run_luma(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(Fn(scene().image));
}

template <auto Fn>
void run_laplacian(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(Fn(gray()));
}

template <auto Fn>
void run_blur(benchmark::State& st) {
    const double sigma = static_cast<double>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(Fn(gray(), sigma));
}

template <auto Fn>
void run_moments(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(Fn(scene().mask));
}

template <auto Fn>
void run_dilate(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(Fn(scene().mask, 3));
}

template <auto Fn>
void run_residuals(benchmark::State& st) {
    const auto& b = scene();
    const RayGrid grid{0.0, 0.001, 20000};
    std::vector<double> out(grid.count);
    for (auto _ : st) {
        Fn(b.gt.ray, b.depth, b.k, grid, &b.mask, out);
        benchmark::DoNotOptimize(out.data());
    }
}

using BlurFn = GrayImage (*)(const GrayImage&, double);

}  // namespace

BENCHMARK(run_luma<kernels::luma>)->Name("luma/omp");
BENCHMARK(run_luma<kernels::serial::luma>)->Name("luma/serial");
BENCHMARK(run_laplacian<kernels::laplacian_variance>)->Name("laplacian_variance/omp");
BENCHMARK(run_laplacian<kernels::serial::laplacian_variance>)->Name("laplacian_variance/serial");
BENCHMARK(run_blur<static_cast<BlurFn>(kernels::gaussian_blur)>)->Name("gaussian_blur/omp")->Arg(2)->Arg(6);
BENCHMARK(run_blur<static_cast<BlurFn>(kernels::serial::gaussian_blur)>)->Name("gaussian_blur/serial")->Arg(2)->Arg(6);
BENCHMARK(run_moments<kernels::mask_moments>)->Name("mask_moments/omp");
BENCHMARK(run_moments<kernels::serial::mask_moments>)->Name("mask_moments/serial");
BENCHMARK(run_dilate<kernels::dilate>)->Name("dilate/omp");
BENCHMARK(run_dilate<kernels::serial::dilate>)->Name("dilate/serial");
BENCHMARK(run_residuals<kernels::residual_profile>)->Name("residual_profile/omp");
BENCHMARK(run_residuals<kernels::serial::residual_profile>)->Name("residual_profile/serial");

BENCHMARK_MAIN();
