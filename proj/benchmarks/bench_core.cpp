#include "meshstyle/encoder.hpp"
#include "meshstyle/jacobian.hpp"
#include "meshstyle/renderer.hpp"
#include "meshstyle/sampling.hpp"
#include "meshstyle/symmetry.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace meshstyle;

namespace {

JacobianField jittered_identity(int faces) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.05);
  JacobianField J(faces, Mat3::Identity());
  for (auto& j : J)
    for (int k = 0; k < 9; ++k) j.data()[k] += n(rng);
  return J;
}

void BM_PoissonFactorize(benchmark::State& state) {
  const Mesh m = icosphere(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    PoissonFactorization fact(m);
    benchmark::DoNotOptimize(fact.num_vertices());
  }
  state.counters["vertices"] = m.num_vertices();
}
BENCHMARK(BM_PoissonFactorize)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_PoissonSolve(benchmark::State& state) {
  const Mesh m = icosphere(static_cast<int>(state.range(0)));
  const PoissonFactorization fact(m);
  const JacobianField J = jittered_identity(m.num_faces());
  for (auto _ : state) benchmark::DoNotOptimize(fact.solve(J));
  state.counters["vertices"] = m.num_vertices();
}
BENCHMARK(BM_PoissonSolve)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_PoissonAdjoint(benchmark::State& state) {
  const Mesh m = icosphere(static_cast<int>(state.range(0)));
  const PoissonFactorization fact(m);
  const VertexArray g = VertexArray::Ones(m.num_vertices(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fact.adjoint(g));
}
BENCHMARK(BM_PoissonAdjoint)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_RenderSoft(benchmark::State& state) {
  const Mesh m = icosphere(4);
  const int res = static_cast<int>(state.range(0));
  const Camera cam(30, 5, 20, 30, res);
  for (auto _ : state) benchmark::DoNotOptimize(render_soft(m.vertices(), m.faces(), cam));
}
BENCHMARK(BM_RenderSoft)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const Mesh m = icosphere(4);
  const int res = static_cast<int>(state.range(0));
  const Camera cam(30, 5, 20, 30, res);
  const RenderOutput r = render_soft(m.vertices(), m.faces(), cam);
  Image ga(1, res, res), gr(3, res, res);
  for (double& v : ga.data) v = 1e-3;
  for (double& v : gr.data) v = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(r, gr, ga));
}
BENCHMARK(BM_RenderBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_EncoderFitAdd(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image x(3, size, size);
  for (double& v : x.data) v = u(rng);
  const Image z = encode_approx(x, EncoderMap::passthrough(size, size));
  EncoderFitter fitter(size, size);
  for (auto _ : state) fitter.add(x, z);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncoderFitAdd)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_DetectSymmetry(benchmark::State& state) {
  const Mesh m = icosphere(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(detect_symmetry(m.vertices()));
}
BENCHMARK(BM_DetectSymmetry)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
