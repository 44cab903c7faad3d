// Timing comparison between the serial reference kernels and the OpenMP ones,
// on shapes representative of training (attention over ~20-neighbor graphs,
// hidden width 64), plus a whole training epoch under each execution policy.
// Both paths compute bit-identical results (covered by the unit tests), so
// the numbers here are purely about speed.
//
//   cmake --build build --target bench_kernels && ./build/bench/bench_kernels

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "gae/gat.hpp"
#include "gae/graph.hpp"
#include "gae/kernels.hpp"
#include "gae/mat.hpp"
#include "gae/params.hpp"
#include "gae/rng.hpp"
#include "gae/tape.hpp"
#include "gae/training.hpp"

using namespace gae;

namespace {

Mat random_mat(RngStream& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (double& x : m.a) x = rng.uniform(-1.0, 1.0);
  return m;
}

// A message-passing-shaped index set: E random destinations over N nodes,
// sorted so offsets delimit each destination's incoming block.
struct EdgeFixture {
  int n = 2000;
  int e = 40000;
  int f = 64;
  std::vector<int> idx;      // destination of each edge, ascending
  std::vector<int> offsets;  // n + 1 segment bounds
  kern::GatherPlan plan;
  Mat node_rows;             // n x f
  Mat edge_rows;             // e x f
  std::vector<double> logits;
  std::vector<double> weights;  // softmaxed logits, for the backward kernel
  std::vector<double> grad;
};

const EdgeFixture& edge_fixture() {
  static const EdgeFixture fx = [] {
    EdgeFixture f;
    RngStream rng(99, "bench_edges");
    f.idx.resize(static_cast<size_t>(f.e));
    for (int& v : f.idx) v = rng.uniform_int(f.n);
    std::sort(f.idx.begin(), f.idx.end());
    f.offsets.assign(static_cast<size_t>(f.n) + 1, 0);
    for (int v : f.idx) ++f.offsets[static_cast<size_t>(v) + 1];
    for (int i = 0; i < f.n; ++i)
      f.offsets[static_cast<size_t>(i) + 1] += f.offsets[static_cast<size_t>(i)];
    f.plan = kern::make_gather_plan(f.idx, f.n);
    f.node_rows = random_mat(rng, f.n, f.f);
    f.edge_rows = random_mat(rng, f.e, f.f);
    f.logits.resize(static_cast<size_t>(f.e));
    f.grad.resize(static_cast<size_t>(f.e));
    for (double& x : f.logits) x = rng.uniform(-2.0, 2.0);
    for (double& x : f.grad) x = rng.uniform(-1.0, 1.0);
    f.weights.resize(static_cast<size_t>(f.e));
    kern::serial::segment_softmax(f.logits, f.offsets, f.weights);
    return f;
  }();
  return fx;
}

// ---------------------------------------------------------------------------
// GEMM family
// ---------------------------------------------------------------------------

using GemmFn = void (*)(const Mat&, const Mat&, Mat&, bool);

void bm_gemm(benchmark::State& state, GemmFn fn, bool transpose_a) {
  int rows = static_cast<int>(state.range(0));
  RngStream rng(7, "bench_gemm");
  // gemm_tn contracts over rows of A, so A is stored k x m there.
  Mat a = transpose_a ? random_mat(rng, 64, rows) : random_mat(rng, rows, 64);
  Mat b = random_mat(rng, 64, 64);
  Mat c(rows, 64);
  for (auto _ : state) {
    fn(a, b, c, false);
    benchmark::DoNotOptimize(c.a.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * rows * 64 * 64 * 2);
}

// gemm_nt needs b as 64x64 either way; same harness works because both
// operands are square in the contracted dimensions.
void bm_gemm_nt(benchmark::State& state, GemmFn fn) {
  int rows = static_cast<int>(state.range(0));
  RngStream rng(8, "bench_gemm_nt");
  Mat a = random_mat(rng, rows, 64);
  Mat b = random_mat(rng, 64, 64);  // used transposed: c = a * b^T
  Mat c(rows, 64);
  for (auto _ : state) {
    fn(a, b, c, false);
    benchmark::DoNotOptimize(c.a.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * rows * 64 * 64 * 2);
}

// ---------------------------------------------------------------------------
// Gather / scatter / segment softmax / column sums
// ---------------------------------------------------------------------------

using GatherFn = void (*)(const Mat&, std::span<const int>, Mat&);
using ScatterFn = void (*)(const Mat&, const kern::GatherPlan&, Mat&, bool);
using SoftmaxFn = void (*)(std::span<const double>, std::span<const int>,
                           std::span<double>);
using SoftmaxBwdFn = void (*)(std::span<const double>, std::span<const double>,
                              std::span<const int>, std::span<double>);
using ColSumsFn = void (*)(const Mat&, std::span<double>);

void bm_gather(benchmark::State& state, GatherFn fn) {
  const EdgeFixture& fx = edge_fixture();
  Mat out(fx.e, fx.f);
  for (auto _ : state) {
    fn(fx.node_rows, fx.idx, out);
    benchmark::DoNotOptimize(out.a.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * fx.e * fx.f);
}

void bm_scatter(benchmark::State& state, ScatterFn fn) {
  const EdgeFixture& fx = edge_fixture();
  Mat out(fx.n, fx.f);
  for (auto _ : state) {
    fn(fx.edge_rows, fx.plan, out, false);
    benchmark::DoNotOptimize(out.a.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * fx.e * fx.f);
}

void bm_segment_softmax(benchmark::State& state, SoftmaxFn fn) {
  const EdgeFixture& fx = edge_fixture();
  std::vector<double> out(fx.logits.size());
  for (auto _ : state) {
    fn(fx.logits, fx.offsets, out);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * fx.e);
}

void bm_segment_softmax_backward(benchmark::State& state, SoftmaxBwdFn fn) {
  const EdgeFixture& fx = edge_fixture();
  std::vector<double> out(fx.weights.size());
  for (auto _ : state) {
    fn(fx.weights, fx.grad, fx.offsets, out);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * fx.e);
}

void bm_col_sums(benchmark::State& state, ColSumsFn fn) {
  const EdgeFixture& fx = edge_fixture();
  std::vector<double> out(static_cast<size_t>(fx.f));
  for (auto _ : state) {
    fn(fx.edge_rows, out);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * fx.e * fx.f);
}

// ---------------------------------------------------------------------------
// Whole training epoch: forward, backward, optimizer step.
// ---------------------------------------------------------------------------

struct EpochFixture {
  Graph g;
  AttentionPlan plan;
  ModelConfig mc;
  ParamStore params;
  NodeMask mask;
};

const EpochFixture& epoch_fixture() {
  static const EpochFixture fx = [] {
    SbmConfig sc;
    sc.n_nodes = 1000;
    sc.n_blocks = 3;
    sc.p_in = 0.05;
    sc.p_out = 0.005;
    sc.feat_dim = 32;
    sc.signal = 0.5;
    sc.noise_sigma = 1.0;
    sc.seed = 42;
    EpochFixture f;
    f.g = sbm_generate(sc);
    f.plan = build_attention_plan(f.g);
    f.mc = ModelConfig{f.g.n_dims, 64, 4};
    RngStream init_rng(42, "init");
    f.params = init_model_params(f.mc, init_rng);
    RngStream mask_rng(42, "node_mask");
    f.mask = sample_node_mask(f.g.n_nodes, 0.5, mask_rng);
    return f;
  }();
  return fx;
}

void bm_train_epoch(benchmark::State& state, bool parallel_mode) {
  const EpochFixture& fx = epoch_fixture();
  ParamStore params = fx.params;  // fresh weights so both variants do equal work
  AdamState adam;
  bool saved = kern::parallel_enabled();
  kern::set_parallel(parallel_mode);
  for (auto _ : state) {
    Tape tape;
    Tensor loss = build_training_loss(tape, fx.g.features, fx.plan, params,
                                      fx.mc, fx.mask, Variant::kFull,
                                      /*stop_grad_target=*/false);
    GradMap grads = tape.backward(loss);
    adam_step(params, grads, adam, 1e-3, 0.0);
    benchmark::DoNotOptimize(loss.scalar());
  }
  kern::set_parallel(saved);
  state.counters["threads"] = parallel_mode ? kern::thread_count() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(bm_gemm, nn_serial, kern::serial::gemm_nn, false)
    ->Arg(256)->Arg(2048)->UseRealTime();
BENCHMARK_CAPTURE(bm_gemm, nn_parallel, kern::parallel::gemm_nn, false)
    ->Arg(256)->Arg(2048)->UseRealTime();
BENCHMARK_CAPTURE(bm_gemm_nt, serial, kern::serial::gemm_nt)
    ->Arg(2048)->UseRealTime();
BENCHMARK_CAPTURE(bm_gemm_nt, parallel, kern::parallel::gemm_nt)
    ->Arg(2048)->UseRealTime();
BENCHMARK_CAPTURE(bm_gemm, tn_serial, kern::serial::gemm_tn, true)
    ->Arg(2048)->UseRealTime();
BENCHMARK_CAPTURE(bm_gemm, tn_parallel, kern::parallel::gemm_tn, true)
    ->Arg(2048)->UseRealTime();

BENCHMARK_CAPTURE(bm_gather, serial, kern::serial::gather_rows)->UseRealTime();
BENCHMARK_CAPTURE(bm_gather, parallel, kern::parallel::gather_rows)
    ->UseRealTime();
BENCHMARK_CAPTURE(bm_scatter, serial, kern::serial::scatter_add_rows)
    ->UseRealTime();
BENCHMARK_CAPTURE(bm_scatter, parallel, kern::parallel::scatter_add_rows)
    ->UseRealTime();

BENCHMARK_CAPTURE(bm_segment_softmax, serial, kern::serial::segment_softmax)
    ->UseRealTime();
BENCHMARK_CAPTURE(bm_segment_softmax, parallel, kern::parallel::segment_softmax)
    ->UseRealTime();
BENCHMARK_CAPTURE(bm_segment_softmax_backward, serial,
                  kern::serial::segment_softmax_backward)
    ->UseRealTime();
BENCHMARK_CAPTURE(bm_segment_softmax_backward, parallel,
                  kern::parallel::segment_softmax_backward)
    ->UseRealTime();

BENCHMARK_CAPTURE(bm_col_sums, serial, kern::serial::col_sums)->UseRealTime();
BENCHMARK_CAPTURE(bm_col_sums, parallel, kern::parallel::col_sums)
    ->UseRealTime();

BENCHMARK_CAPTURE(bm_train_epoch, serial, false)
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(bm_train_epoch, parallel, true)
    ->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
