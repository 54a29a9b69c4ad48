#include <benchmark/benchmark.h>

#include <vector>

#include "budgetface/arch_io.hpp"
#include "budgetface/archflops.hpp"
#include "budgetface/eval.hpp"
#include "budgetface/margin_loss.hpp"
#include "budgetface/numeric.hpp"
#include "budgetface/rng.hpp"

using namespace budgetface;

namespace {

Matrix random_unit_rows(std::size_t n, std::size_t d, SeededRng& rng) {
  Matrix raw(n, d);
  for (double& x : raw.data()) x = rng.normal();
  Matrix out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const Embedding e = normalize(raw.row(r));
    std::copy(e.values().begin(), e.values().end(), out.row(r).begin());
  }
  return out;
}

void BM_CosineMatrix(benchmark::State& state) {
  SeededRng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix feats = random_unit_rows(n, 128, rng);
  const Matrix anchors = random_unit_rows(1000, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_matrix(feats, anchors));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * 1000);
}
BENCHMARK(BM_CosineMatrix)->Arg(32)->Arg(128);

void loss_bench(benchmark::State& state, LossKind kind) {
  SeededRng rng(2);
  const std::size_t n = 128, c = static_cast<std::size_t>(state.range(0));
  Matrix cos(n, c);
  for (double& x : cos.data()) x = rng.uniform(-0.9, 0.9);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = static_cast<std::size_t>(rng.uniform_int(c));
  MarginConfig cfg;
  cfg.kind = kind;
  for (auto _ : state) {
    const LossOutput out = margin_loss_forward(cos, labels, cfg);
    benchmark::DoNotOptimize(loss_backward(out, labels));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * c));
}
void BM_ArcFaceForwardBackward(benchmark::State& s) { loss_bench(s, LossKind::kArcFace); }
void BM_ArcNegFaceForwardBackward(benchmark::State& s) { loss_bench(s, LossKind::kArcNegFace); }
BENCHMARK(BM_ArcFaceForwardBackward)->Arg(200)->Arg(2000);
BENCHMARK(BM_ArcNegFaceForwardBackward)->Arg(200)->Arg(2000);

void BM_TprAtFpr(benchmark::State& state) {
  SeededRng rng(3);
  ScoreSet s;
  const auto m = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < m / 100; ++i) s.genuine.push_back(rng.uniform(0.2, 1.0));
  for (std::size_t i = 0; i < m; ++i) s.impostor.push_back(rng.uniform(-0.5, 0.6));
  for (auto _ : state) benchmark::DoNotOptimize(tpr_at_fpr(s, 1e-3));
}
BENCHMARK(BM_TprAtFpr)->Arg(10'000)->Arg(1'000'000);

void BM_ArchFlops(benchmark::State& state) {
  const ArchSpec arch = load_arch(BUDGETFACE_ARCH_DIR "/r100.arch");
  for (auto _ : state) benchmark::DoNotOptimize(arch_flops(arch));
}
BENCHMARK(BM_ArchFlops);

void BM_ExpandUnderBudget(benchmark::State& state) {
  const ArchSpec arch = load_arch(BUDGETFACE_ARCH_DIR "/r100.arch");
  BudgetQuery q;
  q.depth_multipliers = {0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  q.width_multipliers = {0.75, 0.875, 1.0, 1.125, 1.25};
  q.channel_rounding = 8;
  for (auto _ : state) benchmark::DoNotOptimize(expand_under_budget(arch, q));
}
BENCHMARK(BM_ExpandUnderBudget);

}  // namespace
BENCHMARK_MAIN();
