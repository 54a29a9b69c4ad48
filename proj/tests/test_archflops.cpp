#include <gtest/gtest.h>

#include <sstream>

#include "budgetface/arch_io.hpp"
#include "budgetface/archflops.hpp"
#include "budgetface/error.hpp"

using namespace budgetface;

namespace {

std::string arch_path(const char* name) { return std::string(BUDGETFACE_ARCH_DIR) + "/" + name; }

LayerSpec layer(LayerKind kind, std::int64_t out = 0, std::int64_t k = 1, std::int64_t s = 1, std::int64_t p = 0,
                bool bias = false) {
  LayerSpec l;
  l.kind = kind;
  l.out_channels = out;
  l.kernel = k;
  l.stride = s;
  l.padding = p;
  l.bias = bias;
  return l;
}

TEST(LayerFlops, HandCounts) {
  const auto conv = layer_flops(layer(LayerKind::kConv2d, 1, 3, 1, 0), {1, 6, 6});
  EXPECT_EQ(conv.flops, 288);
  EXPECT_EQ(conv.output, (TensorShape{1, 4, 4}));
  EXPECT_EQ(layer_flops(layer(LayerKind::kFc, 256), {512, 1, 1}).flops, 262144);
  EXPECT_EQ(layer_flops(layer(LayerKind::kFc, 256, 1, 1, 0, true), {512, 1, 1}).flops, 262144 + 256);
  EXPECT_EQ(layer_flops(layer(LayerKind::kActivation), {8, 4, 4}).flops, 128);
  EXPECT_EQ(layer_flops(layer(LayerKind::kBatchNorm), {8, 4, 4}).flops, 256);
  EXPECT_EQ(layer_flops(layer(LayerKind::kDropout), {8, 4, 4}).flops, 0);
  const auto pool = layer_flops(layer(LayerKind::kMaxPool, 0, 2, 2), {8, 4, 4});
  EXPECT_EQ(pool.output, (TensorShape{8, 2, 2}));
  EXPECT_EQ(layer_flops(layer(LayerKind::kAvgPoolGlobal), {8, 4, 4}).output, (TensorShape{8, 1, 1}));
}

TEST(LayerFlops, StridedPaddedConv) {
  // 112 -> 56 with k3 s2 p1: 2 * 9 * 64 * 64 * 56 * 56.
  const auto r = layer_flops(layer(LayerKind::kConv2d, 64, 3, 2, 1), {64, 112, 112});
  EXPECT_EQ(r.output, (TensorShape{64, 56, 56}));
  EXPECT_EQ(r.flops, 2LL * 9 * 64 * 64 * 56 * 56);
}

TEST(LayerFlops, Errors) {
  EXPECT_THROW(layer_flops(layer(LayerKind::kConv2d, 4, 7, 1, 0), {1, 4, 4}), Error);
  EXPECT_THROW(layer_flops(layer(LayerKind::kConv2d, 0, 3, 1, 1), {1, 4, 4}), Error);
  LayerSpec l = layer(LayerKind::kConv2d, 4, 3, 1, 1);
  l.in_channels = 5;
  EXPECT_THROW(layer_flops(l, {1, 4, 4}), Error);
}

TEST(ArchFlops, EmptyAndAdditive) {
  ArchSpec a;
  a.input = {3, 8, 8};
  EXPECT_EQ(arch_flops(a), 0);
  const LayerSpec c1 = layer(LayerKind::kConv2d, 4, 3, 1, 1), c2 = layer(LayerKind::kConv2d, 2, 3, 2, 1);
  a.items = {c1, c2};
  const auto f1 = layer_flops(c1, a.input);
  EXPECT_EQ(arch_flops(a), f1.flops + layer_flops(c2, f1.output).flops);
}

// IResNet block count written out by hand.
Flops ir_stage(std::int64_t cin, std::int64_t c, std::int64_t h, std::int64_t repeat) {
  Flops total = 0;
  for (std::int64_t b = 0; b < repeat; ++b) {
    const std::int64_t in = b == 0 ? cin : c, hi = b == 0 ? h : h / 2, ho = h / 2;
    total += 2 * in * hi * hi;            // bn1
    total += 2 * 9 * in * c * hi * hi;    // conv1
    total += 2 * c * hi * hi + c * hi * hi;  // bn2, prelu
    total += 2 * 9 * c * c * ho * ho;     // conv2
    total += 2 * c * ho * ho;             // bn3
    if (b == 0) total += 2 * in * c * ho * ho + 2 * c * ho * ho;  // downsample
    total += c * ho * ho;                 // add
  }
  return total;
}

TEST(ArchFlops, BundledR100) {
  const ArchSpec a = load_arch(arch_path("r100.arch"));
  Flops want = 2LL * 9 * 3 * 64 * 112 * 112 + 3LL * 64 * 112 * 112;
  want += ir_stage(64, 64, 112, 3) + ir_stage(64, 128, 56, 13) + ir_stage(128, 256, 28, 30) +
          ir_stage(256, 512, 14, 3);
  want += 2LL * 512 * 49 + 2LL * 512 * 49 * 512 + 512 + 2LL * 512;
  const auto report = arch_flops_report(a);
  EXPECT_EQ(report.total, want);
  EXPECT_EQ(report.output, (TensorShape{512, 1, 1}));
  EXPECT_NEAR(static_cast<double>(report.total), 24.22e9, 0.1 * 24.22e9);
  Flops sum = 0;
  for (const auto& s : report.segments) sum += s.flops;
  EXPECT_EQ(sum, report.total);
}

TEST(ArchFlops, EnrichedStemKeepsResolution) {
  const ArchSpec a = load_arch(arch_path("r100_enriched_stem.arch"));
  const auto report = arch_flops_report(a);
  EXPECT_EQ(report.segments.front().output, (TensorShape{64, 112, 112}));
  EXPECT_GT(report.total, arch_flops(load_arch(arch_path("r100.arch"))));
}

TEST(ScaleArch, WidthRowFromTable) {
  const ArchSpec base = load_arch(arch_path("r100.arch"));
  const ArchSpec wide = scale_arch(base, 1.0, 72.0 / 64.0);
  std::vector<std::int64_t> channels;
  for (const Stage* s : wide.stages()) channels.push_back(s->channels);
  EXPECT_EQ(channels, (std::vector<std::int64_t>{72, 144, 288, 576}));
}

TEST(ScaleArch, DepthRespectsFrozenStages) {
  const ArchSpec base = load_arch(arch_path("r100.arch"));
  const ArchSpec deep = scale_arch(base, 1.2, 1.0);
  std::vector<std::int64_t> repeats;
  for (const Stage* s : deep.stages()) repeats.push_back(s->repeat);
  EXPECT_EQ(repeats, (std::vector<std::int64_t>{3, 16, 36, 3}));
  const ArchSpec rounded = scale_arch(base, 1.0, 1.1, 16);
  for (const Stage* s : rounded.stages()) EXPECT_EQ(s->channels % 16, 0);
}

TEST(ExpandUnderBudget, ExhaustiveCheck) {
  const ArchSpec base = load_arch(arch_path("r100.arch"));
  BudgetQuery q;
  q.depth_multipliers = {0.8, 1.0, 1.1, 1.2, 1.3};
  q.width_multipliers = {0.875, 1.0, 1.125, 1.25};
  q.channel_rounding = 8;
  const auto cands = expand_under_budget(base, q);
  std::size_t fitting = 0;
  for (double d : q.depth_multipliers)
    for (double w : q.width_multipliers) fitting += arch_flops(scale_arch(base, d, w, 8)) <= q.budget;
  EXPECT_EQ(cands.size(), fitting);
  bool has_base = false;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    EXPECT_LE(cands[i].flops, q.budget);
    EXPECT_EQ(cands[i].flops, arch_flops(cands[i].arch));
    if (i > 0) EXPECT_GE(cands[i - 1].flops, cands[i].flops);
    has_base |= cands[i].depth_mult == 1.0 && cands[i].width_mult == 1.0;
  }
  EXPECT_TRUE(has_base);
  q.budget = 1000;
  EXPECT_THROW(expand_under_budget(base, q), Error);
}

TEST(ArchIo, RoundTrip) {
  const ArchSpec a = load_arch(arch_path("r100.arch"));
  std::stringstream ss;
  write_arch(ss, a);
  const ArchSpec b = parse_arch(ss);
  EXPECT_EQ(arch_flops(b), arch_flops(a));
  EXPECT_EQ(b.stages().size(), 4u);
}

TEST(ArchIo, ParseErrors) {
  EXPECT_THROW(parse_arch_string("conv2d out=4 kernel=x\n"), Error);
  EXPECT_THROW(parse_arch_string("stage name=s repeat=2\n"), Error);
  EXPECT_THROW(parse_arch_string("conv2d out=$c\n"), Error);
  EXPECT_THROW(parse_arch_string("frobnicate\n"), Error);
}

}  // namespace
