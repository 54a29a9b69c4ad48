#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace budgetface {

// Operation counts follow the MAdd convention: one multiply-accumulate is
// two operations. All counts are 64-bit.
using Flops = std::int64_t;

struct TensorShape {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;

  std::int64_t elements() const noexcept { return channels * height * width; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerKind { kConv2d, kFc, kMaxPool, kAvgPoolGlobal, kUpsample, kBatchNorm, kActivation, kDropout, kAdd };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kActivation;
  std::string name;
  std::int64_t in_channels = 0;  // 0: inferred from the input shape
  std::int64_t out_channels = 0;
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  bool bias = false;
  std::int64_t out_height = 0;  // upsample target
  std::int64_t out_width = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct LayerFlops {
  Flops flops = 0;
  TensorShape output;
};

// conv2d: 2 K^2 Cin Cout Ho Wo (+ Cout Ho Wo with bias); fc: 2 Cin Cout
// (+ Cout); batchnorm: 2 C H W; activation: C H W; pools, upsample and add:
// one op per output element; dropout: 0. Throws kShapeMismatch.
LayerFlops layer_flops(const LayerSpec& layer, const TensorShape& input);

// Layer inside a block template. out_channels may be a multiple of the stage
// width and stride may refer to the stage stride.
struct TemplateLayer {
  enum class Branch { kMain, kShortcut };
  enum class When { kAll, kFirst, kRest };

  LayerSpec spec;
  std::int64_t out_channel_factor = 0;  // > 0: out = factor * stage channels
  bool stage_stride = false;            // stride = stage stride in the first block, else 1
  Branch branch = Branch::kMain;
  When when = When::kAll;

  friend bool operator==(const TemplateLayer&, const TemplateLayer&) = default;
};

// A repeated block: a main branch, an optional shortcut (identity when it has
// no layers) and an elementwise add when `residual` is set.
struct BlockTemplate {
  std::string name;
  bool residual = true;
  std::vector<TemplateLayer> layers;

  friend bool operator==(const BlockTemplate&, const BlockTemplate&) = default;
};

struct Stage {
  std::string name;
  std::string block;
  std::int64_t repeat = 1;
  std::int64_t channels = 1;
  std::int64_t stride = 1;
  bool depth_scalable = true;
  bool width_scalable = true;

  friend bool operator==(const Stage&, const Stage&) = default;
};

using ArchItem = std::variant<LayerSpec, Stage>;

struct ArchSpec {
  std::string name;
  TensorShape input{3, 112, 112};
  std::map<std::string, BlockTemplate> blocks;
  std::vector<ArchItem> items;

  std::vector<const Stage*> stages() const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Concrete layer of one block instance.
LayerSpec instantiate(const TemplateLayer& layer, std::int64_t stage_channels, std::int64_t stage_stride,
                      bool first_block);

struct SegmentFlops {
  std::string name;  // stage name, or stem/head/transition<k> for runs of plain layers
  Flops flops = 0;
  TensorShape output;
};

struct ArchFlopsReport {
  Flops total = 0;
  TensorShape output;
  std::vector<SegmentFlops> segments;
};

ArchFlopsReport arch_flops_report(const ArchSpec& arch);
Flops arch_flops(const ArchSpec& arch);

// Rescales repeat counts of depth-scalable stages to max(1, round(r d)) and
// widths of width-scalable stages to the nearest multiple of `rounding`
// (at least `rounding`). Zero repeats stay zero.
ArchSpec scale_arch(const ArchSpec& base, double depth_mult, double width_mult, std::int64_t rounding = 1);

// Replaces stage repeats and channels in order.
ArchSpec with_stages(const ArchSpec& base, std::span<const std::int64_t> repeats,
                     std::span<const std::int64_t> channels);

struct BudgetQuery {
  Flops budget = 30'000'000'000;
  std::vector<double> depth_multipliers{1.0};
  std::vector<double> width_multipliers{1.0};
  std::int64_t channel_rounding = 1;

  void validate() const;
};

struct Candidate {
  double depth_mult = 1.0;
  double width_mult = 1.0;
  ArchSpec arch;
  Flops flops = 0;
  std::vector<std::int64_t> repeats;
  std::vector<std::int64_t> channels;
};

// Every grid point whose flops fit the budget, sorted by flops descending,
// ties by (depth_mult, width_mult) ascending. Throws kEmptyResult.
std::vector<Candidate> expand_under_budget(const ArchSpec& base, const BudgetQuery& query);

}  // namespace budgetface
