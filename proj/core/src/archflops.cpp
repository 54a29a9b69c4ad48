#include "budgetface/archflops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "budgetface/error.hpp"

namespace budgetface {
namespace {

std::string shape_str(const TensorShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

std::string label(const LayerSpec& l) {
  return std::string(to_string(l.kind)) + (l.name.empty() ? "" : " '" + l.name + "'");
}

std::int64_t conv_out(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p, const LayerSpec& l) {
  const std::int64_t span = in + 2 * p - k;
  require(span >= 0, ErrorCode::kShapeMismatch, label(l) + ": kernel larger than padded input");
  return span / s + 1;
}

void check_spatial_params(const LayerSpec& l) {
  require(l.kernel > 0 && l.stride > 0 && l.padding >= 0, ErrorCode::kShapeMismatch,
          label(l) + ": kernel and stride must be positive, padding nonnegative");
}

struct BlockResult {
  Flops flops = 0;
  TensorShape output;
};

BlockResult run_layers(const std::vector<LayerSpec>& layers, TensorShape shape) {
  BlockResult r{0, shape};
  for (const auto& l : layers) {
    const auto lf = layer_flops(l, r.output);
    r.flops += lf.flops;
    r.output = lf.output;
  }
  return r;
}

BlockResult run_block(const BlockTemplate& block, const Stage& stage, bool first, const TensorShape& input) {
  std::vector<LayerSpec> main;
  std::vector<LayerSpec> shortcut;
  for (const auto& t : block.layers) {
    if (t.when == TemplateLayer::When::kFirst && !first) continue;
    if (t.when == TemplateLayer::When::kRest && first) continue;
    auto spec = instantiate(t, stage.channels, stage.stride, first);
    (t.branch == TemplateLayer::Branch::kMain ? main : shortcut).push_back(std::move(spec));
  }
  BlockResult r = run_layers(main, input);
  if (!block.residual) return r;
  const BlockResult sc = run_layers(shortcut, input);
  require(sc.output == r.output, ErrorCode::kShapeMismatch,
          "block '" + block.name + "' in stage '" + stage.name + "': main branch gives " + shape_str(r.output) +
              " but shortcut gives " + shape_str(sc.output));
  r.flops += sc.flops + r.output.elements();  // elementwise add
  return r;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kFc: return "fc";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPoolGlobal: return "avgpool_global";
    case LayerKind::kUpsample: return "upsample";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kAdd: return "add";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::kConv2d, LayerKind::kFc, LayerKind::kMaxPool, LayerKind::kAvgPoolGlobal,
                 LayerKind::kUpsample, LayerKind::kBatchNorm, LayerKind::kActivation, LayerKind::kDropout,
                 LayerKind::kAdd})
    if (to_string(k) == name) return k;
  fail(ErrorCode::kParseError, "unknown layer kind '" + std::string(name) + "'");
}

LayerFlops layer_flops(const LayerSpec& l, const TensorShape& in) {
  require(in.channels > 0 && in.height > 0 && in.width > 0, ErrorCode::kShapeMismatch,
          label(l) + ": input shape " + shape_str(in) + " is empty");
  switch (l.kind) {
    case LayerKind::kConv2d: {
      check_spatial_params(l);
      require(l.out_channels > 0, ErrorCode::kShapeMismatch, label(l) + ": out_channels must be positive");
      require(l.in_channels == 0 || l.in_channels == in.channels, ErrorCode::kShapeMismatch,
              label(l) + ": expects " + std::to_string(l.in_channels) + " input channels, got " +
                  std::to_string(in.channels));
      const TensorShape out{l.out_channels, conv_out(in.height, l.kernel, l.stride, l.padding, l),
                            conv_out(in.width, l.kernel, l.stride, l.padding, l)};
      Flops f = 2 * l.kernel * l.kernel * in.channels * out.elements();
      if (l.bias) f += out.elements();
      return {f, out};
    }
    case LayerKind::kFc: {
      require(l.out_channels > 0, ErrorCode::kShapeMismatch, label(l) + ": out_channels must be positive");
      const std::int64_t fan_in = in.elements();
      require(l.in_channels == 0 || l.in_channels == fan_in, ErrorCode::kShapeMismatch,
              label(l) + ": expects " + std::to_string(l.in_channels) + " inputs, got " + std::to_string(fan_in));
      Flops f = 2 * fan_in * l.out_channels;
      if (l.bias) f += l.out_channels;
      return {f, {l.out_channels, 1, 1}};
    }
    case LayerKind::kMaxPool: {
      check_spatial_params(l);
      const TensorShape out{in.channels, conv_out(in.height, l.kernel, l.stride, l.padding, l),
                            conv_out(in.width, l.kernel, l.stride, l.padding, l)};
      return {out.elements(), out};
    }
    case LayerKind::kAvgPoolGlobal:
      return {in.channels, {in.channels, 1, 1}};
    case LayerKind::kUpsample: {
      require(l.out_height > 0 && l.out_width > 0, ErrorCode::kShapeMismatch,
              label(l) + ": upsample needs a positive target size");
      const TensorShape out{in.channels, l.out_height, l.out_width};
      return {out.elements(), out};
    }
    case LayerKind::kBatchNorm:
      return {2 * in.elements(), in};
    case LayerKind::kActivation:
    case LayerKind::kAdd:
      return {in.elements(), in};
    case LayerKind::kDropout:
      return {0, in};
  }
  fail(ErrorCode::kShapeMismatch, "unhandled layer kind");
}

std::vector<const Stage*> ArchSpec::stages() const {
  std::vector<const Stage*> out;
  for (const auto& item : items)
    if (const auto* s = std::get_if<Stage>(&item)) out.push_back(s);
  return out;
}

LayerSpec instantiate(const TemplateLayer& t, std::int64_t stage_channels, std::int64_t stage_stride,
                      bool first_block) {
  LayerSpec spec = t.spec;
  if (t.out_channel_factor > 0) spec.out_channels = t.out_channel_factor * stage_channels;
  if (t.stage_stride) spec.stride = first_block ? stage_stride : 1;
  return spec;
}

ArchFlopsReport arch_flops_report(const ArchSpec& arch) {
  ArchFlopsReport report;
  TensorShape shape = arch.input;
  const auto total_stages = arch.stages().size();
  std::size_t stages_seen = 0;
  std::size_t transitions = 0;
  bool in_run = false;

  for (const auto& item : arch.items) {
    if (const auto* layer = std::get_if<LayerSpec>(&item)) {
      if (!in_run) {
        std::string name = stages_seen == 0 ? "stem"
                           : stages_seen == total_stages ? "head"
                                                         : "transition" + std::to_string(++transitions);
        report.segments.push_back({std::move(name), 0, shape});
        in_run = true;
      }
      const auto lf = layer_flops(*layer, shape);
      shape = lf.output;
      report.segments.back().flops += lf.flops;
      report.segments.back().output = shape;
      continue;
    }
    in_run = false;
    const auto& stage = std::get<Stage>(item);
    ++stages_seen;
    const auto it = arch.blocks.find(stage.block);
    require(it != arch.blocks.end(), ErrorCode::kInvalidSpec,
            "stage '" + stage.name + "' references unknown block '" + stage.block + "'");
    require(stage.repeat >= 0 && stage.channels > 0 && stage.stride > 0, ErrorCode::kInvalidSpec,
            "stage '" + stage.name + "' needs repeat >= 0, channels > 0, stride > 0");
    SegmentFlops seg{stage.name, 0, shape};
    for (std::int64_t b = 0; b < stage.repeat; ++b) {
      const auto r = run_block(it->second, stage, b == 0, shape);
      seg.flops += r.flops;
      shape = r.output;
    }
    seg.output = shape;
    report.segments.push_back(std::move(seg));
  }
  for (const auto& s : report.segments) report.total += s.flops;
  report.output = shape;
  return report;
}

Flops arch_flops(const ArchSpec& arch) { return arch_flops_report(arch).total; }

ArchSpec scale_arch(const ArchSpec& base, double depth_mult, double width_mult, std::int64_t rounding) {
  require(depth_mult > 0.0 && width_mult > 0.0 && std::isfinite(depth_mult) && std::isfinite(width_mult),
          ErrorCode::kInvalidSpec, "multipliers must be positive");
  require(rounding >= 1, ErrorCode::kInvalidSpec, "channel rounding must be >= 1");
  ArchSpec out = base;
  for (auto& item : out.items) {
    auto* stage = std::get_if<Stage>(&item);
    if (stage == nullptr) continue;
    if (stage->depth_scalable && stage->repeat > 0)
      stage->repeat = std::max<std::int64_t>(1, std::llround(static_cast<double>(stage->repeat) * depth_mult));
    if (stage->width_scalable) {
      const double scaled = static_cast<double>(stage->channels) * width_mult / static_cast<double>(rounding);
      stage->channels = std::max<std::int64_t>(1, std::llround(scaled)) * rounding;
    }
  }
  return out;
}

ArchSpec with_stages(const ArchSpec& base, std::span<const std::int64_t> repeats,
                     std::span<const std::int64_t> channels) {
  ArchSpec out = base;
  std::size_t k = 0;
  for (auto& item : out.items) {
    auto* stage = std::get_if<Stage>(&item);
    if (stage == nullptr) continue;
    require(k < repeats.size() && k < channels.size(), ErrorCode::kInvalidSpec, "too few stage overrides");
    stage->repeat = repeats[k];
    stage->channels = channels[k];
    ++k;
  }
  require(k == repeats.size() && k == channels.size(), ErrorCode::kInvalidSpec, "too many stage overrides");
  return out;
}

void BudgetQuery::validate() const {
  require(budget > 0, ErrorCode::kInvalidSpec, "budget must be positive");
  require(!depth_multipliers.empty() && !width_multipliers.empty(), ErrorCode::kInvalidSpec,
          "multiplier grids must be non-empty");
  for (double d : depth_multipliers)
    require(d > 0.0 && std::isfinite(d), ErrorCode::kInvalidSpec, "depth multipliers must be positive");
  for (double w : width_multipliers)
    require(w > 0.0 && std::isfinite(w), ErrorCode::kInvalidSpec, "width multipliers must be positive");
  require(channel_rounding >= 1, ErrorCode::kInvalidSpec, "channel rounding must be >= 1");
}

std::vector<Candidate> expand_under_budget(const ArchSpec& base, const BudgetQuery& query) {
  query.validate();
  arch_flops(base);  // surfaces shape errors in the base before scaling

  std::vector<Candidate> out;
  for (double d : query.depth_multipliers) {
    for (double w : query.width_multipliers) {
      Candidate c{d, w, scale_arch(base, d, w, query.channel_rounding), 0, {}, {}};
      c.flops = arch_flops(c.arch);
      if (c.flops > query.budget) continue;
      for (const auto* s : c.arch.stages()) {
        c.repeats.push_back(s->repeat);
        c.channels.push_back(s->channels);
      }
      out.push_back(std::move(c));
    }
  }
  require(!out.empty(), ErrorCode::kEmptyResult, "no candidate fits the budget");
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.flops != b.flops) return a.flops > b.flops;
    if (a.depth_mult != b.depth_mult) return a.depth_mult < b.depth_mult;
    return a.width_mult < b.width_mult;
  });
  return out;
}

}  // namespace budgetface
