#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "budgetface/arch_io.hpp"
#include "budgetface/archflops.hpp"
#include "budgetface/checkpoint.hpp"
#include "budgetface/config.hpp"
#include "budgetface/embedding_csv.hpp"
#include "budgetface/error.hpp"
#include "budgetface/eval.hpp"
#include "budgetface/experiment.hpp"
#include "budgetface/frameset_csv.hpp"
#include "budgetface/synthetic.hpp"
#include "budgetface/trainer.hpp"

namespace fs = std::filesystem;
using namespace budgetface;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

ExperimentConfig load_effective_config(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) cfg.data.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  cfg.validate();
  return cfg;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  require(!ec, ErrorCode::kIoError, "cannot create directory '" + dir + "': " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  return out;
}

LabeledVectors to_vectors(const Matrix& m, std::vector<std::string> ids) { return {std::move(ids), m}; }

std::vector<FrameSet> videos_as_framesets(const std::vector<VideoSet>& videos) {
  std::vector<FrameSet> sets;
  for (const auto& v : videos) {
    FrameSet s;
    s.set_id = v.set_id;
    for (std::size_t r = 0; r < v.inputs.rows(); ++r) s.frames.push_back(embedding_from_row(v.inputs.row(r)));
    sets.push_back(std::move(s));
  }
  return sets;
}

Matrix frames_matrix(const FrameSet& s) { return stack(s.frames); }

std::string label_of(const std::string& id, const std::string& sep) {
  if (sep.empty()) return id;
  const auto pos = id.rfind(sep);
  return pos == std::string::npos ? id : id.substr(0, pos);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    require(!item.empty(), ErrorCode::kInvalidConfig, "empty entry in list '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size(), ErrorCode::kInvalidConfig, "not a number: '" + item + "'");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

std::string fmt_flops(Flops f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3fG", static_cast<double>(f) / 1e9);
  return buf;
}

std::string join(const std::vector<std::int64_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

int cmd_gen(const Globals& g) {
  const ExperimentConfig cfg = load_effective_config(g);
  const fs::path dir = ensure_dir(cfg.output_dir);
  const IdentityData data = gen_identities(cfg.data);
  write_vectors_csv((dir / "train_inputs.csv").string(), to_vectors(data.train.inputs, data.train.sample_names()));
  write_vectors_csv((dir / "test_inputs.csv").string(), to_vectors(data.test.inputs, data.test.sample_names()));
  write_framesets_csv((dir / "video_inputs.csv").string(), videos_as_framesets(gen_framesets(cfg.data)));
  std::cout << "wrote " << data.train.size() << " train, " << data.test.size() << " test samples to " << dir.string()
            << '\n';
  return 0;
}

int cmd_train(const Globals& g, const std::string& loss) {
  ExperimentConfig cfg = load_effective_config(g);
  if (!loss.empty()) cfg.losses = {parse_loss_kind(loss)};
  const IdentityData data = gen_identities(cfg.data);
  for (LossKind kind : cfg.losses) {
    const fs::path dir = ensure_dir((fs::path(cfg.output_dir) / std::string(to_string(kind))).string());
    const TrainResult r = train(cfg, kind, data);
    save_checkpoint((dir / "checkpoint.json").string(), r.checkpoint);
    auto metrics = open_out(dir / "metrics.csv");
    write_metrics_csv(metrics, r.log);
    std::cout << to_string(kind) << ": " << r.checkpoint.iteration << " iterations, final loss "
              << (r.log.empty() ? 0.0 : r.log.back().loss) << " -> " << dir.string() << '\n';
  }
  return 0;
}

int cmd_aggregate(const Globals& g, const std::string& framesets, const std::string& checkpoint,
                  const std::string& policy_name) {
  const AggregationPolicy policy = parse_policy(policy_name);
  std::vector<FrameSet> sets = read_framesets_csv(framesets);
  if (!checkpoint.empty()) {
    // Frames are model inputs: embed them and attach predicted qualities.
    const Checkpoint ck = load_checkpoint(checkpoint);
    const double keep = g.config_path.empty() ? TrainOptions{}.stochastic_depth_keep
                                              : load_config(g.config_path).train.stochastic_depth_keep;
    for (auto& s : sets) {
      const InferenceOutputs out = infer(ck.params, frames_matrix(s), keep);
      s.frames.clear();
      for (std::size_t r = 0; r < out.embeddings.rows(); ++r) s.frames.push_back(normalize(out.embeddings.row(r)));
      s.qualities = predict_quality(ck.params, out.hidden);
    }
  }
  LabeledVectors templates;
  Matrix m(sets.size(), sets.empty() ? 0 : sets.front().frames.front().dim());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const Embedding t = aggregate(sets[i], policy);
    require(t.dim() == m.cols(), ErrorCode::kDimensionMismatch, "sets differ in dimension");
    std::copy(t.values().begin(), t.values().end(), m.row(i).begin());
    templates.ids.push_back(sets[i].set_id);
  }
  templates.values = std::move(m);
  const fs::path dir = ensure_dir(g.out_dir.empty() ? "out" : g.out_dir);
  const fs::path path = dir / ("templates_" + std::string(to_string(policy)) + ".csv");
  write_vectors_csv(path.string(), templates);
  std::cout << "wrote " << sets.size() << " templates to " << path.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string embeddings;
  std::string checkpoint;
  std::string label_sep;
  std::vector<double> fpr{1e-2};
  std::string pairing = "all";
  std::size_t pairs = 100000;
  std::uint64_t pair_seed = 0;
  std::string roc;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  LabeledVectors v = read_vectors_csv(a.embeddings);
  Matrix unit(v.values.rows(), v.values.cols());
  if (!a.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const double keep = g.config_path.empty() ? TrainOptions{}.stochastic_depth_keep
                                              : load_config(g.config_path).train.stochastic_depth_keep;
    unit = embed(ck.params, v.values, keep);
  } else {
    for (std::size_t r = 0; r < unit.rows(); ++r) {
      const Embedding e = embedding_from_row(v.values.row(r));
      std::copy(e.values().begin(), e.values().end(), unit.row(r).begin());
    }
  }
  std::vector<std::string> labels;
  for (const auto& id : v.ids) labels.push_back(label_of(id, a.label_sep));

  require(a.pairing == "all" || a.pairing == "sampled", ErrorCode::kInvalidConfig,
          "--pairing must be all or sampled");
  const Pairing pairing = a.pairing == "all" ? Pairing::all() : Pairing::sampled(a.pairs, a.pair_seed);
  const ScoreSet scores = verification_pairs(unit, labels, pairing);
  std::cout << "genuine " << scores.genuine.size() << ", impostor " << scores.impostor.size() << '\n';
  std::cout << "fpr_target,threshold,tpr,achieved_fpr\n";
  for (double fpr : a.fpr) {
    if (scores.impostor.size() < min_impostors_for(fpr))
      std::cerr << "warning: " << scores.impostor.size() << " impostor pairs cannot resolve FPR " << fpr << " (need "
                << min_impostors_for(fpr) << ")\n";
    const TprAtFpr r = tpr_at_fpr(scores, fpr);
    std::printf("%.17g,%.17g,%.17g,%.17g\n", fpr, r.threshold, r.tpr, r.achieved_fpr);
  }
  if (!a.roc.empty()) {
    auto out = open_out(a.roc);
    out << "threshold,tpr,fpr\n";
    char buf[128];
    for (const auto& p : roc_curve(scores)) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.tpr, p.fpr);
      out << buf;
    }
  }
  return 0;
}

int cmd_flops(const std::string& arch_path) {
  const ArchSpec arch = load_arch(arch_path);
  const ArchFlopsReport r = arch_flops_report(arch);
  std::printf("%-14s %18s %10s  %s\n", "segment", "flops", "", "output");
  for (const auto& s : r.segments)
    std::printf("%-14s %18lld %10s  %lldx%lldx%lld\n", s.name.c_str(), static_cast<long long>(s.flops),
                fmt_flops(s.flops).c_str(), static_cast<long long>(s.output.channels),
                static_cast<long long>(s.output.height), static_cast<long long>(s.output.width));
  std::printf("%-14s %18lld %10s\n", "total", static_cast<long long>(r.total), fmt_flops(r.total).c_str());
  return 0;
}

int cmd_search(const std::string& arch_path, double budget, const std::string& depth_grid,
               const std::string& width_grid, std::int64_t rounding, std::size_t top) {
  const ArchSpec base = load_arch(arch_path);
  BudgetQuery q;
  require(budget > 0.0 && budget < 9.2e18, ErrorCode::kInvalidConfig, "--budget out of range");
  q.budget = static_cast<Flops>(budget);
  q.depth_multipliers = parse_list(depth_grid);
  q.width_multipliers = parse_list(width_grid);
  q.channel_rounding = rounding;
  const auto cands = expand_under_budget(base, q);
  std::printf("%-8s %-8s %-22s %-26s %10s\n", "depth", "width", "repeats", "channels", "flops");
  for (std::size_t i = 0; i < cands.size() && (top == 0 || i < top); ++i) {
    const auto& c = cands[i];
    std::printf("%-8g %-8g %-22s %-26s %10s\n", c.depth_mult, c.width_mult, join(c.repeats).c_str(),
                join(c.channels).c_str(), fmt_flops(c.flops).c_str());
  }
  std::printf("%zu of %zu grid points fit %s\n", cands.size(),
              q.depth_multipliers.size() * q.width_multipliers.size(), fmt_flops(q.budget).c_str());
  return 0;
}

int cmd_report(const Globals& g) {
  const ExperimentConfig cfg = load_effective_config(g);
  const fs::path dir = ensure_dir(cfg.output_dir);
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  {
    auto out = open_out(dir / "report.csv");
    write_report_csv(out, r.rows);
  }
  for (const auto& run : r.runs) {
    auto out = open_out(dir / ("metrics_" + run.checkpoint.loss + ".csv"));
    write_metrics_csv(out, run.log);
  }
  write_report_csv(std::cout, r.rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale face recognition training and evaluation harness"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "Experiment config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Root seed (overrides [data] seed)");
  app.add_option("--out", g.out_dir, "Output directory (overrides [output] dir)");

  auto* gen = app.add_subcommand("gen", "Write synthetic train/test inputs and video frame sets");

  std::string loss;
  auto* tr = app.add_subcommand("train", "Train and save checkpoint and metrics log per loss");
  tr->add_option("--loss", loss, "arcface or arcnegface (default: every configured loss)");

  std::string framesets, agg_ckpt, policy = "qan_pp";
  auto* agg = app.add_subcommand("aggregate", "Aggregate frame sets into one template each");
  agg->add_option("framesets", framesets, "Frame-set CSV")->required()->check(CLI::ExistingFile);
  agg->add_option("--checkpoint", agg_ckpt, "Embed frames as model inputs with this checkpoint");
  agg->add_option("--policy", policy, "avg, weighted_sum, top1 or qan_pp");

  EvalArgs ea;
  std::string fpr_list;
  auto* ev = app.add_subcommand("eval", "TPR at fixed FPR over verification pairs");
  ev->add_option("embeddings", ea.embeddings, "Vectors CSV (id column is the identity)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ea.checkpoint, "Embed rows as model inputs with this checkpoint");
  ev->add_option("--label-sep", ea.label_sep, "Identity is the id up to the last occurrence of this separator");
  ev->add_option("--fpr", fpr_list, "Comma-separated FPR targets");
  ev->add_option("--pairing", ea.pairing, "all or sampled");
  ev->add_option("--pairs", ea.pairs, "Pairs per list in sampled mode");
  ev->add_option("--pair-seed", ea.pair_seed, "Seed for sampled pairing");
  ev->add_option("--roc", ea.roc, "Write the ROC curve CSV here");

  std::string arch_path;
  auto* fl = app.add_subcommand("flops", "Operation count per segment of an architecture file");
  fl->add_option("arch", arch_path, "Architecture file")->required()->check(CLI::ExistingFile);

  double budget = 30e9;
  std::string depth_grid = "1", width_grid = "1";
  std::int64_t rounding = 1;
  std::size_t top = 0;
  auto* se = app.add_subcommand("search", "Depth/width grid points that fit a flops budget");
  se->add_option("arch", arch_path, "Base architecture file")->required()->check(CLI::ExistingFile);
  se->add_option("--budget", budget, "Flops budget");
  se->add_option("--depth-grid", depth_grid, "Comma-separated depth multipliers");
  se->add_option("--width-grid", width_grid, "Comma-separated width multipliers");
  se->add_option("--rounding", rounding, "Round stage widths to multiples of this");
  se->add_option("--top", top, "Print only the N largest candidates (0: all)");

  auto* rep = app.add_subcommand("report", "Train every loss and write the TPR report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen(g);
    if (*tr) return cmd_train(g, loss);
    if (*agg) return cmd_aggregate(g, framesets, agg_ckpt, policy);
    if (*ev) {
      if (!fpr_list.empty()) ea.fpr = parse_list(fpr_list);
      if (g.seed && ea.pair_seed == 0) ea.pair_seed = *g.seed;
      return cmd_eval(g, ea);
    }
    if (*fl) return cmd_flops(arch_path);
    if (*se) return cmd_search(arch_path, budget, depth_grid, width_grid, rounding, top);
    if (*rep) return cmd_report(g);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::kDivergedLoss ? kExitDivergence : kExitValidation;
  }
  return 0;
}
