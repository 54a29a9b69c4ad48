#include "budgetface/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "budgetface/error.hpp"
#include "budgetface/rng.hpp"
#include "csv_util.hpp"

namespace budgetface {
namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : detail::split_csv(s)) {
    const auto t = detail::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::kInvalidConfig, key + ": expected a boolean, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return detail::parse_double(v, key);
  } catch (const Error&) {
    fail(ErrorCode::kInvalidConfig, key + ": expected a number, got '" + v + "'");
  }
}

std::int64_t parse_integer(const std::string& key, const std::string& v) {
  try {
    return detail::parse_int(v, key);
  } catch (const Error&) {
    fail(ErrorCode::kInvalidConfig, key + ": expected an integer, got '" + v + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const auto x = parse_integer(key, v);
  require(x >= 0, ErrorCode::kInvalidConfig, key + " must be nonnegative");
  return static_cast<std::size_t>(x);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.num_identities", [](auto& c, auto& k, auto& v) { c.data.num_identities = parse_count(k, v); }},
      {"data.test_identities", [](auto& c, auto& k, auto& v) { c.data.test_identities = parse_count(k, v); }},
      {"data.samples_per_id", [](auto& c, auto& k, auto& v) { c.data.samples_per_id = parse_count(k, v); }},
      {"data.input_dim", [](auto& c, auto& k, auto& v) { c.data.input_dim = parse_count(k, v); }},
      {"data.embed_dim", [](auto& c, auto& k, auto& v) { c.data.embed_dim = parse_count(k, v); }},
      {"data.hidden_dim", [](auto& c, auto& k, auto& v) { c.data.hidden_dim = parse_count(k, v); }},
      {"data.noise_sigma", [](auto& c, auto& k, auto& v) { c.data.noise_sigma = parse_real(k, v); }},
      {"data.corrupt_fraction", [](auto& c, auto& k, auto& v) { c.data.corrupt_fraction = parse_real(k, v); }},
      {"data.train_corrupt_fraction",
       [](auto& c, auto& k, auto& v) { c.data.train_corrupt_fraction = parse_real(k, v); }},
      {"data.sets_per_id", [](auto& c, auto& k, auto& v) { c.data.sets_per_id = parse_count(k, v); }},
      {"data.max_frames", [](auto& c, auto& k, auto& v) { c.data.max_frames = parse_count(k, v); }},
      {"data.seed", [](auto& c, auto& k, auto& v) { c.data.seed = static_cast<std::uint64_t>(parse_integer(k, v)); }},
      {"loss.loss",
       [](auto& c, auto&, auto& v) {
         c.losses.clear();
         for (const auto& name : split_list(v)) c.losses.push_back(parse_loss_kind(name));
       }},
      {"loss.scale", [](auto& c, auto& k, auto& v) { c.margin.scale = parse_real(k, v); }},
      {"loss.margin", [](auto& c, auto& k, auto& v) { c.margin.margin = parse_real(k, v); }},
      {"loss.neg_alpha", [](auto& c, auto& k, auto& v) { c.margin.neg_alpha = parse_real(k, v); }},
      {"loss.neg_mu", [](auto& c, auto& k, auto& v) { c.margin.neg_mu = parse_real(k, v); }},
      {"loss.neg_sigma", [](auto& c, auto& k, auto& v) { c.margin.neg_sigma = parse_real(k, v); }},
      {"loss.label_smooth", [](auto& c, auto& k, auto& v) { c.label_smooth = parse_bool(k, v); }},
      {"loss.label_smooth_eps", [](auto& c, auto& k, auto& v) { c.label_smooth_eps = parse_real(k, v); }},
      {"schedule.base_lr", [](auto& c, auto& k, auto& v) { c.schedule.base_lr = parse_real(k, v); }},
      {"schedule.peak_lr", [](auto& c, auto& k, auto& v) { c.schedule.peak_lr = parse_real(k, v); }},
      {"schedule.warmup_iters", [](auto& c, auto& k, auto& v) { c.schedule.warmup_iters = parse_integer(k, v); }},
      {"schedule.total_iters", [](auto& c, auto& k, auto& v) { c.schedule.total_iters = parse_integer(k, v); }},
      {"schedule.lr_floor", [](auto& c, auto& k, auto& v) { c.schedule.lr_floor = parse_real(k, v); }},
      {"schedule.batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = parse_count(k, v); }},
      {"schedule.momentum", [](auto& c, auto& k, auto& v) { c.train.momentum = parse_real(k, v); }},
      {"schedule.weight_decay", [](auto& c, auto& k, auto& v) { c.train.weight_decay = parse_real(k, v); }},
      {"schedule.dropout", [](auto& c, auto& k, auto& v) { c.train.dropout = parse_real(k, v); }},
      {"schedule.stochastic_depth_keep",
       [](auto& c, auto& k, auto& v) { c.train.stochastic_depth_keep = parse_real(k, v); }},
      {"schedule.adabn", [](auto& c, auto& k, auto& v) { c.train.adabn = parse_bool(k, v); }},
      {"schedule.anchor_finetune", [](auto& c, auto& k, auto& v) { c.train.anchor_finetune = parse_bool(k, v); }},
      {"schedule.finetune_iters", [](auto& c, auto& k, auto& v) { c.train.finetune_iters = parse_integer(k, v); }},
      {"schedule.finetune_lr", [](auto& c, auto& k, auto& v) { c.train.finetune_lr = parse_real(k, v); }},
      {"schedule.freeze_anchors", [](auto& c, auto& k, auto& v) { c.train.freeze_anchors = parse_bool(k, v); }},
      {"schedule.log_interval", [](auto& c, auto& k, auto& v) { c.train.log_interval = parse_count(k, v); }},
      {"schedule.quality_ridge", [](auto& c, auto& k, auto& v) { c.train.quality_ridge = parse_real(k, v); }},
      {"aggregation.policies",
       [](auto& c, auto&, auto& v) {
         c.policies.clear();
         for (const auto& name : split_list(v)) c.policies.push_back(parse_policy(name));
       }},
      {"eval.fpr_targets",
       [](auto& c, auto& k, auto& v) {
         c.fpr_targets.clear();
         for (const auto& x : split_list(v)) c.fpr_targets.push_back(parse_real(k, x));
       }},
      {"output.dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
  };
  return table;
}

std::string fmt(double x) { return detail::format_double(x); }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + std::string(f(items[i]));
  return out;
}

}  // namespace

MarginConfig ExperimentConfig::margin_for(LossKind kind) const {
  MarginConfig m = margin;
  m.kind = kind;
  m.label_smooth_eps = label_smooth ? label_smooth_eps : 0.0;
  return m;
}

void ExperimentConfig::validate() const {
  data.validate();
  require(!losses.empty(), ErrorCode::kInvalidConfig, "at least one loss is required");
  for (auto k : losses) margin_for(k).validate();
  schedule.validate();
  require(train.batch_size >= 2, ErrorCode::kInvalidConfig, "batch_size must be >= 2");
  require(train.momentum >= 0.0 && train.momentum < 1.0, ErrorCode::kInvalidConfig, "momentum must lie in [0, 1)");
  require(train.weight_decay >= 0.0, ErrorCode::kInvalidConfig, "weight_decay must be >= 0");
  require(train.dropout >= 0.0 && train.dropout < 1.0, ErrorCode::kInvalidConfig, "dropout must lie in [0, 1)");
  require(train.stochastic_depth_keep > 0.0 && train.stochastic_depth_keep <= 1.0, ErrorCode::kInvalidConfig,
          "stochastic_depth_keep must lie in (0, 1]");
  require(train.finetune_iters >= 2 || !train.anchor_finetune, ErrorCode::kInvalidConfig,
          "finetune_iters must be >= 2 when anchor_finetune is on");
  require(train.finetune_lr > 0.0, ErrorCode::kInvalidConfig, "finetune_lr must be positive");
  require(train.log_interval >= 1, ErrorCode::kInvalidConfig, "log_interval must be >= 1");
  require(train.quality_ridge >= 0.0, ErrorCode::kInvalidConfig, "quality_ridge must be >= 0");
  require(!policies.empty(), ErrorCode::kInvalidConfig, "at least one aggregation policy is required");
  require(!fpr_targets.empty(), ErrorCode::kInvalidConfig, "at least one FPR target is required");
  for (double f : fpr_targets) require(f > 0.0 && f <= 1.0, ErrorCode::kInvalidConfig, "FPR targets must lie in (0, 1]");
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kInvalidConfig, std::string("config syntax: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    require(!body.empty() || body.data().empty(), ErrorCode::kInvalidConfig, "key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters().find(full);
      require(it != setters().end(), ErrorCode::kInvalidConfig, "unknown config key '" + full + "'");
      it->second(cfg, full, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open config " + path);
  return parse_config(in);
}

std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[data]\n"
    << "num_identities = " << c.data.num_identities << '\n'
    << "test_identities = " << c.data.test_identities << '\n'
    << "samples_per_id = " << c.data.samples_per_id << '\n'
    << "input_dim = " << c.data.input_dim << '\n'
    << "embed_dim = " << c.data.embed_dim << '\n'
    << "hidden_dim = " << c.data.hidden_dim << '\n'
    << "noise_sigma = " << fmt(c.data.noise_sigma) << '\n'
    << "corrupt_fraction = " << fmt(c.data.corrupt_fraction) << '\n'
    << "train_corrupt_fraction = " << fmt(c.data.train_corrupt_fraction) << '\n'
    << "sets_per_id = " << c.data.sets_per_id << '\n'
    << "max_frames = " << c.data.max_frames << '\n'
    << "seed = " << c.data.seed << "\n\n"
    << "[loss]\n"
    << "loss = " << join(c.losses, [](LossKind k) { return to_string(k); }) << '\n'
    << "scale = " << fmt(c.margin.scale) << '\n'
    << "margin = " << fmt(c.margin.margin) << '\n'
    << "neg_alpha = " << fmt(c.margin.neg_alpha) << '\n'
    << "neg_mu = " << fmt(c.margin.neg_mu) << '\n'
    << "neg_sigma = " << fmt(c.margin.neg_sigma) << '\n'
    << "label_smooth = " << (c.label_smooth ? "true" : "false") << '\n'
    << "label_smooth_eps = " << fmt(c.label_smooth_eps) << "\n\n"
    << "[schedule]\n"
    << "base_lr = " << fmt(c.schedule.base_lr) << '\n'
    << "peak_lr = " << fmt(c.schedule.peak_lr) << '\n'
    << "warmup_iters = " << c.schedule.warmup_iters << '\n'
    << "total_iters = " << c.schedule.total_iters << '\n'
    << "lr_floor = " << fmt(c.schedule.lr_floor) << '\n'
    << "batch_size = " << c.train.batch_size << '\n'
    << "momentum = " << fmt(c.train.momentum) << '\n'
    << "weight_decay = " << fmt(c.train.weight_decay) << '\n'
    << "dropout = " << fmt(c.train.dropout) << '\n'
    << "stochastic_depth_keep = " << fmt(c.train.stochastic_depth_keep) << '\n'
    << "adabn = " << (c.train.adabn ? "true" : "false") << '\n'
    << "anchor_finetune = " << (c.train.anchor_finetune ? "true" : "false") << '\n'
    << "finetune_iters = " << c.train.finetune_iters << '\n'
    << "finetune_lr = " << fmt(c.train.finetune_lr) << '\n'
    << "freeze_anchors = " << (c.train.freeze_anchors ? "true" : "false") << '\n'
    << "log_interval = " << c.train.log_interval << '\n'
    << "quality_ridge = " << fmt(c.train.quality_ridge) << "\n\n"
    << "[aggregation]\n"
    << "policies = " << join(c.policies, [](AggregationPolicy p) { return to_string(p); }) << "\n\n"
    << "[eval]\n"
    << "fpr_targets = " << join(c.fpr_targets, [](double f) { return fmt(f); }) << "\n\n"
    << "[output]\n"
    << "dir = " << c.output_dir << '\n';
  return o.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(config_to_string(cfg)); }

}  // namespace budgetface
