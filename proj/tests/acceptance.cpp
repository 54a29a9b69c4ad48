// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "budgetface/arch_io.hpp"
#include "budgetface/archflops.hpp"
#include "budgetface/checkpoint.hpp"
#include "budgetface/config.hpp"
#include "budgetface/error.hpp"
#include "budgetface/eval.hpp"
#include "budgetface/experiment.hpp"
#include "budgetface/margin_loss.hpp"
#include "budgetface/quality.hpp"
#include "budgetface/training.hpp"
#include "oracles.hpp"

using namespace budgetface;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += o.pass ? 0 : 1;
  std::printf("[%s] criterion %2d  %-26s %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  SeededRng rng(1001);
  double worst = 0.0;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t n = 1 + rng.uniform_int(8), c = 2 + rng.uniform_int(15);
    const Matrix cos = oracle::uniform_matrix(n, c, -0.95, 0.95, rng);
    const auto labels = oracle::random_labels(n, c, rng);
    for (LossKind kind : {LossKind::kArcFace, LossKind::kArcNegFace}) {
      MarginConfig cfg;
      cfg.kind = kind;
      // Keep every target on the smooth branch of the margin function.
      Matrix x = cos;
      for (std::size_t i = 0; i < n; ++i)
        if (x(i, labels[i]) < std::cos(std::numbers::pi - cfg.margin) + 0.05) x(i, labels[i]) = -0.8;
      const Matrix t = arcneg_modulators(x, labels, cfg);
      const auto f = [&](const Matrix& m) {
        return kind == LossKind::kArcFace ? arcface_forward(m, labels, cfg).loss
                                          : arcnegface_forward_with_modulators(m, labels, cfg, t).loss;
      };
      const LossOutput out = margin_loss_forward(x, labels, cfg);
      const Matrix fd = oracle::finite_difference(f, x, 1e-6);
      worst = std::max(worst, oracle::max_relative_error(loss_backward(out, labels), fd, 1e-2));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 5.0, fmt("max rel err %.3g (< 1e-5), %.2f s (< 5 s)", worst, secs)};
}

Outcome reduction_identity() {
  SeededRng rng(1002);
  double worst_neg = 0.0, worst_ce = 0.0;
  MarginConfig af;
  MarginConfig an = af;
  an.kind = LossKind::kArcNegFace;
  MarginConfig m0 = af;
  m0.margin = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(8), c = 2 + rng.uniform_int(15);
    const Matrix cos = oracle::uniform_matrix(n, c, -1.0, 1.0, rng);
    const auto labels = oracle::random_labels(n, c, rng);
    const Matrix ones(n, c, 1.0);
    worst_neg = std::max(worst_neg, std::abs(arcnegface_forward_with_modulators(cos, labels, an, ones).loss -
                                             arcface_forward(cos, labels, af).loss));
    std::vector<std::vector<double>> logits(n, std::vector<double>(c));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) logits[i][j] = m0.scale * cos(i, j);
    worst_ce = std::max(worst_ce, std::abs(arcface_forward(cos, labels, m0).loss - oracle::softmax_ce(logits, labels)));
  }
  return {worst_neg <= 1e-12 && worst_ce <= 1e-12,
          fmt("|neg(t=1) - arc| %.3g, |arc(m=0) - CE| %.3g (<= 1e-12)", worst_neg, worst_ce)};
}

Outcome modulator_values() {
  const MarginConfig cfg{LossKind::kArcNegFace, 64.0, 0.5, 1.2, 0.0, 1.0, 0.0};
  double peak_err = 0.0;
  for (double x : {-1.0, -0.3, 0.0, 0.42, 1.0}) peak_err = std::max(peak_err, std::abs(arcneg_modulator(x, x, cfg) - 1.2));
  const double g10 = arcneg_modulator(1.0, 0.0, cfg);
  const double err = std::abs(g10 - 1.2 * std::exp(-0.5));
  return {peak_err == 0.0 && err <= 1e-12,
          fmt("G(x,x)-1.2 = %.3g, G(1,0) = %.9f (err %.3g)", peak_err, g10, err)};
}

Outcome qan_algebra() {
  SeededRng rng(1004);
  double worst_rescale = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> q(3 + rng.uniform_int(14));
    for (double& x : q) x = rng.uniform();
    const auto w = quality_rescale(q);
    const auto hi = std::max_element(q.begin(), q.end()) - q.begin();
    const auto lo = std::min_element(q.begin(), q.end()) - q.begin();
    worst_rescale = std::max({worst_rescale, std::abs(w[static_cast<std::size_t>(hi)] - 1.0),
                              std::abs(w[static_cast<std::size_t>(lo)])});
  }
  double worst_perm = 0.0;
  bool small_ok = true, equal_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(10), d = 2 + rng.uniform_int(6);
    FrameSet s{"s", {}, std::vector<double>{}};
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      for (double& x : v) x = rng.normal();
      s.frames.push_back(normalize(v));
      s.qualities->push_back(rng.uniform());
    }
    FrameSet p = s;
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(i));
      std::swap(p.frames[i - 1], p.frames[j]);
      std::swap((*p.qualities)[i - 1], (*p.qualities)[j]);
    }
    for (auto pol : {AggregationPolicy::kAvg, AggregationPolicy::kWeightedSum, AggregationPolicy::kQanPlusPlus}) {
      const Embedding a = aggregate(s, pol), b = aggregate(p, pol);
      for (std::size_t k = 0; k < d; ++k) worst_perm = std::max(worst_perm, std::abs(a[k] - b[k]));
    }
    if (n < 3) small_ok &= aggregate(s, AggregationPolicy::kQanPlusPlus) == aggregate(s, AggregationPolicy::kWeightedSum);
    FrameSet eq = s;
    std::fill(eq.qualities->begin(), eq.qualities->end(), 0.37);
    equal_ok &= aggregate(eq, AggregationPolicy::kQanPlusPlus) == aggregate(eq, AggregationPolicy::kAvg);
  }
  return {worst_rescale <= 1e-12 && worst_perm <= 1e-12 && small_ok && equal_ok,
          fmt("rescale err %.3g, permutation err %.3g, n<3 exact %.0f, equal-q exact %.0f", worst_rescale, worst_perm,
              small_ok ? 1.0 : 0.0, equal_ok ? 1.0 : 0.0)};
}

Outcome schedule_endpoints() {
  const Schedule s{0.001, 0.4, 10000, 100000, 0.0};
  const bool start = lr_at(0, s) == 0.001, peak = lr_at(10000, s) == 0.4;
  const double end = std::abs(lr_at(100000, s));
  const double jump = std::abs(lr_at(10000, s) - lr_at(9999, s) - (0.4 - 0.001) / 10000.0);
  bool monotone = true;
  for (std::int64_t i = 10000; i + 100 <= 100000; i += 100) monotone &= lr_at(i + 100, s) <= lr_at(i, s);
  return {start && peak && end <= 1e-15 && jump <= 1e-15 && monotone,
          fmt("lr(0)=%.3g lr(10000)=%.3g lr(total)=%.3g boundary err %.3g", lr_at(0, s), lr_at(10000, s), end, jump) +
              (monotone ? ", monotone" : ", NOT monotone")};
}

Outcome stochastic_depth() {
  std::size_t kept = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    SeededRng rng(seed);
    const DepthMask m = sample_depth_mask(10, 0.8, rng);
    kept += m.kept_count();
    total += m.keep.size();
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(total);
  return {std::abs(frac - 0.8) <= 0.01, fmt("kept fraction %.5f (0.8 +- 0.01)", frac)};
}

Outcome adabn() {
  SeededRng rng(1007);
  const std::vector<double> mean{4.0, -3.0, 0.25, 100.0}, sd{0.5, 3.0, 1.0, 10.0};
  std::vector<Matrix> stream;
  for (int b = 0; b < 10; ++b) {
    Matrix m(50, mean.size());
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t k = 0; k < mean.size(); ++k) m(r, k) = mean[k] + sd[k] * rng.normal();
    stream.push_back(std::move(m));
  }
  const BnStats old{{0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}, 1e-12};
  const BnStats s = adabn_recalibrate(stream, old);
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& b : stream) {
      const Matrix z = bn_normalize(b, s);
      for (std::size_t r = 0; r < z.rows(); ++r, n += 1.0) sum += z(r, k);
    }
    const double mu = sum / n;
    for (const auto& b : stream) {
      const Matrix z = bn_normalize(b, s);
      for (std::size_t r = 0; r < z.rows(); ++r) sq += (z(r, k) - mu) * (z(r, k) - mu);
    }
    worst_mean = std::max(worst_mean, std::abs(mu));
    worst_var = std::max(worst_var, std::abs(sq / n - 1.0));
  }
  const BnStats again = adabn_recalibrate(stream, s);
  const bool idem = again.mean == s.mean && again.var == s.var && again.epsilon == s.epsilon;
  return {worst_mean < 1e-10 && worst_var < 1e-8 && idem,
          fmt("|mean| %.3g (< 1e-10), |var-1| %.3g (< 1e-8), idempotent %.0f", worst_mean, worst_var, idem ? 1.0 : 0.0)};
}

Outcome tpr_oracle() {
  SeededRng rng(1008);
  std::size_t mismatches = 0;
  bool fpr_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    ScoreSet s;
    const std::size_t total = 2 + rng.uniform_int(199);
    const std::size_t g = 1 + rng.uniform_int(total - 1);
    const bool coarse = rng.bernoulli(0.5);
    const auto draw = [&](double lo, double hi) {
      const double v = rng.uniform(lo, hi);
      return coarse ? std::round(v * 25.0) / 25.0 : v;
    };
    for (std::size_t i = 0; i < g; ++i) s.genuine.push_back(draw(-0.2, 1.0));
    for (std::size_t i = g; i < total; ++i) s.impostor.push_back(draw(-0.6, 0.8));
    const double target = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 1.0);
    const TprAtFpr r = tpr_at_fpr(s, target);
    const auto o = oracle::threshold_sweep(s, target);
    mismatches += (r.tpr != o.tpr || r.threshold != o.threshold) ? 1 : 0;
    fpr_ok &= r.achieved_fpr <= target;
  }
  return {mismatches == 0 && fpr_ok, fmt("%.0f / 1000 mismatches vs exhaustive sweep, achieved fpr <= target: %.0f",
                                          static_cast<double>(mismatches), fpr_ok ? 1.0 : 0.0)};
}

Outcome flops_counter() {
  LayerSpec conv;
  conv.kind = LayerKind::kConv2d;
  conv.out_channels = 1;
  conv.kernel = 3;
  const Flops c = layer_flops(conv, {1, 6, 6}).flops;
  LayerSpec fc;
  fc.kind = LayerKind::kFc;
  fc.out_channels = 256;
  const Flops f = layer_flops(fc, {512, 1, 1}).flops;
  const ArchSpec r100 = load_arch(BUDGETFACE_ARCH_DIR "/r100.arch");
  const Flops total = arch_flops(r100);
  const double rel = std::abs(static_cast<double>(total) - 24.22e9) / 24.22e9;

  BudgetQuery q;
  q.budget = 30'000'000'000;
  q.depth_multipliers = {0.5, 0.75, 0.9, 1.0, 1.1, 1.2, 1.3, 1.5};
  q.width_multipliers = {0.75, 0.875, 1.0, 1.0625, 1.125, 1.25};
  q.channel_rounding = 8;
  const auto cands = expand_under_budget(r100, q);
  std::size_t fit = 0;
  bool all_within = true;
  for (const auto& cand : cands) all_within &= cand.flops <= q.budget && arch_flops(cand.arch) == cand.flops;
  for (double d : q.depth_multipliers)
    for (double w : q.width_multipliers) fit += arch_flops(scale_arch(r100, d, w, 8)) <= q.budget ? 1 : 0;
  std::vector<std::int64_t> widths;
  for (const Stage* s : scale_arch(r100, 1.0, 1.125).stages()) widths.push_back(s->channels);
  const bool width_row = widths == std::vector<std::int64_t>{72, 144, 288, 576};
  return {c == 288 && f == 262144 && rel <= 0.10 && all_within && fit == cands.size() && width_row,
          fmt("conv %.0f, fc %.0f, r100 %.4gG (%.2f%% off 24.22G)", static_cast<double>(c), static_cast<double>(f),
              static_cast<double>(total) / 1e9, 100.0 * rel) +
              fmt(", %.0f candidates <= budget of %.0f fitting, width row ok %.0f", static_cast<double>(cands.size()),
                  static_cast<double>(fit), width_row ? 1.0 : 0.0)};
}

ExperimentConfig default_config() { return load_config(BUDGETFACE_CONFIG_DIR "/default.ini"); }

double row_tpr(const std::vector<ReportRow>& rows, const std::string& loss, const std::string& policy, double fpr) {
  for (const auto& r : rows)
    if (r.loss == loss && r.policy == policy && r.fpr_target == fpr) return r.tpr;
  fail(ErrorCode::kEmptyResult, "report row missing: " + loss + "/" + policy);
}

// Thresholds frozen from development runs on configs/default.ini.
constexpr double kFpr = 1e-2;
constexpr double kArcNegSlack = 0.01;
constexpr double kFinetuneSlack = 0.01;

void end_to_end() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = default_config();
  const ExperimentResult exp = run_experiment(cfg);

  // (d): the same benchmark with anchor finetuning switched on.
  ExperimentConfig ft = cfg;
  ft.train.anchor_finetune = true;
  const IdentityData data = gen_identities(ft.data);
  const TrainResult ft_run = train(ft, LossKind::kArcNegFace, data);
  const double keep = ft.train.stochastic_depth_keep;
  const double ft_tpr =
      tpr_at_fpr(verification_pairs(embed(ft_run.checkpoint.params, data.test.inputs, keep),
                                    data.test.sample_names(), Pairing::all()),
                 kFpr)
          .tpr;
  const double secs = seconds_since(t0);

  report(10, "end-to-end (a) loss", [&] {
    std::string detail;
    bool ok = true;
    for (const auto& run : exp.runs) {
      const auto& e = run.epoch_eval_losses;
      std::size_t rises = 0;
      for (std::size_t i = 1; i < e.size(); ++i) rises += e[i] >= e[i - 1] ? 1 : 0;
      ok &= rises == 0 && e.size() >= 2;
      detail += run.checkpoint.loss + fmt(": %.0f epochs, %.4f -> %.4f, %.0f non-decreasing steps; ",
                                          static_cast<double>(e.size()), e.front(), e.back(),
                                          static_cast<double>(rises));
    }
    return Outcome{ok, detail};
  });
  report(10, "end-to-end (b) qan_pp", [&] {
    bool ok = true;
    std::string detail;
    for (LossKind k : cfg.losses) {
      const std::string l(to_string(k));
      const double q = row_tpr(exp.rows, l, "qan_pp", kFpr), a = row_tpr(exp.rows, l, "avg", kFpr);
      ok &= q >= a;
      detail += l + fmt(": qan_pp %.4f vs avg %.4f; ", q, a);
    }
    return Outcome{ok, detail};
  });
  report(10, "end-to-end (c) arcnegface", [&] {
    const double n = row_tpr(exp.rows, "arcnegface", "image", kFpr), a = row_tpr(exp.rows, "arcface", "image", kFpr);
    return Outcome{n >= a - kArcNegSlack, fmt("arcnegface %.4f vs arcface %.4f - %.2f", n, a, kArcNegSlack)};
  });
  report(10, "end-to-end (d) finetune", [&] {
    const double base = row_tpr(exp.rows, "arcnegface", "image", kFpr);
    return Outcome{ft_tpr >= base - kFinetuneSlack, fmt("finetuned %.4f vs %.4f - %.2f", ft_tpr, base, kFinetuneSlack)};
  });
  report(10, "end-to-end runtime", [&] { return Outcome{secs < 120.0, fmt("%.1f s (< 120 s)", secs)}; });
}

Outcome determinism() {
  ExperimentConfig cfg = default_config();
  cfg.data.num_identities = 40;
  cfg.data.test_identities = 12;
  cfg.schedule.total_iters = 200;
  cfg.schedule.warmup_iters = 20;
  std::ostringstream a, b;
  write_report_csv(a, run_experiment(cfg).rows);
  const ExperimentResult second = run_experiment(cfg);
  write_report_csv(b, second.rows);
  std::stringstream c1;
  save_checkpoint(c1, second.runs.front().checkpoint);
  const std::string first_bytes = c1.str();
  const Checkpoint loaded = load_checkpoint(c1);
  std::stringstream c2;
  save_checkpoint(c2, loaded);
  const bool same_report = a.str() == b.str(), same_ckpt = loaded == second.runs.front().checkpoint,
             same_bytes = c2.str() == first_bytes;
  return {same_report && same_ckpt && same_bytes,
          fmt("report bytes equal %.0f, checkpoint equal %.0f, re-save bytes equal %.0f", same_report, same_ckpt,
              same_bytes)};
}

}  // namespace

int main() {
  report(1, "gradient correctness", gradient_correctness);
  report(2, "reduction identity", reduction_identity);
  report(3, "modulator values", modulator_values);
  report(4, "QAN++ algebra", qan_algebra);
  report(5, "schedule endpoints", schedule_endpoints);
  report(6, "stochastic depth", stochastic_depth);
  report(7, "AdaBN", adabn);
  report(8, "TPR@FPR oracle", tpr_oracle);
  report(9, "flops counter", flops_counter);
  end_to_end();
  report(11, "determinism", determinism);
  std::printf("%d failed\n", failures);
  return failures;
}
