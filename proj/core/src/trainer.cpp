#include "budgetface/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "budgetface/error.hpp"
#include "budgetface/quality.hpp"
#include "csv_util.hpp"

namespace budgetface {
namespace {

// Visits (param, grad, velocity, decayed) for every trainable tensor.
template <typename F>
void for_each_tensor(ModelParams& p, const ModelParams& g, ModelParams& v, bool include_anchors, F&& f) {
  f(p.w1.data(), g.w1.data(), v.w1.data(), true);
  f(std::span<double>(p.b1), std::span<const double>(g.b1), std::span<double>(v.b1), false);
  f(p.wr.data(), g.wr.data(), v.wr.data(), true);
  f(std::span<double>(p.br), std::span<const double>(g.br), std::span<double>(v.br), false);
  f(p.w2.data(), g.w2.data(), v.w2.data(), true);
  f(std::span<double>(p.b2), std::span<const double>(g.b2), std::span<double>(v.b2), false);
  f(std::span<double>(p.gamma), std::span<const double>(g.gamma), std::span<double>(v.gamma), false);
  f(std::span<double>(p.beta), std::span<const double>(g.beta), std::span<double>(v.beta), false);
  if (include_anchors) f(p.anchors.data(), g.anchors.data(), v.anchors.data(), true);
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy(m.row(idx[r]).begin(), m.row(idx[r]).end(), out.row(r).begin());
  return out;
}

class Loop {
 public:
  Loop(const ExperimentConfig& cfg, LossKind kind, const Dataset& train, ModelParams& params, SeededRng root)
      : cfg_(cfg),
        margin_(cfg.margin_for(kind)),
        train_(train),
        p_(params),
        velocity_(zeros_like(params)),
        shuffle_rng_(root.split("shuffle")),
        dropout_rng_(root.split("dropout")),
        depth_rng_(root.split("depth")),
        order_(train.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    batch_ = std::min(cfg.train.batch_size, train.size());
    iters_per_epoch_ = train.size() / batch_;
  }

  // Runs `iters` steps under `sched`, appending to the metrics log.
  void run(std::int64_t iters, const Schedule& sched, bool update_anchors, std::vector<MetricsRow>& log,
           std::vector<double>* epoch_losses, std::vector<double>* epoch_eval_losses) {
    const std::size_t h = p_.hidden_dim();
    const double drop = cfg_.train.dropout;
    double interval_sum = 0.0;
    std::int64_t interval_count = 0;
    double epoch_sum = 0.0;
    for (std::int64_t it = 0; it < iters; ++it) {
      if (cursor_ == 0) reshuffle();
      const std::span<const std::size_t> idx(order_.data() + cursor_ * batch_, batch_);
      const Matrix x = gather_rows(train_.inputs, idx);
      std::vector<std::size_t> labels;
      labels.reserve(batch_);
      for (auto i : idx) labels.push_back(train_.labels[i]);

      const double lr = lr_at(it, sched);
      const double gate = sample_depth_mask(1, cfg_.train.stochastic_depth_keep, depth_rng_).branch_scale(0);
      Matrix dropout_scale;
      if (drop > 0.0) {
        dropout_scale = Matrix(batch_, h);
        for (double& s : dropout_scale.data()) s = dropout_rng_.bernoulli(1.0 - drop) ? 1.0 / (1.0 - drop) : 0.0;
      }

      const auto diverged = [&] {
        fail(ErrorCode::kDivergedLoss, "non-finite loss at step " + std::to_string(global_iter_) +
                                           " (lr " + detail::format_double(lr) + ")");
      };
      ModelParams grads;
      StepOutput step;
      try {
        step = loss_and_gradients(p_, x, labels, margin_, gate, dropout_scale, grads);
      } catch (const Error& e) {
        // overflowed weights surface as non-finite or zero features
        if (e.code() != ErrorCode::kNonFiniteInput && e.code() != ErrorCode::kZeroVector) throw;
        diverged();
      }
      if (!std::isfinite(step.loss)) diverged();
      update_running_stats(step.batch_stats);
      sgd_step(grads, lr, update_anchors);

      ++global_iter_;
      interval_sum += step.loss;
      ++interval_count;
      if (interval_count == static_cast<std::int64_t>(cfg_.train.log_interval) || it + 1 == iters) {
        log.push_back({global_iter_, lr, interval_sum / static_cast<double>(interval_count)});
        interval_sum = 0.0;
        interval_count = 0;
      }
      epoch_sum += step.loss;
      if (++cursor_ == iters_per_epoch_) {
        cursor_ = 0;
        if (epoch_losses != nullptr) epoch_losses->push_back(epoch_sum / static_cast<double>(iters_per_epoch_));
        if (epoch_eval_losses != nullptr) epoch_eval_losses->push_back(eval_loss());
        epoch_sum = 0.0;
      }
    }
  }

  std::int64_t iterations() const noexcept { return global_iter_; }

 private:
  // BN statistics are the exact training-set statistics, so the value does
  // not depend on the running-average noise.
  double eval_loss() const {
    const double keep = cfg_.train.stochastic_depth_keep;
    ModelParams q = p_;
    const std::array<Matrix, 1> all{infer(q, train_.inputs, keep).pre_bn};
    q.running = adabn_recalibrate(all, q.running);
    const Matrix e = infer(q, train_.inputs, keep).embeddings;
    const Matrix cos = cosine_matrix(e, unit_anchors(q));
    return margin_loss_forward(cos, train_.labels, margin_).loss;
  }

  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(shuffle_rng_.uniform_int(i))]);
  }

  void update_running_stats(const BnStats& batch) {
    constexpr double kKeep = 0.9;
    for (std::size_t k = 0; k < batch.channels(); ++k) {
      p_.running.mean[k] = kKeep * p_.running.mean[k] + (1.0 - kKeep) * batch.mean[k];
      p_.running.var[k] = kKeep * p_.running.var[k] + (1.0 - kKeep) * batch.var[k];
    }
  }

  void sgd_step(const ModelParams& g, double lr, bool update_anchors) {
    const double mu = cfg_.train.momentum;
    const double wd = cfg_.train.weight_decay;
    for_each_tensor(p_, g, velocity_, update_anchors,
                    [&](std::span<double> w, std::span<const double> grad, std::span<double> v, bool decayed) {
                      for (std::size_t i = 0; i < w.size(); ++i) {
                        const double d = grad[i] + (decayed ? wd * w[i] : 0.0);
                        v[i] = mu * v[i] + d;
                        w[i] -= lr * v[i];
                      }
                    });
  }

  const ExperimentConfig& cfg_;
  MarginConfig margin_;
  const Dataset& train_;
  ModelParams& p_;
  ModelParams velocity_;
  SeededRng shuffle_rng_;
  SeededRng dropout_rng_;
  SeededRng depth_rng_;
  std::vector<std::size_t> order_;
  std::size_t batch_ = 1;
  std::size_t iters_per_epoch_ = 1;
  std::size_t cursor_ = 0;
  std::int64_t global_iter_ = 0;
};

Matrix infer_batched(const ModelParams& p, const Matrix& inputs, double keep, Matrix InferenceOutputs::*member) {
  return infer(p, inputs, keep).*member;
}

}  // namespace

ModelParams initial_params(const ExperimentConfig& cfg, std::size_t num_classes) {
  SeededRng init_rng = SeededRng(cfg.data.seed).split("init");
  return init_model(cfg.data.input_dim, cfg.data.hidden_dim, cfg.data.embed_dim, num_classes, init_rng);
}

TrainResult train(const ExperimentConfig& cfg, LossKind kind, const IdentityData& data,
                  std::optional<std::int64_t> max_iters) {
  cfg.validate();
  const Dataset& train_set = data.train;
  require(train_set.size() >= 2, ErrorCode::kInvalidSpec, "training set needs at least two samples");
  for (std::size_t i = 0; i < train_set.size(); ++i)
    require(train_set.labels[i] < train_set.class_names.size(), ErrorCode::kInvalidLabel, "training label out of range");
  {
    // Open-set protocol: held-out identities never appear in training.
    std::vector<std::string> train_names = train_set.class_names;
    std::sort(train_names.begin(), train_names.end());
    for (const auto& name : data.test.class_names)
      require(!std::binary_search(train_names.begin(), train_names.end(), name), ErrorCode::kInvalidSpec,
              "test identity '" + name + "' also appears in training");
  }

  TrainResult result;
  ModelParams p = initial_params(cfg, train_set.class_names.size());
  const std::int64_t main_iters = max_iters ? std::min(*max_iters, cfg.schedule.total_iters) : cfg.schedule.total_iters;
  require(main_iters >= 0, ErrorCode::kOutOfRange, "max_iters must be nonnegative");

  Loop loop(cfg, kind, train_set, p, SeededRng(cfg.data.seed).split(to_string(kind)));
  loop.run(main_iters, cfg.schedule, true, result.log, &result.epoch_losses, &result.epoch_eval_losses);

  if (main_iters > 0) {
    const double keep = cfg.train.stochastic_depth_keep;
    if (cfg.train.anchor_finetune) {
      const Matrix feats = infer_batched(p, train_set.inputs, keep, &InferenceOutputs::embeddings);
      const auto ft = anchor_finetune(feats, train_set.labels, AnchorSet(unit_anchors(p), train_set.class_names));
      p.anchors = ft.anchors.matrix();
      const Schedule ft_sched{cfg.train.finetune_lr, cfg.train.finetune_lr, 1, cfg.train.finetune_iters, 0.0};
      loop.run(cfg.train.finetune_iters, ft_sched, !cfg.train.freeze_anchors, result.log, nullptr, nullptr);
    }
    if (cfg.train.adabn) {
      const Matrix target = infer_batched(p, data.test.inputs, keep, &InferenceOutputs::pre_bn);
      const std::array<Matrix, 1> stream{target};
      p.running = adabn_recalibrate(stream, p.running);
    }
    const InferenceOutputs out = infer(p, train_set.inputs, keep);
    const auto targets = quality_regression_targets(out.embeddings, AnchorSet(unit_anchors(p), train_set.class_names),
                                                    train_set.labels);
    fit_quality_head(p, out.hidden, targets.values, cfg.train.quality_ridge);
  }

  result.checkpoint = Checkpoint{std::move(p), train_set.class_names, loop.iterations(), config_hash(cfg),
                                 std::string(to_string(kind))};
  return result;
}

TrainResult train(const ExperimentConfig& cfg, LossKind kind) { return train(cfg, kind, gen_identities(cfg.data)); }

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& log) {
  out << "iter,lr,loss\n";
  for (const auto& r : log)
    out << r.iter << ',' << detail::format_double(r.lr) << ',' << detail::format_double(r.loss) << '\n';
}

}  // namespace budgetface
