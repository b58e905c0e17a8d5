#include "ddn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ddn/errors.hpp"
#include "ddn/rng.hpp"

namespace ddn {
namespace {

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_glorot(Mat& w, Rng& rng) {
  const double limit = glorot_limit(w.cols, w.rows);
  for (double& x : w.a) x = rng.uniform(-limit, limit);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("train: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("train: epsilon must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  if (patience == 0) throw std::invalid_argument("train: patience must be at least 1");
  if (min_delta < 0.0) throw std::invalid_argument("train: negative min_delta");
}

AdamState AdamState::init(const DdnConfig& cfg) {
  AdamState s;
  s.m = DdnParams::zeros_like(cfg);
  s.v = DdnParams::zeros_like(cfg);
  s.step = 0;
  return s;
}

DdnParams init_params(const DdnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DdnParams p = DdnParams::zeros_like(cfg);
  Rng rng(seed);
  for (std::size_t j = 0; j < p.embed_w.size(); ++j) fill_glorot(p.embed_w[j], rng);
  fill_glorot(p.attn_hidden_w, rng);
  fill_glorot(p.attn_score_w, rng);
  fill_glorot(p.head_hidden_w, rng);
  fill_glorot(p.head_out_w, rng);
  return p;
}

void adam_step(DdnParams& params, const DdnParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  auto pv = params.tensors();
  auto gv = grads.tensors();
  auto mv = state.m.tensors();
  auto vv = state.v.tensors();
  if (pv.size() != gv.size()) throw std::invalid_argument("adam_step: tensor count mismatch");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t k = 0; k < pv.size(); ++k) {
    if (pv[k].size != gv[k].size) {
      throw std::invalid_argument("adam_step: shape mismatch in " + pv[k].name);
    }
    double* p = pv[k].data;
    const double* g = gv[k].data;
    double* m = mv[k].data;
    double* v = vv[k].data;
    for (std::size_t i = 0; i < pv[k].size; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch,
                                           std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(perm);
  return perm;
}

std::pair<DdnParams, TrainingLog> train(const std::vector<MovingFrame>& train_frames,
                                        const std::vector<MovingFrame>& val_frames,
                                        const DdnConfig& cfg, const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (train_frames.empty()) throw std::invalid_argument("train: empty training set");
  if (val_frames.empty() && tcfg.early_stopping) {
    throw std::invalid_argument("train: early stopping needs a validation set");
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool has_val = !val_frames.empty();

  DdnParams params = init_params(cfg, tcfg.rng_seed);
  TrainingLog log;
  log.best_val_loss = nan;
  log.stop_reason = "max_epochs";
  if (tcfg.max_epochs == 0) return {std::move(params), std::move(log)};

  AdamState adam = AdamState::init(cfg);
  DdnParams grads = DdnParams::zeros_like(cfg);
  DdnParams best_params = params;
  bool have_best = false;
  double patience_floor = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  const std::size_t n = train_frames.size();

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> perm = epoch_permutation(tcfg.rng_seed, epoch, n);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += tcfg.batch_size) {
      std::size_t end = std::min(begin + tcfg.batch_size, n);
      std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                     perm.begin() + static_cast<std::ptrdiff_t>(end));
      grads.fill(0.0);
      double batch_mse = batch_loss_backward(train_frames, batch, cfg, params, grads,
                                             tcfg.threads);
      if (!std::isfinite(batch_mse) || !grads.all_finite()) {
        throw NumericError("train: non-finite loss or gradient at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(begin / tcfg.batch_size));
      }
      adam_step(params, grads, adam, tcfg);
      loss_sum += batch_mse * static_cast<double>(end - begin);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.val_loss = has_val ? batch_loss(val_frames, cfg, params) : nan;
    if (has_val && !std::isfinite(stats.val_loss)) {
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(stats);

    if (has_val) {
      if (!have_best || stats.val_loss < log.best_val_loss) {
        log.best_val_loss = stats.val_loss;
        log.best_epoch = epoch;
        best_params = params;
        have_best = true;
      }
      if (tcfg.early_stopping) {
        if (patience_floor - stats.val_loss > tcfg.min_delta) {
          patience_floor = stats.val_loss;
          stale_epochs = 0;
        } else if (++stale_epochs >= tcfg.patience) {
          log.stop_reason = "early_stopping";
          break;
        }
      }
    }
  }

  return {have_best ? std::move(best_params) : std::move(params), std::move(log)};
}

Vec predict_frames(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                   const DdnParams& p, std::vector<AttentionTrace>* traces) {
  if (traces) traces->clear();
  Vec preds(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    AttentionTrace trace;
    preds[i] = forward(frames[i], cfg, p, traces ? &trace : nullptr);
    if (traces && cfg.pooling == Pooling::Attention) traces->push_back(std::move(trace));
  }
  return preds;
}

Metrics evaluate(const DdnParams& p, const std::vector<MovingFrame>& frames,
                 const DdnConfig& cfg, const NormProfile& profile) {
  if (frames.empty()) throw std::invalid_argument("evaluate: empty frame set");
  Vec pred_norm = predict_frames(frames, cfg, p);
  Vec pred(frames.size()), actual(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    pred[i] = denormalize_capacity(profile, pred_norm[i]);
    actual[i] = denormalize_capacity(profile, frames[i].target);
  }
  return compute_metrics(pred, actual);
}

void write_training_log(const TrainingLog& log, std::ostream& out) {
  out << "epoch,train_loss,val_loss,seconds\n";
  for (const EpochStats& e : log.epochs) {
    out << e.epoch << "," << format_double(e.train_loss) << "," << format_double(e.val_loss)
        << "," << format_double(e.seconds) << "\n";
  }
  out << "best_epoch=" << log.best_epoch << "\n"
      << "best_val_loss=" << format_double(log.best_val_loss) << "\n"
      << "stop_reason=" << log.stop_reason << "\n";
}

}  // namespace ddn
