#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ddn/data.hpp"
#include "ddn/metrics.hpp"
#include "ddn/model.hpp"

namespace ddn {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_epochs = 300;
  std::size_t batch_size = 32;
  std::size_t patience = 10;      // epochs without improvement > min_delta
  double min_delta = 1e-6;        // normalized-loss units
  bool early_stopping = true;
  std::uint64_t rng_seed = 0;
  int threads = 1;

  void validate() const;  // throws std::invalid_argument
};

struct AdamState {
  DdnParams m;
  DdnParams v;
  std::size_t step = 0;

  static AdamState init(const DdnConfig& cfg);
};

struct EpochStats {
  std::size_t epoch = 0;    // 1-based
  double train_loss = 0.0;  // frame-weighted mean of batch losses
  double val_loss = 0.0;    // NaN when no validation set
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0 when no validation epochs ran
  double best_val_loss = 0.0;  // NaN when no validation set
  std::string stop_reason;     // "max_epochs" or "early_stopping"
};

// Glorot uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
DdnParams init_params(const DdnConfig& cfg, std::uint64_t seed);

// Bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(DdnParams& params, const DdnParams& grads, AdamState& state,
               const TrainConfig& cfg);

// Deterministic shuffle of 0..n-1 for one epoch; epochs differ, runs repeat.
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n);

// Mini-batch Adam over shuffled frames with validation-driven early stopping.
// Returns the parameters from the best validation epoch (the final ones when
// no validation set is given). Non-finite loss or gradients abort with
// NumericError naming the epoch and batch.
std::pair<DdnParams, TrainingLog> train(const std::vector<MovingFrame>& train_frames,
                                        const std::vector<MovingFrame>& val_frames,
                                        const DdnConfig& cfg, const TrainConfig& tcfg);

// Normalized-unit predictions per frame; attention traces recorded when the
// config pools by attention and traces is non-null.
Vec predict_frames(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                   const DdnParams& p, std::vector<AttentionTrace>* traces = nullptr);

// Metrics in physical units: predictions and targets are de-normalized
// through the profile before RMSE/MAPE/R^2.
Metrics evaluate(const DdnParams& p, const std::vector<MovingFrame>& frames,
                 const DdnConfig& cfg, const NormProfile& profile);

// csv body (epoch,train_loss,val_loss,seconds) plus key=value trailer.
void write_training_log(const TrainingLog& log, std::ostream& out);

}  // namespace ddn
