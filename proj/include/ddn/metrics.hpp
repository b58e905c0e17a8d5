#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ddn/linalg.hpp"
#include "ddn/model.hpp"

namespace ddn {

// Pooled over all (battery, cycle) pairs jointly; units follow the inputs
// (Ah, or SOH fraction in SOH mode).
struct Metrics {
  double rmse = 0.0;
  double mape_percent = 0.0;
  double r_squared = 0.0;
  std::size_t count = 0;
};

double rmse(const Vec& pred, const Vec& actual);
// (1/M) sum |pred - actual| / actual * 100; rejects zero actuals
double mape_percent(const Vec& pred, const Vec& actual);
// 1 - SS_res / SS_tot; rejects constant actuals
double r_squared(const Vec& pred, const Vec& actual);
Metrics compute_metrics(const Vec& pred, const Vec& actual);

std::optional<double> pearson(const Vec& x, const Vec& y);  // nullopt when degenerate

// Per-slot attention weights across a battery's frames, set against the
// capacity step at each frame's target cycle.
struct AttentionStudy {
  Vec capacity_diffs;                     // Q[t+N] - Q[t+N-1] per frame
  std::vector<Vec> slot_weights;          // [slot][frame]
  std::vector<std::optional<double>> corr_abs_diff;  // alpha vs |diff|
  std::vector<std::optional<double>> corr_raw_diff;  // alpha vs diff
};

// capacity_by_cycle: one battery's capacity series indexed by cycle (Ah or
// SOH units). A trace starting at t pairs with Q[t+N] - Q[t+N-1]. Needs at
// least 3 traces.
AttentionStudy attention_study(const std::vector<AttentionTrace>& traces,
                               const Vec& capacity_by_cycle, std::size_t history_len);

struct PredictionRow {
  std::string battery_id;
  std::size_t cycle = 0;
  double actual = 0.0;
  double predicted = 0.0;
};

struct AttentionRow {
  std::string battery_id;
  std::size_t frame_t = 0;
  std::size_t slot = 0;
  double alpha = 0.0;
};

std::string format_double(double v);  // shortest round-trip-exact decimal

// header: battery_id,cycle,actual_ah,predicted_ah
void write_predictions_csv(const std::vector<PredictionRow>& rows, std::ostream& out);
// header: battery_id,frame_t,slot,alpha
void write_attention_csv(const std::vector<AttentionRow>& rows, std::ostream& out);
// key=value lines
void write_metrics_file(const Metrics& m, std::ostream& out);

}  // namespace ddn
