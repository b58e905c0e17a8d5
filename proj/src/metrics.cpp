#include "ddn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace ddn {
namespace {

void require_paired(const Vec& pred, const Vec& actual, const char* op) {
  if (pred.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
  if (pred.size() != actual.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch, " +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(actual.size()));
  }
}

}  // namespace

double rmse(const Vec& pred, const Vec& actual) {
  require_paired(pred, actual, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - actual[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mape_percent(const Vec& pred, const Vec& actual) {
  require_paired(pred, actual, "mape");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (actual[i] == 0.0) {
      throw std::invalid_argument("mape: actual value at index " + std::to_string(i) +
                                  " is zero");
    }
    acc += std::abs(pred[i] - actual[i]) / actual[i];
  }
  return acc / static_cast<double>(pred.size()) * 100.0;
}

double r_squared(const Vec& pred, const Vec& actual) {
  require_paired(pred, actual, "r2");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    double r = actual[i] - pred[i];
    double t = actual[i] - mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  if (ss_tot == 0.0) throw std::invalid_argument("r2: actual values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

Metrics compute_metrics(const Vec& pred, const Vec& actual) {
  Metrics m;
  m.rmse = rmse(pred, actual);
  m.mape_percent = mape_percent(pred, actual);
  m.r_squared = r_squared(pred, actual);
  m.count = pred.size();
  return m;
}

std::optional<double> pearson(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

AttentionStudy attention_study(const std::vector<AttentionTrace>& traces,
                               const Vec& capacity_by_cycle, std::size_t history_len) {
  if (traces.size() < 3) {
    throw std::invalid_argument("attention_study: need at least 3 frames, got " +
                                std::to_string(traces.size()));
  }
  const std::size_t slots = traces[0].weights.size();
  if (slots == 0) throw std::invalid_argument("attention_study: empty weight vector");

  AttentionStudy study;
  study.capacity_diffs.reserve(traces.size());
  study.slot_weights.assign(slots, Vec{});
  for (const AttentionTrace& tr : traces) {
    if (tr.weights.size() != slots) {
      throw std::invalid_argument("attention_study: inconsistent slot counts");
    }
    std::size_t target = tr.frame_start + history_len;
    if (target >= capacity_by_cycle.size() || target == 0) {
      throw std::invalid_argument("attention_study: frame at " +
                                  std::to_string(tr.frame_start) +
                                  " has no capacity data for cycle " + std::to_string(target));
    }
    study.capacity_diffs.push_back(capacity_by_cycle[target] - capacity_by_cycle[target - 1]);
    for (std::size_t s = 0; s < slots; ++s) study.slot_weights[s].push_back(tr.weights[s]);
  }

  Vec abs_diffs(study.capacity_diffs.size());
  for (std::size_t i = 0; i < abs_diffs.size(); ++i) {
    abs_diffs[i] = std::abs(study.capacity_diffs[i]);
  }
  study.corr_abs_diff.resize(slots);
  study.corr_raw_diff.resize(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    study.corr_abs_diff[s] = pearson(study.slot_weights[s], abs_diffs);
    study.corr_raw_diff[s] = pearson(study.slot_weights[s], study.capacity_diffs);
  }
  return study;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_predictions_csv(const std::vector<PredictionRow>& rows, std::ostream& out) {
  out << "battery_id,cycle,actual_ah,predicted_ah\n";
  for (const PredictionRow& r : rows) {
    out << r.battery_id << "," << r.cycle << "," << format_double(r.actual) << ","
        << format_double(r.predicted) << "\n";
  }
}

void write_attention_csv(const std::vector<AttentionRow>& rows, std::ostream& out) {
  out << "battery_id,frame_t,slot,alpha\n";
  for (const AttentionRow& r : rows) {
    out << r.battery_id << "," << r.frame_t << "," << r.slot << ","
        << format_double(r.alpha) << "\n";
  }
}

void write_metrics_file(const Metrics& m, std::ostream& out) {
  out << "rmse=" << format_double(m.rmse) << "\n"
      << "mape_percent=" << format_double(m.mape_percent) << "\n"
      << "r_squared=" << format_double(m.r_squared) << "\n"
      << "count=" << m.count << "\n";
}

}  // namespace ddn
