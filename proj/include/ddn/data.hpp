#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddn/model.hpp"

namespace ddn {

// One charge/discharge cycle's raw telemetry. Curve samples are
// (time in seconds, terminal voltage) pairs with strictly increasing times.
struct CycleRecord {
  std::size_t cycle_index = 0;
  std::vector<std::pair<double, double>> charge_curve;
  std::vector<std::pair<double, double>> discharge_curve;
  double discharge_capacity = 0.0;  // Ah
};

struct BatteryHistory {
  std::string battery_id;
  std::vector<CycleRecord> cycles;  // contiguous indices from 0
  std::string temperature_label;
  std::string profile_label;
};

enum class Phase { Charge, Discharge };

// v -> (v - offset)/scale, or (offset - v)/scale when flipped.
struct VoltageRule {
  double offset = 0.0;
  double scale = 1.0;
  bool flipped = false;

  double apply(double v) const { return (flipped ? offset - v : v - offset) / scale; }
};

// Named voltage/capacity normalization scheme plus the dataset's resampling
// window and default history length.
struct NormProfile {
  std::string name;
  VoltageRule charge_rule;
  VoltageRule discharge_rule;
  std::optional<std::pair<double, double>> capacity_minmax;  // absent: pass-through
  double resample_window_s = 1500.0;
  std::size_t default_history = 3;

  void validate() const;

  // nasa1 | nasa2 | mit | oxford
  static NormProfile builtin(const std::string& name);
  // key=value file for custom rules
  static NormProfile from_file(const std::string& path);
};

// Canonical per-battery CSV: header `cycle,phase,time_s,voltage_v,capacity_ah`,
// capacity populated (and repeated) on discharge rows only. Errors carry the
// offending row number.
BatteryHistory parse_battery_csv(std::istream& in, const std::string& battery_id);
BatteryHistory parse_battery_csv_file(const std::string& path);
void write_battery_csv(const BatteryHistory& battery, std::ostream& out);
void write_battery_csv_file(const BatteryHistory& battery, const std::string& path);

// All *.csv under dir, sorted by filename; battery_id is the file stem.
std::vector<BatteryHistory> load_fleet(const std::string& dir);

// Values at n_points uniformly spaced times in [0, window] via linear
// interpolation; held constant beyond the observed ends.
Vec resample_linear(const std::vector<std::pair<double, double>>& curve, double window_s,
                    std::size_t n_points);

Vec normalize_voltage(const NormProfile& profile, const Vec& volts, Phase phase);
double normalize_capacity(const NormProfile& profile, double q);
double denormalize_capacity(const NormProfile& profile, double q_norm);

struct FrameOptions {
  // When true, history windows start at cycle 1 so the reference cycle never
  // appears among its own history slots.
  bool exclude_reference_from_history = false;
  // Targets and capacity features become Q/Q0 (state of health).
  bool soh_mode = false;
};

// Moving frames for one battery: frame t carries cycles t..t+N-1 and predicts
// cycle t+N. Feature layout follows the config's feature count: capacity,
// then charge voltage, then discharge voltage.
std::vector<MovingFrame> build_frames(const BatteryHistory& battery, const DdnConfig& cfg,
                                      const NormProfile& profile, const FrameOptions& opts = {});

struct FleetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Battery-granularity split: indices shuffled by seed, then sliced
// train/val/test with sizes floor(r0*B), floor(r1*B), remainder.
FleetSplit split_fleet(std::size_t battery_count, std::array<double, 3> ratios,
                       std::uint64_t seed);

}  // namespace ddn
