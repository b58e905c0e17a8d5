#include "ddn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "ddn/errors.hpp"
#include "ddn/rng.hpp"

namespace ddn {
namespace {

const char* kCsvHeader = "cycle,phase,time_s,voltage_v,capacity_ah";

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void row_error(std::size_t row, const std::string& msg) {
  throw DataError("row " + std::to_string(row) + ": " + msg);
}

double parse_double_field(const std::string& field, std::size_t row, const char* what) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty()) {
    row_error(row, std::string(what) + " is not a number: '" + field + "'");
  }
  if (!std::isfinite(v)) row_error(row, std::string(what) + " is not finite");
  return v;
}

std::size_t parse_cycle_field(const std::string& field, std::size_t row) {
  std::size_t v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty()) {
    row_error(row, "cycle is not a non-negative integer: '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

void check_cycle_complete(const CycleRecord& c) {
  if (c.discharge_curve.size() < 2) {
    throw DataError("cycle " + std::to_string(c.cycle_index) +
                    ": discharge curve has fewer than 2 samples");
  }
  if (!c.charge_curve.empty() && c.charge_curve.size() < 2) {
    throw DataError("cycle " + std::to_string(c.cycle_index) +
                    ": charge curve has fewer than 2 samples");
  }
}

}  // namespace

void NormProfile::validate() const {
  if (name.empty()) throw std::invalid_argument("profile: empty name");
  if (charge_rule.scale == 0.0 || discharge_rule.scale == 0.0) {
    throw std::invalid_argument("profile " + name + ": zero voltage scale");
  }
  if (capacity_minmax && capacity_minmax->second <= capacity_minmax->first) {
    throw std::invalid_argument("profile " + name + ": capacity max must exceed min");
  }
  if (!(resample_window_s > 0.0)) {
    throw std::invalid_argument("profile " + name + ": window must be positive");
  }
  if (default_history == 0) {
    throw std::invalid_argument("profile " + name + ": history length must be positive");
  }
}

NormProfile NormProfile::builtin(const std::string& name) {
  NormProfile p;
  p.name = name;
  if (name == "nasa1" || name == "nasa2") {
    p.charge_rule = {0.0, 4.2, false};
    p.discharge_rule = {4.2, 4.2, true};
    p.resample_window_s = 1500.0;
    p.default_history = 3;
    if (name == "nasa1") p.capacity_minmax = {{1.1, 2.1}};
  } else if (name == "mit") {
    p.charge_rule = {3.6, 3.6, true};
    p.discharge_rule = {3.2, 3.2, true};
    p.capacity_minmax = {{0.8, 1.1}};
    p.resample_window_s = 360.0;
    p.default_history = 30;
  } else if (name == "oxford") {
    p.charge_rule = {2.7, 1.5, false};
    p.discharge_rule = {2.7, 1.5, false};
    p.capacity_minmax = {{0.75, 1.0}};
    p.resample_window_s = 1500.0;
    p.default_history = 3;
  } else {
    throw std::invalid_argument("unknown profile '" + name +
                                "' (expected nasa1, nasa2, mit, or oxford)");
  }
  p.validate();
  return p;
}

NormProfile NormProfile::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile file " + path);

  NormProfile p;
  bool have_cap_min = false, have_cap_max = false;
  double cap_min = 0.0, cap_max = 0.0;
  std::string line;
  std::size_t row = 0;
  auto parse_flag = [&](const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    row_error(row, "expected 0/1/true/false, got '" + v + "'");
  };

  while (std::getline(in, line)) {
    ++row;
    strip_cr(line);
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) row_error(row, "expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "name") {
      p.name = val;
    } else if (key == "charge_offset") {
      p.charge_rule.offset = parse_double_field(val, row, key.c_str());
    } else if (key == "charge_scale") {
      p.charge_rule.scale = parse_double_field(val, row, key.c_str());
    } else if (key == "charge_flipped") {
      p.charge_rule.flipped = parse_flag(val);
    } else if (key == "discharge_offset") {
      p.discharge_rule.offset = parse_double_field(val, row, key.c_str());
    } else if (key == "discharge_scale") {
      p.discharge_rule.scale = parse_double_field(val, row, key.c_str());
    } else if (key == "discharge_flipped") {
      p.discharge_rule.flipped = parse_flag(val);
    } else if (key == "capacity_min") {
      cap_min = parse_double_field(val, row, key.c_str());
      have_cap_min = true;
    } else if (key == "capacity_max") {
      cap_max = parse_double_field(val, row, key.c_str());
      have_cap_max = true;
    } else if (key == "window_s") {
      p.resample_window_s = parse_double_field(val, row, key.c_str());
    } else if (key == "history_n") {
      p.default_history = parse_cycle_field(val, row);
    } else {
      row_error(row, "unknown profile key '" + key + "'");
    }
  }
  if (have_cap_min != have_cap_max) {
    throw DataError(path + ": capacity_min and capacity_max must be given together");
  }
  if (have_cap_min) p.capacity_minmax = {{cap_min, cap_max}};
  if (p.name.empty()) p.name = std::filesystem::path(path).stem().string();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
  return p;
}

BatteryHistory parse_battery_csv(std::istream& in, const std::string& battery_id) {
  BatteryHistory battery;
  battery.battery_id = battery_id;

  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw DataError("empty file");
  ++row;
  strip_cr(line);
  if (line != kCsvHeader) {
    row_error(row, "header must be '" + std::string(kCsvHeader) + "', got '" + line + "'");
  }

  bool have_cycle = false;
  std::size_t cur_cycle = 0;
  while (std::getline(in, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 5) {
      row_error(row, "expected 5 fields, got " + std::to_string(fields.size()));
    }

    const std::string& phase = fields[1];
    if (phase == "impedance") continue;  // tolerated, not modeled
    if (phase != "charge" && phase != "discharge") {
      row_error(row, "unknown phase '" + phase + "'");
    }

    std::size_t cyc = parse_cycle_field(fields[0], row);
    if (!have_cycle) {
      if (cyc != 0) row_error(row, "first cycle must be 0, got " + std::to_string(cyc));
      battery.cycles.push_back(CycleRecord{0, {}, {}, 0.0});
      have_cycle = true;
    } else if (cyc == cur_cycle + 1) {
      check_cycle_complete(battery.cycles.back());
      battery.cycles.push_back(CycleRecord{cyc, {}, {}, 0.0});
      cur_cycle = cyc;
    } else if (cyc != cur_cycle) {
      row_error(row, "cycle " + std::to_string(cyc) + " after cycle " +
                         std::to_string(cur_cycle) + " (cycles must be contiguous and ascending)");
    }

    double t = parse_double_field(fields[2], row, "time_s");
    double v = parse_double_field(fields[3], row, "voltage_v");
    CycleRecord& cyc_rec = battery.cycles.back();
    auto& curve = (phase == "charge") ? cyc_rec.charge_curve : cyc_rec.discharge_curve;
    if (!curve.empty() && t <= curve.back().first) {
      row_error(row, "time_s must increase within cycle " + std::to_string(cyc) + " " + phase);
    }
    curve.emplace_back(t, v);

    if (phase == "charge") {
      if (!fields[4].empty()) row_error(row, "capacity_ah must be empty on charge rows");
    } else {
      double q = parse_double_field(fields[4], row, "capacity_ah");
      if (!(q > 0.0)) row_error(row, "capacity_ah must be positive");
      if (cyc_rec.discharge_curve.size() == 1) {
        cyc_rec.discharge_capacity = q;
      } else if (q != cyc_rec.discharge_capacity) {
        row_error(row, "capacity_ah differs within cycle " + std::to_string(cyc));
      }
    }
  }
  if (!have_cycle) throw DataError("no cycle rows");
  check_cycle_complete(battery.cycles.back());
  return battery;
}

BatteryHistory parse_battery_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return parse_battery_csv(in, std::filesystem::path(path).stem().string());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_battery_csv(const BatteryHistory& battery, std::ostream& out) {
  out << kCsvHeader << "\n";
  for (const CycleRecord& c : battery.cycles) {
    for (const auto& [t, v] : c.charge_curve) {
      out << c.cycle_index << ",charge," << fmt_g(t) << "," << fmt_g(v) << ",\n";
    }
    for (const auto& [t, v] : c.discharge_curve) {
      out << c.cycle_index << ",discharge," << fmt_g(t) << "," << fmt_g(v) << ","
          << fmt_g(c.discharge_capacity) << "\n";
    }
  }
}

void write_battery_csv_file(const BatteryHistory& battery, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_battery_csv(battery, out);
  if (!out) throw DataError("write failed for " + path);
}

std::vector<BatteryHistory> load_fleet(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir + " is not a directory");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      paths.push_back(entry.path());
    }
  }
  if (paths.empty()) throw DataError("no .csv files in " + dir);
  std::sort(paths.begin(), paths.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<BatteryHistory> fleet;
  fleet.reserve(paths.size());
  for (const auto& p : paths) fleet.push_back(parse_battery_csv_file(p.string()));
  return fleet;
}

Vec resample_linear(const std::vector<std::pair<double, double>>& curve, double window_s,
                    std::size_t n_points) {
  if (n_points < 2) throw std::invalid_argument("resample: need at least 2 output points");
  if (curve.size() < 2) throw std::invalid_argument("resample: need at least 2 input samples");
  if (!(window_s > 0.0)) throw std::invalid_argument("resample: window must be positive");

  Vec out(n_points);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    double t = window_s * static_cast<double>(i) / static_cast<double>(n_points - 1);
    if (t <= curve.front().first) {
      out[i] = curve.front().second;
    } else if (t >= curve.back().first) {
      out[i] = curve.back().second;
    } else {
      while (curve[k + 1].first < t) ++k;
      double t0 = curve[k].first, t1 = curve[k + 1].first;
      double u = (t - t0) / (t1 - t0);
      out[i] = curve[k].second + u * (curve[k + 1].second - curve[k].second);
    }
  }
  return out;
}

Vec normalize_voltage(const NormProfile& profile, const Vec& volts, Phase phase) {
  const VoltageRule& rule = (phase == Phase::Charge) ? profile.charge_rule
                                                     : profile.discharge_rule;
  Vec out(volts.size());
  for (std::size_t i = 0; i < volts.size(); ++i) out[i] = rule.apply(volts[i]);
  return out;
}

double normalize_capacity(const NormProfile& profile, double q) {
  if (!profile.capacity_minmax) return q;
  auto [lo, hi] = *profile.capacity_minmax;
  return (q - lo) / (hi - lo);
}

double denormalize_capacity(const NormProfile& profile, double q_norm) {
  if (!profile.capacity_minmax) return q_norm;
  auto [lo, hi] = *profile.capacity_minmax;
  return lo + q_norm * (hi - lo);
}

std::vector<MovingFrame> build_frames(const BatteryHistory& battery, const DdnConfig& cfg,
                                      const NormProfile& profile, const FrameOptions& opts) {
  cfg.validate();
  const std::size_t J = cfg.feature_count();
  if (J > 3) {
    throw std::invalid_argument(
        "build_frames: feature layout supports capacity, charge voltage, discharge voltage");
  }
  if (cfg.features[0].input_len != 1) {
    throw std::invalid_argument("build_frames: capacity feature must have input_len 1");
  }

  const std::size_t N = cfg.history_len;
  const std::size_t first = opts.exclude_reference_from_history ? 1 : 0;
  const std::size_t C = battery.cycles.size();
  if (C < first + N + 1) {
    throw DataError("battery " + battery.battery_id + ": " + std::to_string(C) +
                    " cycles, need at least " + std::to_string(first + N + 1) +
                    " for history length " + std::to_string(N));
  }

  const double q0 = battery.cycles[0].discharge_capacity;
  auto norm_cap = [&](double q) {
    return normalize_capacity(profile, opts.soh_mode ? q / q0 : q);
  };

  std::size_t volt_out_of_band = 0;
  auto count_band = [&](const Vec& v) {
    for (double x : v) {
      if (x < 0.0 || x > 1.05) ++volt_out_of_band;
    }
  };

  std::vector<std::vector<Vec>> feats(C);
  for (std::size_t c = 0; c < C; ++c) {
    const CycleRecord& rec = battery.cycles[c];
    feats[c].resize(J);
    feats[c][0] = Vec{norm_cap(rec.discharge_capacity)};
    if (J >= 2) {
      if (rec.charge_curve.empty()) {
        throw DataError("battery " + battery.battery_id + " cycle " + std::to_string(c) +
                        ": charge curve required but empty");
      }
      Vec raw = resample_linear(rec.charge_curve, profile.resample_window_s,
                                cfg.features[1].input_len);
      feats[c][1] = normalize_voltage(profile, raw, Phase::Charge);
      count_band(feats[c][1]);
    }
    if (J >= 3) {
      Vec raw = resample_linear(rec.discharge_curve, profile.resample_window_s,
                                cfg.features[2].input_len);
      feats[c][2] = normalize_voltage(profile, raw, Phase::Discharge);
      count_band(feats[c][2]);
    }
  }
  if (volt_out_of_band > 0) {
    std::clog << "warning: battery " << battery.battery_id << ": " << volt_out_of_band
              << " normalized voltage samples outside [0, 1.05]\n";
  }

  std::vector<MovingFrame> frames;
  frames.reserve(C - N - first);
  std::size_t targets_out_of_band = 0;
  for (std::size_t t = first; t + N < C; ++t) {
    MovingFrame f;
    f.battery_id = battery.battery_id;
    f.start_cycle = t;
    f.reference = feats[0];
    f.history.assign(feats.begin() + t, feats.begin() + t + N);
    f.target_cycle = t + N;
    f.target = norm_cap(battery.cycles[t + N].discharge_capacity);
    if (f.target < -0.5 || f.target > 1.5) ++targets_out_of_band;
    frames.push_back(std::move(f));
  }
  if (targets_out_of_band > 0) {
    std::clog << "warning: battery " << battery.battery_id << ": " << targets_out_of_band
              << " normalized targets outside [-0.5, 1.5]\n";
  }
  return frames;
}

FleetSplit split_fleet(std::size_t battery_count, std::array<double, 3> ratios,
                       std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split_fleet: ratios must sum to 1");
  }
  for (double r : ratios) {
    if (r < 0.0) throw std::invalid_argument("split_fleet: negative ratio");
  }
  if (battery_count == 0) throw DataError("split_fleet: empty fleet");
  if (battery_count < 3 && ratios[0] > 0.0 && ratios[1] > 0.0 && ratios[2] > 0.0) {
    throw DataError("split_fleet: need at least 3 batteries for a three-way split");
  }

  std::vector<std::size_t> order(battery_count);
  for (std::size_t i = 0; i < battery_count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::size_t n_train = static_cast<std::size_t>(ratios[0] * static_cast<double>(battery_count));
  std::size_t n_val = static_cast<std::size_t>(ratios[1] * static_cast<double>(battery_count));

  FleetSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

}  // namespace ddn
