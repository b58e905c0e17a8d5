#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"

#include "ddn/data.hpp"
#include "ddn/errors.hpp"
#include "ddn/rng.hpp"

using namespace ddn;
namespace fs = std::filesystem;

namespace {

const char* kToyCsv =
    "cycle,phase,time_s,voltage_v,capacity_ah\n"
    "0,charge,0,3.0,\n"
    "0,charge,10,3.5,\n"
    "0,discharge,0,4.1,1.8\n"
    "0,discharge,10,3.9,1.8\n"
    "1,charge,0,3.1,\n"
    "1,charge,10,3.6,\n"
    "1,discharge,0,4.0,1.7\n"
    "1,discharge,10,3.8,1.7\n";

BatteryHistory toy_battery() {
  std::istringstream in(kToyCsv);
  return parse_battery_csv(in, "toy");
}

BatteryHistory ramp_battery(std::size_t cycles, double q0 = 1.05, double dq = 0.002) {
  BatteryHistory b;
  b.battery_id = "ramp";
  for (std::size_t c = 0; c < cycles; ++c) {
    CycleRecord rec;
    rec.cycle_index = c;
    rec.discharge_capacity = q0 - dq * static_cast<double>(c);
    for (int i = 0; i < 5; ++i) {
      double t = 100.0 * i;
      rec.charge_curve.emplace_back(t, 3.0 + 0.1 * i);
      rec.discharge_curve.emplace_back(t, 3.1 - 0.1 * i);
    }
    b.cycles.push_back(rec);
  }
  return b;
}

DdnConfig small_config(std::size_t features = 3, std::size_t history = 3) {
  DdnConfig cfg;
  cfg.features = {{1, 2}};
  if (features >= 2) cfg.features.push_back({4, 2});
  if (features >= 3) cfg.features.push_back({4, 2});
  cfg.history_len = history;
  cfg.head_hidden = 2;
  cfg.attn_hidden = 2;
  return cfg;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ddn_data_test_" + std::to_string(Rng(std::random_device{}()).below(1u << 30)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("toy csv parses into two cycles") {
  BatteryHistory b = toy_battery();
  CHECK(b.battery_id == "toy");
  REQUIRE(b.cycles.size() == 2);
  CHECK(b.cycles[0].charge_curve.size() == 2);
  CHECK(b.cycles[0].discharge_curve.size() == 2);
  CHECK(b.cycles[0].discharge_capacity == 1.8);
  CHECK(b.cycles[1].discharge_capacity == 1.7);
  CHECK(b.cycles[1].discharge_curve[1] == std::pair<double, double>{10.0, 3.8});
}

TEST_CASE("csv write/parse round-trip is identity") {
  Rng rng(17);
  BatteryHistory b;
  b.battery_id = "rt";
  for (std::size_t c = 0; c < 4; ++c) {
    CycleRecord rec;
    rec.cycle_index = c;
    rec.discharge_capacity = rng.uniform(0.5, 2.0);
    double t = 0;
    for (int i = 0; i < 6; ++i) {
      t += rng.uniform(0.1, 50.0);
      rec.charge_curve.emplace_back(t, rng.uniform(2.0, 4.2));
    }
    t = 0;
    for (int i = 0; i < 5; ++i) {
      t += rng.uniform(0.1, 50.0);
      rec.discharge_curve.emplace_back(t, rng.uniform(2.0, 4.2));
    }
    b.cycles.push_back(rec);
  }

  std::ostringstream out;
  write_battery_csv(b, out);
  std::istringstream in(out.str());
  BatteryHistory back = parse_battery_csv(in, "rt");

  REQUIRE(back.cycles.size() == b.cycles.size());
  for (std::size_t c = 0; c < b.cycles.size(); ++c) {
    CHECK(back.cycles[c].discharge_capacity == b.cycles[c].discharge_capacity);
    CHECK(back.cycles[c].charge_curve == b.cycles[c].charge_curve);
    CHECK(back.cycles[c].discharge_curve == b.cycles[c].discharge_curve);
  }
}

TEST_CASE("csv errors carry row numbers") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_battery_csv(in, "x");
  };
  const std::string header = "cycle,phase,time_s,voltage_v,capacity_ah\n";

  CHECK_THROWS_WITH_AS(parse("bad,header\n"), doctest::Contains("header"), DataError);

  // decreasing time inside a curve, error names row 4
  CHECK_THROWS_WITH_AS(parse(header +
                             "0,discharge,0,4.0,1.5\n"
                             "0,discharge,10,3.9,1.5\n"
                             "0,discharge,5,3.8,1.5\n"),
                       doctest::Contains("row 4"), DataError);

  // cycles must start at 0 and stay contiguous
  CHECK_THROWS_WITH_AS(parse(header + "1,discharge,0,4.0,1.5\n"),
                       doctest::Contains("first cycle"), DataError);
  CHECK_THROWS_WITH_AS(parse(header +
                             "0,discharge,0,4.0,1.5\n"
                             "0,discharge,10,3.9,1.5\n"
                             "2,discharge,0,3.9,1.4\n"),
                       doctest::Contains("contiguous"), DataError);

  CHECK_THROWS_WITH_AS(parse(header + "0,charge,0,3.0,1.5\n"),
                       doctest::Contains("charge rows"), DataError);
  CHECK_THROWS_WITH_AS(parse(header + "0,discharge,0,4.0,\n"),
                       doctest::Contains("capacity_ah"), DataError);
  CHECK_THROWS_WITH_AS(parse(header +
                             "0,discharge,0,4.0,1.5\n"
                             "0,discharge,10,3.9,1.6\n"),
                       doctest::Contains("differs"), DataError);
  CHECK_THROWS_WITH_AS(parse(header + "0,discharge,0,4.0,-1\n"),
                       doctest::Contains("positive"), DataError);
  CHECK_THROWS_WITH_AS(parse(header + "0,flying,0,4.0,\n"), doctest::Contains("phase"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse(header + "0,discharge,0,4.0,1.5\n"),
                       doctest::Contains("fewer than 2"), DataError);
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse(header), DataError);
}

TEST_CASE("impedance rows are tolerated and ignored") {
  std::istringstream in(
      "cycle,phase,time_s,voltage_v,capacity_ah\n"
      "0,impedance,0,0.0,\n"
      "0,charge,0,3.0,\n"
      "0,charge,10,3.5,\n"
      "0,discharge,0,4.1,1.8\n"
      "0,impedance,5,0.0,\n"
      "0,discharge,10,3.9,1.8\n");
  BatteryHistory b = parse_battery_csv(in, "imp");
  REQUIRE(b.cycles.size() == 1);
  CHECK(b.cycles[0].charge_curve.size() == 2);
  CHECK(b.cycles[0].discharge_curve.size() == 2);
}

TEST_CASE("resample interpolates linearly on the window grid") {
  std::vector<std::pair<double, double>> line = {{0, 0}, {2, 2}};
  CHECK(resample_linear(line, 2.0, 3) == Vec{0, 1, 2});

  std::vector<std::pair<double, double>> flat = {{0, 5}, {100, 5}};
  for (double v : resample_linear(flat, 80.0, 7)) CHECK(v == 5.0);
}

TEST_CASE("resample reproduces knots of a piecewise-linear curve") {
  // knots at t = 0, 10, 20, 30 and a grid that lands exactly on them
  std::vector<std::pair<double, double>> curve = {{0, 1}, {10, 3}, {20, 2}, {30, 7}};
  Vec out = resample_linear(curve, 30.0, 4);
  CHECK(out == Vec{1, 3, 2, 7});

  // resampling an already-uniform curve on its own grid is the identity
  Vec again = resample_linear({{0, 1}, {10, 3}, {20, 2}, {30, 7}}, 30.0, 4);
  CHECK(again == out);
}

TEST_CASE("resample holds boundary values outside the observed span") {
  std::vector<std::pair<double, double>> curve = {{10, 1}, {20, 3}};
  Vec out = resample_linear(curve, 40.0, 5);  // grid: 0, 10, 20, 30, 40
  CHECK(out == Vec{1, 1, 3, 3, 3});
}

TEST_CASE("resample rejects degenerate input") {
  std::vector<std::pair<double, double>> one = {{0, 1}};
  CHECK_THROWS_AS(resample_linear(one, 10.0, 4), std::invalid_argument);
  std::vector<std::pair<double, double>> two = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(resample_linear(two, 10.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(resample_linear(two, 0.0, 4), std::invalid_argument);
}

TEST_CASE("voltage normalization rules per profile") {
  NormProfile nasa = NormProfile::builtin("nasa1");
  CHECK(normalize_voltage(nasa, {4.2}, Phase::Discharge)[0] == 0.0);
  CHECK(normalize_voltage(nasa, {2.1}, Phase::Discharge)[0] == 0.5);
  CHECK(normalize_voltage(nasa, {4.2}, Phase::Charge)[0] == 1.0);
  CHECK(normalize_voltage(nasa, {0.0}, Phase::Charge)[0] == 0.0);

  NormProfile mit = NormProfile::builtin("mit");
  CHECK(normalize_voltage(mit, {3.6}, Phase::Charge)[0] == 0.0);
  CHECK(normalize_voltage(mit, {3.2}, Phase::Discharge)[0] == 0.0);
  CHECK(normalize_voltage(mit, {0.0}, Phase::Discharge)[0] == 1.0);

  NormProfile ox = NormProfile::builtin("oxford");
  CHECK(normalize_voltage(ox, {4.2}, Phase::Discharge)[0] == 1.0);
  CHECK(normalize_voltage(ox, {2.7}, Phase::Charge)[0] == 0.0);

  CHECK_THROWS_AS(NormProfile::builtin("mars"), std::invalid_argument);
}

TEST_CASE("capacity normalization and its inverse") {
  NormProfile mit = NormProfile::builtin("mit");
  CHECK(normalize_capacity(mit, 1.1) == 1.0);
  CHECK(normalize_capacity(mit, 0.8) == 0.0);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    double q = rng.uniform(0.7, 1.2);
    CHECK(denormalize_capacity(mit, normalize_capacity(mit, q)) ==
          doctest::Approx(q).epsilon(1e-14));
  }

  NormProfile nasa2 = NormProfile::builtin("nasa2");
  CHECK(!nasa2.capacity_minmax.has_value());
  CHECK(normalize_capacity(nasa2, 1.7) == 1.7);
  CHECK(denormalize_capacity(nasa2, 1.7) == 1.7);
}

TEST_CASE("profiles load from key=value files") {
  TempDir tmp;
  fs::path file = tmp.path / "custom.profile";
  {
    std::ofstream out(file);
    out << "# custom chemistry\n"
           "name=lab\n"
           "charge_offset=0.5\n"
           "charge_scale=3.0\n"
           "charge_flipped=0\n"
           "discharge_offset=4.0\n"
           "discharge_scale=2.0\n"
           "discharge_flipped=1\n"
           "capacity_min=0.9\n"
           "capacity_max=1.9\n"
           "window_s=600\n"
           "history_n=5\n";
  }
  NormProfile p = NormProfile::from_file(file.string());
  CHECK(p.name == "lab");
  CHECK(p.charge_rule.apply(3.5) == 1.0);
  CHECK(p.discharge_rule.apply(3.0) == 0.5);
  REQUIRE(p.capacity_minmax.has_value());
  CHECK(p.capacity_minmax->first == 0.9);
  CHECK(p.resample_window_s == 600.0);
  CHECK(p.default_history == 5);

  fs::path bad = tmp.path / "bad.profile";
  {
    std::ofstream out(bad);
    out << "capacity_min=1.0\n";
  }
  CHECK_THROWS_WITH_AS(NormProfile::from_file(bad.string()), doctest::Contains("together"),
                       DataError);
  {
    std::ofstream out(bad);
    out << "mystery_key=1\n";
  }
  CHECK_THROWS_WITH_AS(NormProfile::from_file(bad.string()), doctest::Contains("unknown"),
                       DataError);
  CHECK_THROWS_AS(NormProfile::from_file((tmp.path / "absent").string()), DataError);
}

TEST_CASE("frames enumerate sliding windows with a fixed reference") {
  BatteryHistory b = ramp_battery(10);
  DdnConfig cfg = small_config(3, 3);
  NormProfile profile = NormProfile::builtin("mit");
  profile.resample_window_s = 400.0;

  auto frames = build_frames(b, cfg, profile);
  REQUIRE(frames.size() == 7);  // C - N
  CHECK(frames.front().start_cycle == 0);
  CHECK(frames.front().target_cycle == 3);
  CHECK(frames.back().target_cycle == 9);
  for (const MovingFrame& f : frames) {
    REQUIRE(f.history.size() == 3);
    REQUIRE(f.reference.size() == 3);
    CHECK(f.reference == frames.front().reference);  // always cycle 0
    CHECK(f.target ==
          normalize_capacity(profile, b.cycles[f.target_cycle].discharge_capacity));
    for (std::size_t n = 0; n < 3; ++n) {
      CHECK(f.history[n][0][0] ==
            normalize_capacity(profile, b.cycles[f.start_cycle + n].discharge_capacity));
      CHECK(f.history[n][1].size() == cfg.features[1].input_len);
      CHECK(f.history[n][2].size() == cfg.features[2].input_len);
    }
  }

  // boundary: exactly one frame
  auto single = build_frames(ramp_battery(4), cfg, profile);
  CHECK(single.size() == 1);
  CHECK_THROWS_AS(build_frames(ramp_battery(3), cfg, profile), DataError);
}

TEST_CASE("frame options shift the window start and switch targets to SOH") {
  BatteryHistory b = ramp_battery(10);
  DdnConfig cfg = small_config(1, 3);
  NormProfile passthrough = NormProfile::builtin("nasa2");

  FrameOptions opts;
  opts.exclude_reference_from_history = true;
  auto frames = build_frames(b, cfg, passthrough, opts);
  REQUIRE(frames.size() == 6);
  CHECK(frames.front().start_cycle == 1);

  FrameOptions soh;
  soh.soh_mode = true;
  auto soh_frames = build_frames(b, cfg, passthrough, soh);
  const double q0 = b.cycles[0].discharge_capacity;
  CHECK(soh_frames.front().target ==
        b.cycles[3].discharge_capacity / q0);
  CHECK(soh_frames.front().history[2][0][0] == b.cycles[2].discharge_capacity / q0);
}

TEST_CASE("frames require a charge curve only when a voltage feature needs it") {
  BatteryHistory b = ramp_battery(6);
  for (CycleRecord& c : b.cycles) c.charge_curve.clear();
  NormProfile profile = NormProfile::builtin("mit");

  CHECK_NOTHROW(build_frames(b, small_config(1, 3), profile));
  CHECK_THROWS_WITH_AS(build_frames(b, small_config(2, 3), profile),
                       doctest::Contains("charge curve"), DataError);
}

TEST_CASE("fleet split slices a shuffled order by floor ratios") {
  FleetSplit s = split_fleet(20, {0.75, 0.10, 0.15}, 9);
  CHECK(s.train.size() == 15);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 3);

  std::vector<bool> seen(20, false);
  for (auto part : {&s.train, &s.val, &s.test}) {
    for (std::size_t idx : *part) {
      CHECK(!seen[idx]);
      seen[idx] = true;
    }
  }
  for (bool b : seen) CHECK(b);

  FleetSplit again = split_fleet(20, {0.75, 0.10, 0.15}, 9);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  FleetSplit other = split_fleet(20, {0.75, 0.10, 0.15}, 10);
  CHECK(other.train != s.train);
}

TEST_CASE("fleet split input validation") {
  CHECK_THROWS_AS(split_fleet(20, {0.5, 0.1, 0.1}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_fleet(0, {0.75, 0.10, 0.15}, 1), DataError);
  CHECK_THROWS_AS(split_fleet(2, {0.75, 0.10, 0.15}, 1), DataError);
  CHECK_NOTHROW(split_fleet(2, {0.5, 0.0, 0.5}, 1));
}

TEST_CASE("load_fleet reads every csv in name order") {
  TempDir tmp;
  BatteryHistory b = ramp_battery(4);
  for (const char* name : {"zeta", "alpha", "mid"}) {
    b.battery_id = name;
    write_battery_csv_file(b, (tmp.path / (std::string(name) + ".csv")).string());
  }
  std::ofstream(tmp.path / "notes.txt") << "ignored\n";

  auto fleet = load_fleet(tmp.path.string());
  REQUIRE(fleet.size() == 3);
  CHECK(fleet[0].battery_id == "alpha");
  CHECK(fleet[1].battery_id == "mid");
  CHECK(fleet[2].battery_id == "zeta");

  TempDir empty;
  CHECK_THROWS_AS(load_fleet(empty.path.string()), DataError);
  CHECK_THROWS_AS(load_fleet((empty.path / "nope").string()), DataError);
}
