#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddn/data.hpp"
#include "ddn/rng.hpp"

namespace ddn {

// Physics-inspired fade model: Q(c) = Q0 * (1 - a*c - b*c^p), R(c) = R0 * (1 + g*c),
// affine open-circuit voltage between v_empty and v_full, terminal voltage
// OCV -/+ I*R on discharge/charge. When late_fade_rate > 0 the linear term
// switches slope at switch_cycle (path-dependent degradation).
struct SynthSpec {
  std::string battery_id = "synth";
  std::size_t cycles = 80;
  std::size_t samples_per_curve = 60;
  double q0_ah = 1.1;
  double fade_rate = 0.0016;      // a, per cycle
  double fade_curvature = 1e-5;   // b, on c^p
  double fade_power = 2.0;        // p
  double late_fade_rate = 0.0;    // replaces fade_rate past switch_cycle when > 0
  std::size_t switch_cycle = 0;
  double current_a = 1.0;         // I
  double internal_r = 0.015;      // R0, ohm
  double r_growth = 0.005;        // g, per cycle
  double ocv_full = 3.15;
  double ocv_empty = 2.4;
  double noise_sd = 0.002;        // volts, on every sample
  std::uint64_t rng_seed = 0;

  double capacity_at(std::size_t cycle) const;
  double resistance_at(std::size_t cycle) const;
  // shared sampling span, 3600 * Q0 / I seconds; soc runs 0..1 across it
  double curve_window_s() const;
  void validate() const;  // throws std::invalid_argument
};

BatteryHistory synth_battery(const SynthSpec& spec);

using SpecSampler = std::function<SynthSpec(Rng&)>;

// Smooth fleet: shared Q0 = 1.1 Ah and I = 1 A, fade parameters drawn so
// end-of-life capacity lands near 0.8 * Q0 over 80 cycles.
SynthSpec sample_default_spec(Rng& rng);
// Piecewise fade: slow early slope, steep late slope, switch cycle varies
// per battery.
SynthSpec sample_path_dependent_spec(Rng& rng);

std::vector<BatteryHistory> synth_fleet(std::size_t n, const SpecSampler& sampler,
                                        std::uint64_t seed,
                                        std::vector<SynthSpec>* specs_out = nullptr);

// One key=value block per battery, blank-line separated.
void write_synth_manifest(const std::vector<SynthSpec>& specs, std::ostream& out);

}  // namespace ddn
