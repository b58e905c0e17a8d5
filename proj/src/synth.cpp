#include "ddn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace ddn {
namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double SynthSpec::capacity_at(std::size_t cycle) const {
  double c = static_cast<double>(cycle);
  double linear;
  if (late_fade_rate > 0.0 && cycle > switch_cycle) {
    linear = fade_rate * static_cast<double>(switch_cycle) +
             late_fade_rate * (c - static_cast<double>(switch_cycle));
  } else {
    linear = fade_rate * c;
  }
  return q0_ah * (1.0 - linear - fade_curvature * std::pow(c, fade_power));
}

double SynthSpec::resistance_at(std::size_t cycle) const {
  return internal_r * (1.0 + r_growth * static_cast<double>(cycle));
}

double SynthSpec::curve_window_s() const { return 3600.0 * q0_ah / current_a; }

void SynthSpec::validate() const {
  if (battery_id.empty()) throw std::invalid_argument("synth: empty battery_id");
  if (cycles < 2) throw std::invalid_argument("synth: need at least 2 cycles");
  if (samples_per_curve < 2) throw std::invalid_argument("synth: need at least 2 samples per curve");
  if (!(q0_ah > 0.0)) throw std::invalid_argument("synth: Q0 must be positive");
  if (!(current_a > 0.0)) throw std::invalid_argument("synth: current must be positive");
  if (!(ocv_full > ocv_empty)) throw std::invalid_argument("synth: v_full must exceed v_empty");
  if (noise_sd < 0.0) throw std::invalid_argument("synth: negative noise sd");
  if (fade_rate < 0.0 || fade_curvature < 0.0 || late_fade_rate < 0.0) {
    throw std::invalid_argument("synth: negative fade parameter");
  }
  for (std::size_t c = 0; c < cycles; ++c) {
    if (!(capacity_at(c) > 0.0)) {
      throw std::invalid_argument("synth: capacity hits zero at cycle " + std::to_string(c));
    }
    if (!(resistance_at(c) > 0.0)) {
      throw std::invalid_argument("synth: resistance hits zero at cycle " + std::to_string(c));
    }
  }
}

BatteryHistory synth_battery(const SynthSpec& spec) {
  spec.validate();
  Rng noise(spec.rng_seed);
  const double window = spec.curve_window_s();
  const std::size_t S = spec.samples_per_curve;

  BatteryHistory battery;
  battery.battery_id = spec.battery_id;
  battery.profile_label = "synthetic";
  battery.cycles.reserve(spec.cycles);
  for (std::size_t c = 0; c < spec.cycles; ++c) {
    const double ir = spec.current_a * spec.resistance_at(c);
    CycleRecord rec;
    rec.cycle_index = c;
    rec.discharge_capacity = spec.capacity_at(c);
    rec.charge_curve.reserve(S);
    rec.discharge_curve.reserve(S);
    for (std::size_t i = 0; i < S; ++i) {
      double t = window * static_cast<double>(i) / static_cast<double>(S - 1);
      double soc = t / window;
      double ocv_charge = spec.ocv_empty + (spec.ocv_full - spec.ocv_empty) * soc;
      double ocv_discharge = spec.ocv_empty + (spec.ocv_full - spec.ocv_empty) * (1.0 - soc);
      rec.charge_curve.emplace_back(t, ocv_charge + ir + noise.gauss(0.0, spec.noise_sd));
      rec.discharge_curve.emplace_back(t, ocv_discharge - ir + noise.gauss(0.0, spec.noise_sd));
    }
    battery.cycles.push_back(std::move(rec));
  }
  return battery;
}

SynthSpec sample_default_spec(Rng& rng) {
  SynthSpec s;
  s.q0_ah = 1.1;
  s.current_a = 1.0;
  s.fade_rate = rng.uniform(0.0012, 0.0020);
  s.fade_curvature = rng.uniform(7e-6, 1.4e-5);
  s.fade_power = 2.0;
  s.internal_r = rng.uniform(0.012, 0.018);
  s.r_growth = rng.uniform(0.004, 0.008);
  s.noise_sd = 0.002;
  return s;
}

SynthSpec sample_path_dependent_spec(Rng& rng) {
  SynthSpec s;
  s.q0_ah = 1.1;
  s.current_a = 1.0;
  s.fade_rate = rng.uniform(0.0004, 0.0009);
  s.late_fade_rate = rng.uniform(0.0025, 0.0038);
  s.switch_cycle = 30 + rng.below(26);  // 30..55
  s.fade_curvature = rng.uniform(3e-6, 8e-6);
  s.fade_power = 2.0;
  s.internal_r = rng.uniform(0.012, 0.018);
  s.r_growth = rng.uniform(0.004, 0.008);
  s.noise_sd = 0.002;
  return s;
}

std::vector<BatteryHistory> synth_fleet(std::size_t n, const SpecSampler& sampler,
                                        std::uint64_t seed,
                                        std::vector<SynthSpec>* specs_out) {
  if (n < 1) throw std::invalid_argument("synth_fleet: need at least 1 battery");
  std::vector<BatteryHistory> fleet;
  fleet.reserve(n);
  if (specs_out) specs_out->clear();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    SynthSpec spec = sampler(rng);
    char id[32];
    std::snprintf(id, sizeof(id), "b%03zu", i);
    spec.battery_id = id;
    spec.rng_seed = mix_seed(mix_seed(seed, i), 1);
    fleet.push_back(synth_battery(spec));
    if (specs_out) specs_out->push_back(spec);
  }
  return fleet;
}

void write_synth_manifest(const std::vector<SynthSpec>& specs, std::ostream& out) {
  for (const SynthSpec& s : specs) {
    out << "battery_id=" << s.battery_id << "\n"
        << "cycles=" << s.cycles << "\n"
        << "samples_per_curve=" << s.samples_per_curve << "\n"
        << "q0_ah=" << fmt_g(s.q0_ah) << "\n"
        << "fade_rate=" << fmt_g(s.fade_rate) << "\n"
        << "fade_curvature=" << fmt_g(s.fade_curvature) << "\n"
        << "fade_power=" << fmt_g(s.fade_power) << "\n"
        << "late_fade_rate=" << fmt_g(s.late_fade_rate) << "\n"
        << "switch_cycle=" << s.switch_cycle << "\n"
        << "current_a=" << fmt_g(s.current_a) << "\n"
        << "internal_r=" << fmt_g(s.internal_r) << "\n"
        << "r_growth=" << fmt_g(s.r_growth) << "\n"
        << "ocv_full=" << fmt_g(s.ocv_full) << "\n"
        << "ocv_empty=" << fmt_g(s.ocv_empty) << "\n"
        << "noise_sd=" << fmt_g(s.noise_sd) << "\n"
        << "rng_seed=" << s.rng_seed << "\n\n";
  }
}

}  // namespace ddn
