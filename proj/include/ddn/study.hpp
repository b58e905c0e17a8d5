#pragma once

#include <cstdint>
#include <vector>

#include "ddn/data.hpp"
#include "ddn/trainer.hpp"

namespace ddn {

struct SizeStudyRow {
  std::size_t train_batteries = 0;
  double test_rmse = 0.0;
};

// Retrains once per requested training-fleet size on nested prefixes of a
// seed-shuffled battery pool and scores each run on one fixed held-out test
// set. Every run reuses tcfg.rng_seed; early stopping is disabled because
// the study reserves no validation batteries.
std::vector<SizeStudyRow> size_study(const std::vector<BatteryHistory>& fleet,
                                     const std::vector<std::size_t>& sizes,
                                     const DdnConfig& cfg, const TrainConfig& tcfg,
                                     const NormProfile& profile,
                                     const FrameOptions& fopts = {},
                                     double test_fraction = 0.15);

}  // namespace ddn
