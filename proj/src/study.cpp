#include "ddn/study.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddn/rng.hpp"

namespace ddn {

std::vector<SizeStudyRow> size_study(const std::vector<BatteryHistory>& fleet,
                                     const std::vector<std::size_t>& sizes,
                                     const DdnConfig& cfg, const TrainConfig& tcfg,
                                     const NormProfile& profile, const FrameOptions& fopts,
                                     double test_fraction) {
  if (sizes.empty()) throw std::invalid_argument("size_study: no sizes given");
  if (!(test_fraction > 0.0) || test_fraction >= 1.0) {
    throw std::invalid_argument("size_study: test fraction must lie in (0, 1)");
  }
  const std::size_t B = fleet.size();
  std::size_t n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(test_fraction * static_cast<double>(B)));
  if (n_test >= B) throw std::invalid_argument("size_study: fleet too small for a test split");
  const std::size_t pool = B - n_test;
  for (std::size_t s : sizes) {
    if (s == 0 || s > pool) {
      throw std::invalid_argument("size_study: size " + std::to_string(s) +
                                  " outside 1.." + std::to_string(pool));
    }
  }

  std::vector<std::size_t> order(B);
  for (std::size_t i = 0; i < B; ++i) order[i] = i;
  Rng rng(tcfg.rng_seed);
  rng.shuffle(order);

  std::vector<MovingFrame> test_frames;
  for (std::size_t i = pool; i < B; ++i) {
    auto frames = build_frames(fleet[order[i]], cfg, profile, fopts);
    test_frames.insert(test_frames.end(), frames.begin(), frames.end());
  }

  TrainConfig run_cfg = tcfg;
  run_cfg.early_stopping = false;

  std::vector<SizeStudyRow> rows;
  rows.reserve(sizes.size());
  for (std::size_t s : sizes) {
    std::vector<MovingFrame> train_frames;
    for (std::size_t i = 0; i < s; ++i) {
      auto frames = build_frames(fleet[order[i]], cfg, profile, fopts);
      train_frames.insert(train_frames.end(), frames.begin(), frames.end());
    }
    auto [params, log] = train(train_frames, {}, cfg, run_cfg);
    Metrics m = evaluate(params, test_frames, cfg, profile);
    rows.push_back({s, m.rmse});
  }
  return rows;
}

}  // namespace ddn
