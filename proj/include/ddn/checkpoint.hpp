#pragma once

#include <iosfwd>
#include <string>

#include "ddn/data.hpp"
#include "ddn/model.hpp"

namespace ddn {

// Everything needed to reload a trained model and run it on new data:
// architecture, normalization profile, frame options, weights.
struct Checkpoint {
  DdnConfig config;
  NormProfile profile;
  FrameOptions frame_options;
  DdnParams params;
};

// Versioned structured text; doubles as hexfloats, so round-trips are
// lossless at 64-bit precision.
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace ddn
