#include "ddn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ddn/errors.hpp"

namespace ddn {
namespace {

const char* kMagic = "ddn-checkpoint";
const char* kVersion = "v1";

std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

[[noreturn]] void fail(const std::string& msg) { throw DataError("checkpoint: " + msg); }

std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) fail(std::string("unexpected end of file, expected ") + what);
  return tok;
}

void expect_keyword(std::istream& in, const std::string& keyword) {
  std::string tok = next_token(in, keyword.c_str());
  if (tok != keyword) fail("expected '" + keyword + "', got '" + tok + "'");
}

double read_double(std::istream& in, const char* what) {
  std::string tok = next_token(in, what);
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) {
    fail(std::string("bad ") + what + " value '" + tok + "'");
  }
  return v;
}

std::size_t read_size(std::istream& in, const char* what) {
  std::string tok = next_token(in, what);
  char* end = nullptr;
  unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || tok.empty()) {
    fail(std::string("bad ") + what + " value '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

bool read_flag(std::istream& in, const char* what) {
  std::string tok = next_token(in, what);
  if (tok == "0") return false;
  if (tok == "1") return true;
  fail(std::string("bad ") + what + " flag '" + tok + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const DdnConfig& cfg = ckpt.config;
  out << kMagic << " " << kVersion << "\n";
  out << "features " << cfg.features.size() << "\n";
  for (const FeatureSpec& f : cfg.features) {
    out << "feature " << f.input_len << " " << f.embed_dim << "\n";
  }
  out << "history_len " << cfg.history_len << "\n";
  out << "head_hidden " << cfg.head_hidden << "\n";
  out << "attn_hidden " << cfg.attn_hidden << "\n";
  out << "pooling " << (cfg.pooling == Pooling::Attention ? "attention" : "mean") << "\n";
  out << "head_activation "
      << (cfg.head_activation == HeadActivation::Relu ? "relu" : "none") << "\n";

  const NormProfile& prof = ckpt.profile;
  out << "profile_name " << prof.name << "\n";
  out << "charge_rule " << hex_double(prof.charge_rule.offset) << " "
      << hex_double(prof.charge_rule.scale) << " " << (prof.charge_rule.flipped ? 1 : 0)
      << "\n";
  out << "discharge_rule " << hex_double(prof.discharge_rule.offset) << " "
      << hex_double(prof.discharge_rule.scale) << " " << (prof.discharge_rule.flipped ? 1 : 0)
      << "\n";
  if (prof.capacity_minmax) {
    out << "capacity_minmax " << hex_double(prof.capacity_minmax->first) << " "
        << hex_double(prof.capacity_minmax->second) << "\n";
  } else {
    out << "capacity_minmax none\n";
  }
  out << "window_s " << hex_double(prof.resample_window_s) << "\n";
  out << "default_history " << prof.default_history << "\n";

  out << "soh_mode " << (ckpt.frame_options.soh_mode ? 1 : 0) << "\n";
  out << "exclude_reference " << (ckpt.frame_options.exclude_reference_from_history ? 1 : 0)
      << "\n";

  auto views = ckpt.params.tensors();
  out << "tensors " << views.size() << "\n";
  for (const ConstTensorView& t : views) {
    out << "tensor " << t.name << " " << t.size << "\n";
    for (std::size_t i = 0; i < t.size; ++i) out << hex_double(t.data[i]) << "\n";
  }
  out << "end\n";
}

void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_checkpoint(ckpt, out);
  if (!out) throw DataError("write failed for " + path);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string magic = next_token(in, "header");
  std::string version = next_token(in, "version");
  if (magic != kMagic) fail("not a checkpoint file (bad magic '" + magic + "')");
  if (version != kVersion) fail("unsupported version '" + version + "'");

  Checkpoint ckpt;
  DdnConfig& cfg = ckpt.config;
  expect_keyword(in, "features");
  std::size_t n_features = read_size(in, "feature count");
  cfg.features.resize(n_features);
  for (FeatureSpec& f : cfg.features) {
    expect_keyword(in, "feature");
    f.input_len = read_size(in, "input_len");
    f.embed_dim = read_size(in, "embed_dim");
  }
  expect_keyword(in, "history_len");
  cfg.history_len = read_size(in, "history_len");
  expect_keyword(in, "head_hidden");
  cfg.head_hidden = read_size(in, "head_hidden");
  expect_keyword(in, "attn_hidden");
  cfg.attn_hidden = read_size(in, "attn_hidden");
  expect_keyword(in, "pooling");
  std::string pooling = next_token(in, "pooling mode");
  if (pooling == "attention") {
    cfg.pooling = Pooling::Attention;
  } else if (pooling == "mean") {
    cfg.pooling = Pooling::Mean;
  } else {
    fail("unknown pooling '" + pooling + "'");
  }
  expect_keyword(in, "head_activation");
  std::string act = next_token(in, "head activation");
  if (act == "none") {
    cfg.head_activation = HeadActivation::None;
  } else if (act == "relu") {
    cfg.head_activation = HeadActivation::Relu;
  } else {
    fail("unknown head activation '" + act + "'");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid config: ") + e.what());
  }

  NormProfile& prof = ckpt.profile;
  expect_keyword(in, "profile_name");
  prof.name = next_token(in, "profile name");
  expect_keyword(in, "charge_rule");
  prof.charge_rule.offset = read_double(in, "charge offset");
  prof.charge_rule.scale = read_double(in, "charge scale");
  prof.charge_rule.flipped = read_flag(in, "charge flipped");
  expect_keyword(in, "discharge_rule");
  prof.discharge_rule.offset = read_double(in, "discharge offset");
  prof.discharge_rule.scale = read_double(in, "discharge scale");
  prof.discharge_rule.flipped = read_flag(in, "discharge flipped");
  expect_keyword(in, "capacity_minmax");
  std::string cap = next_token(in, "capacity min or none");
  if (cap != "none") {
    char* end = nullptr;
    double lo = std::strtod(cap.c_str(), &end);
    if (end != cap.c_str() + cap.size()) fail("bad capacity min '" + cap + "'");
    double hi = read_double(in, "capacity max");
    prof.capacity_minmax = {{lo, hi}};
  }
  expect_keyword(in, "window_s");
  prof.resample_window_s = read_double(in, "window");
  expect_keyword(in, "default_history");
  prof.default_history = read_size(in, "default history");
  try {
    prof.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid profile: ") + e.what());
  }

  expect_keyword(in, "soh_mode");
  ckpt.frame_options.soh_mode = read_flag(in, "soh_mode");
  expect_keyword(in, "exclude_reference");
  ckpt.frame_options.exclude_reference_from_history = read_flag(in, "exclude_reference");

  ckpt.params = DdnParams::zeros_like(cfg);
  auto views = ckpt.params.tensors();
  expect_keyword(in, "tensors");
  std::size_t n_tensors = read_size(in, "tensor count");
  if (n_tensors != views.size()) {
    fail("tensor count " + std::to_string(n_tensors) + " does not match config (" +
         std::to_string(views.size()) + ")");
  }
  for (TensorView& t : views) {
    expect_keyword(in, "tensor");
    std::string name = next_token(in, "tensor name");
    if (name != t.name) fail("expected tensor '" + t.name + "', got '" + name + "'");
    std::size_t size = read_size(in, "tensor size");
    if (size != t.size) {
      fail("tensor " + t.name + " has size " + std::to_string(size) + ", config needs " +
           std::to_string(t.size));
    }
    for (std::size_t i = 0; i < size; ++i) t.data[i] = read_double(in, "tensor value");
  }
  expect_keyword(in, "end");
  return ckpt;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  try {
    return load_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace ddn
