#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddn/linalg.hpp"

namespace ddn {

enum class Pooling { Mean, Attention };

// The capacity head is two stacked affine layers with no activation between
// them; a ReLU on the hidden layer can be switched on without touching the
// rest of the model.
enum class HeadActivation { None, Relu };

struct FeatureSpec {
  std::size_t input_len = 1;  // raw samples fed to this feature's embedding
  std::size_t embed_dim = 1;
};

struct DdnConfig {
  std::vector<FeatureSpec> features;
  std::size_t history_len = 3;   // cycles per moving frame
  std::size_t head_hidden = 64;  // width of the capacity head's hidden layer
  std::size_t attn_hidden = 128; // width of the attention unit's hidden layer
  Pooling pooling = Pooling::Attention;
  HeadActivation head_activation = HeadActivation::None;

  std::size_t feature_count() const { return features.size(); }
  std::size_t embed_total() const;  // sum of per-feature embedding dims
  void validate() const;            // throws std::invalid_argument
};

struct TensorView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

struct ConstTensorView {
  std::string name;
  const double* data = nullptr;
  std::size_t size = 0;
};

// Every learnable weight and bias: per-feature embeddings, the attention
// unit, and the two-layer capacity head.
struct DdnParams {
  std::vector<Mat> embed_w;
  std::vector<Vec> embed_b;
  Mat attn_hidden_w;  // attn_hidden x 4D
  Vec attn_hidden_b;
  Mat attn_score_w;   // 1 x attn_hidden
  Vec attn_score_b;   // length 1
  Mat head_hidden_w;  // head_hidden x D
  Vec head_hidden_b;
  Mat head_out_w;     // 1 x head_hidden
  Vec head_out_b;     // length 1

  static DdnParams zeros_like(const DdnConfig& cfg);

  // Stable name/order enumeration of all tensors; checkpoint layout, Adam
  // state and finite-difference sweeps all rely on it.
  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;

  std::size_t scalar_count() const;
  void fill(double v);
  void add_scaled(const DdnParams& other, double s);  // this += s * other
  bool all_finite() const;
  void check_shapes(const DdnConfig& cfg) const;  // throws on mismatch
};

// One training unit before embedding: raw per-feature vectors for the
// reference cycle 0 and for history_len consecutive cycles, plus the
// normalized capacity of the cycle being predicted.
struct MovingFrame {
  std::string battery_id;
  std::size_t start_cycle = 0;
  std::vector<Vec> reference;               // per feature
  std::vector<std::vector<Vec>> history;    // history_len x features
  double target = 0.0;                      // normalized
  std::size_t target_cycle = 0;             // start_cycle + history_len
};

// The same frame after the embedding layer.
struct EncodedFrame {
  Vec reference;             // length D
  std::vector<Vec> history;  // history_len embeddings, each length D
  double target = 0.0;
};

// Per-frame attention weights over the history slots; sums to 1.
struct AttentionTrace {
  std::size_t frame_start = 0;
  Vec weights;
};

Vec embed_feature(const Vec& x, std::size_t feature, const DdnConfig& cfg, const DdnParams& p);
Vec embed_cycle(const std::vector<Vec>& feats, const DdnConfig& cfg, const DdnParams& p);
EncodedFrame encode_frame(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p);

// Scores one history embedding against the reference embedding:
// relu(W [e; e0; e-e0; e*e0] + b) through the attention unit's two layers.
double attention_score(const Vec& current, const Vec& reference, const DdnConfig& cfg,
                       const DdnParams& p);

AttentionTrace attention_weights(const Vec& scores, std::size_t frame_start);

// Mean or attention-weighted sum of the history embeddings. When trace is
// non-null and attention pooling is active, the weights are recorded.
Vec pool(const EncodedFrame& frame, Pooling mode, const DdnConfig& cfg, const DdnParams& p,
         AttentionTrace* trace = nullptr);

double predict_capacity(const Vec& pooled, const DdnConfig& cfg, const DdnParams& p);

// Full pipeline from an encoded frame. Trace is filled only in attention mode.
double forward(const EncodedFrame& frame, const DdnConfig& cfg, const DdnParams& p,
               AttentionTrace* trace = nullptr);

// Same, starting from raw features (embedding included).
double forward(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p,
               AttentionTrace* trace = nullptr);

// Mean squared error over the batch.
double batch_loss(const std::vector<EncodedFrame>& frames, const DdnConfig& cfg,
                  const DdnParams& p);
double batch_loss(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                  const DdnParams& p);

// Accumulates d(se_weight * (q_hat - target)^2)/d(params) into grads and
// returns the frame's squared error. Gradients flow through the embedding,
// attention and head layers.
double frame_backward(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p,
                      double se_weight, DdnParams& grads);

// Batch loss plus its exact parameter gradient. Per-frame contributions are
// computed independently (optionally in parallel) and reduced in frame order,
// so the result is bitwise identical for any thread count.
double batch_loss_backward(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                           const DdnParams& p, DdnParams& grads, int threads = 1);

// Mini-batch variant over a subset of frames, selected by index.
double batch_loss_backward(const std::vector<MovingFrame>& frames,
                           const std::vector<std::size_t>& indices, const DdnConfig& cfg,
                           const DdnParams& p, DdnParams& grads, int threads = 1);

}  // namespace ddn
