#include "ddn/model.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "ddn/threading.hpp"

namespace ddn {

namespace {

std::vector<std::size_t> embed_dims(const DdnConfig& cfg) {
  std::vector<std::size_t> dims;
  dims.reserve(cfg.features.size());
  for (const FeatureSpec& f : cfg.features) dims.push_back(f.embed_dim);
  return dims;
}

void check_encoded(const EncodedFrame& frame, const DdnConfig& cfg) {
  const std::size_t d = cfg.embed_total();
  if (frame.reference.size() != d) {
    throw std::invalid_argument("forward: reference embedding has length " +
                                std::to_string(frame.reference.size()) + ", expected " +
                                std::to_string(d));
  }
  if (frame.history.size() != cfg.history_len) {
    throw std::invalid_argument("forward: frame has " + std::to_string(frame.history.size()) +
                                " history embeddings, expected " +
                                std::to_string(cfg.history_len));
  }
  for (const Vec& e : frame.history) {
    if (e.size() != d) {
      throw std::invalid_argument("forward: history embedding has length " +
                                  std::to_string(e.size()) + ", expected " + std::to_string(d));
    }
  }
}

// [e; e0; e - e0; e * e0]
Vec score_input(const Vec& e, const Vec& e0) {
  const std::size_t d = e.size();
  Vec w(4 * d);
  for (std::size_t i = 0; i < d; ++i) {
    w[i] = e[i];
    w[d + i] = e0[i];
    w[2 * d + i] = e[i] - e0[i];
    w[3 * d + i] = e[i] * e0[i];
  }
  return w;
}

}  // namespace

std::size_t DdnConfig::embed_total() const {
  std::size_t d = 0;
  for (const FeatureSpec& f : features) d += f.embed_dim;
  return d;
}

void DdnConfig::validate() const {
  if (features.empty()) throw std::invalid_argument("config: no features");
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].input_len == 0 || features[j].embed_dim == 0) {
      throw std::invalid_argument("config: feature " + std::to_string(j) +
                                  " has zero input length or embedding dim");
    }
  }
  if (history_len == 0) throw std::invalid_argument("config: history length must be >= 1");
  if (head_hidden == 0 || attn_hidden == 0) {
    throw std::invalid_argument("config: hidden widths must be >= 1");
  }
}

DdnParams DdnParams::zeros_like(const DdnConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_total();
  DdnParams p;
  p.embed_w.reserve(cfg.features.size());
  p.embed_b.reserve(cfg.features.size());
  for (const FeatureSpec& f : cfg.features) {
    p.embed_w.emplace_back(f.embed_dim, f.input_len);
    p.embed_b.emplace_back(f.embed_dim, 0.0);
  }
  p.attn_hidden_w = Mat(cfg.attn_hidden, 4 * d);
  p.attn_hidden_b = Vec(cfg.attn_hidden, 0.0);
  p.attn_score_w = Mat(1, cfg.attn_hidden);
  p.attn_score_b = Vec(1, 0.0);
  p.head_hidden_w = Mat(cfg.head_hidden, d);
  p.head_hidden_b = Vec(cfg.head_hidden, 0.0);
  p.head_out_w = Mat(1, cfg.head_hidden);
  p.head_out_b = Vec(1, 0.0);
  return p;
}

std::vector<TensorView> DdnParams::tensors() {
  std::vector<TensorView> out;
  out.reserve(embed_w.size() * 2 + 8);
  for (std::size_t j = 0; j < embed_w.size(); ++j) {
    out.push_back({"embed_w" + std::to_string(j), embed_w[j].a.data(), embed_w[j].size()});
    out.push_back({"embed_b" + std::to_string(j), embed_b[j].data(), embed_b[j].size()});
  }
  out.push_back({"attn_hidden_w", attn_hidden_w.a.data(), attn_hidden_w.size()});
  out.push_back({"attn_hidden_b", attn_hidden_b.data(), attn_hidden_b.size()});
  out.push_back({"attn_score_w", attn_score_w.a.data(), attn_score_w.size()});
  out.push_back({"attn_score_b", attn_score_b.data(), attn_score_b.size()});
  out.push_back({"head_hidden_w", head_hidden_w.a.data(), head_hidden_w.size()});
  out.push_back({"head_hidden_b", head_hidden_b.data(), head_hidden_b.size()});
  out.push_back({"head_out_w", head_out_w.a.data(), head_out_w.size()});
  out.push_back({"head_out_b", head_out_b.data(), head_out_b.size()});
  return out;
}

std::vector<ConstTensorView> DdnParams::tensors() const {
  std::vector<TensorView> mut = const_cast<DdnParams*>(this)->tensors();
  std::vector<ConstTensorView> out;
  out.reserve(mut.size());
  for (const TensorView& t : mut) out.push_back({t.name, t.data, t.size});
  return out;
}

std::size_t DdnParams::scalar_count() const {
  std::size_t n = 0;
  for (const ConstTensorView& t : tensors()) n += t.size;
  return n;
}

void DdnParams::fill(double v) {
  for (TensorView& t : tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = v;
  }
}

void DdnParams::add_scaled(const DdnParams& other, double s) {
  std::vector<TensorView> mine = tensors();
  std::vector<ConstTensorView> theirs = other.tensors();
  if (mine.size() != theirs.size()) {
    throw std::invalid_argument("add_scaled: parameter sets differ");
  }
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (mine[k].size != theirs[k].size) {
      throw std::invalid_argument("add_scaled: tensor " + mine[k].name + " shape mismatch");
    }
    for (std::size_t i = 0; i < mine[k].size; ++i) mine[k].data[i] += s * theirs[k].data[i];
  }
}

bool DdnParams::all_finite() const {
  for (const ConstTensorView& t : tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

void DdnParams::check_shapes(const DdnConfig& cfg) const {
  const std::size_t d = cfg.embed_total();
  if (embed_w.size() != cfg.features.size() || embed_b.size() != cfg.features.size()) {
    throw std::invalid_argument("params: embedding count mismatch");
  }
  for (std::size_t j = 0; j < embed_w.size(); ++j) {
    if (embed_w[j].rows != cfg.features[j].embed_dim ||
        embed_w[j].cols != cfg.features[j].input_len ||
        embed_b[j].size() != cfg.features[j].embed_dim) {
      throw std::invalid_argument("params: embedding " + std::to_string(j) + " shape mismatch");
    }
  }
  if (attn_hidden_w.rows != cfg.attn_hidden || attn_hidden_w.cols != 4 * d ||
      attn_hidden_b.size() != cfg.attn_hidden || attn_score_w.rows != 1 ||
      attn_score_w.cols != cfg.attn_hidden || attn_score_b.size() != 1 ||
      head_hidden_w.rows != cfg.head_hidden || head_hidden_w.cols != d ||
      head_hidden_b.size() != cfg.head_hidden || head_out_w.rows != 1 ||
      head_out_w.cols != cfg.head_hidden || head_out_b.size() != 1) {
    throw std::invalid_argument("params: attention or head shape mismatch");
  }
}

Vec embed_feature(const Vec& x, std::size_t feature, const DdnConfig& cfg, const DdnParams& p) {
  if (feature >= cfg.features.size()) {
    throw std::invalid_argument("embed_feature: feature index " + std::to_string(feature) +
                                " out of range (" + std::to_string(cfg.features.size()) + ")");
  }
  if (x.size() != cfg.features[feature].input_len) {
    throw std::invalid_argument("embed_feature: feature " + std::to_string(feature) +
                                " expects length " +
                                std::to_string(cfg.features[feature].input_len) + ", got " +
                                std::to_string(x.size()));
  }
  return affine(p.embed_w[feature], p.embed_b[feature], x);
}

Vec embed_cycle(const std::vector<Vec>& feats, const DdnConfig& cfg, const DdnParams& p) {
  if (feats.size() != cfg.features.size()) {
    throw std::invalid_argument("embed_cycle: got " + std::to_string(feats.size()) +
                                " feature vectors, expected " +
                                std::to_string(cfg.features.size()));
  }
  std::vector<Vec> parts;
  parts.reserve(feats.size());
  for (std::size_t j = 0; j < feats.size(); ++j) parts.push_back(embed_feature(feats[j], j, cfg, p));
  return concat(parts);
}

EncodedFrame encode_frame(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p) {
  if (frame.history.size() != cfg.history_len) {
    throw std::invalid_argument("encode_frame: frame has " + std::to_string(frame.history.size()) +
                                " history cycles, expected " + std::to_string(cfg.history_len));
  }
  EncodedFrame out;
  out.reference = embed_cycle(frame.reference, cfg, p);
  out.history.reserve(frame.history.size());
  for (const std::vector<Vec>& cyc : frame.history) out.history.push_back(embed_cycle(cyc, cfg, p));
  out.target = frame.target;
  return out;
}

double attention_score(const Vec& current, const Vec& reference, const DdnConfig& cfg,
                       const DdnParams& p) {
  if (current.size() != reference.size() || current.size() != cfg.embed_total()) {
    throw std::invalid_argument("attention_score: embedding length mismatch");
  }
  const Vec w = score_input(current, reference);
  const Vec h = relu(affine(p.attn_hidden_w, p.attn_hidden_b, w));
  return affine(p.attn_score_w, p.attn_score_b, h)[0];
}

AttentionTrace attention_weights(const Vec& scores, std::size_t frame_start) {
  AttentionTrace trace;
  trace.frame_start = frame_start;
  trace.weights = softmax(scores);
  return trace;
}

Vec pool(const EncodedFrame& frame, Pooling mode, const DdnConfig& cfg, const DdnParams& p,
         AttentionTrace* trace) {
  check_encoded(frame, cfg);
  const std::size_t n = frame.history.size();
  Vec pooled(cfg.embed_total(), 0.0);
  if (mode == Pooling::Mean) {
    const double w = 1.0 / static_cast<double>(n);
    for (const Vec& e : frame.history) axpy(w, e, pooled);
    return pooled;
  }
  Vec scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = attention_score(frame.history[i], frame.reference, cfg, p);
  }
  AttentionTrace local = attention_weights(scores, 0);
  for (std::size_t i = 0; i < n; ++i) axpy(local.weights[i], frame.history[i], pooled);
  if (trace != nullptr) trace->weights = local.weights;
  return pooled;
}

double predict_capacity(const Vec& pooled, const DdnConfig& cfg, const DdnParams& p) {
  Vec hidden = affine(p.head_hidden_w, p.head_hidden_b, pooled);
  if (cfg.head_activation == HeadActivation::Relu) hidden = relu(hidden);
  return affine(p.head_out_w, p.head_out_b, hidden)[0];
}

double forward(const EncodedFrame& frame, const DdnConfig& cfg, const DdnParams& p,
               AttentionTrace* trace) {
  const Vec pooled = pool(frame, cfg.pooling, cfg, p, cfg.pooling == Pooling::Attention ? trace : nullptr);
  return predict_capacity(pooled, cfg, p);
}

double forward(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p,
               AttentionTrace* trace) {
  const EncodedFrame enc = encode_frame(frame, cfg, p);
  const double q = forward(enc, cfg, p, trace);
  if (trace != nullptr) trace->frame_start = frame.start_cycle;
  return q;
}

double batch_loss(const std::vector<EncodedFrame>& frames, const DdnConfig& cfg,
                  const DdnParams& p) {
  if (frames.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double acc = 0.0;
  for (const EncodedFrame& f : frames) {
    const double d = forward(f, cfg, p) - f.target;
    acc += d * d;
  }
  return acc / static_cast<double>(frames.size());
}

double batch_loss(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                  const DdnParams& p) {
  if (frames.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double acc = 0.0;
  for (const MovingFrame& f : frames) {
    const double d = forward(f, cfg, p) - f.target;
    acc += d * d;
  }
  return acc / static_cast<double>(frames.size());
}

namespace {

// Accumulates embedding-layer gradients for one cycle given d(loss)/d(embedding).
void embed_backward(const std::vector<Vec>& feats, const Vec& grad_embed, const DdnConfig& cfg,
                    const DdnParams& p, DdnParams& grads) {
  const std::vector<Vec> parts = split(grad_embed, embed_dims(cfg));
  for (std::size_t j = 0; j < feats.size(); ++j) {
    affine_backward(p.embed_w[j], feats[j], parts[j], grads.embed_w[j], grads.embed_b[j], nullptr);
  }
}

}  // namespace

double frame_backward(const MovingFrame& frame, const DdnConfig& cfg, const DdnParams& p,
                      double se_weight, DdnParams& grads) {
  const std::size_t n = cfg.history_len;
  const std::size_t d = cfg.embed_total();

  // Forward with cached activations.
  const Vec e0 = embed_cycle(frame.reference, cfg, p);
  std::vector<Vec> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = embed_cycle(frame.history[i], cfg, p);

  std::vector<Vec> score_in(n), pre(n), hid(n);
  Vec scores(n), alpha;
  Vec pooled(d, 0.0);
  if (cfg.pooling == Pooling::Attention) {
    for (std::size_t i = 0; i < n; ++i) {
      score_in[i] = score_input(e[i], e0);
      pre[i] = affine(p.attn_hidden_w, p.attn_hidden_b, score_in[i]);
      hid[i] = relu(pre[i]);
      scores[i] = affine(p.attn_score_w, p.attn_score_b, hid[i])[0];
    }
    alpha = softmax(scores);
    for (std::size_t i = 0; i < n; ++i) axpy(alpha[i], e[i], pooled);
  } else {
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) axpy(w, e[i], pooled);
  }

  const Vec head_pre = affine(p.head_hidden_w, p.head_hidden_b, pooled);
  const Vec head_act = cfg.head_activation == HeadActivation::Relu ? relu(head_pre) : head_pre;
  const double q_hat = affine(p.head_out_w, p.head_out_b, head_act)[0];

  const double err = q_hat - frame.target;

  // Backward.
  const Vec grad_q{2.0 * se_weight * err};
  Vec grad_head_act(cfg.head_hidden, 0.0);
  affine_backward(p.head_out_w, head_act, grad_q, grads.head_out_w, grads.head_out_b,
                  &grad_head_act);
  Vec grad_head_pre;
  if (cfg.head_activation == HeadActivation::Relu) {
    grad_head_pre.assign(cfg.head_hidden, 0.0);
    relu_backward(head_pre, grad_head_act, grad_head_pre);
  } else {
    grad_head_pre = std::move(grad_head_act);
  }
  Vec grad_pooled(d, 0.0);
  affine_backward(p.head_hidden_w, pooled, grad_head_pre, grads.head_hidden_w,
                  grads.head_hidden_b, &grad_pooled);

  std::vector<Vec> grad_e(n, Vec(d, 0.0));
  Vec grad_e0(d, 0.0);

  if (cfg.pooling == Pooling::Attention) {
    Vec grad_alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
      grad_alpha[i] = dot(grad_pooled, e[i]);
      axpy(alpha[i], grad_pooled, grad_e[i]);
    }
    Vec grad_scores(n, 0.0);
    softmax_backward(alpha, grad_alpha, grad_scores);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec grad_z{grad_scores[i]};
      Vec grad_hid(cfg.attn_hidden, 0.0);
      affine_backward(p.attn_score_w, hid[i], grad_z, grads.attn_score_w, grads.attn_score_b,
                      &grad_hid);
      Vec grad_pre(cfg.attn_hidden, 0.0);
      relu_backward(pre[i], grad_hid, grad_pre);
      Vec grad_in(4 * d, 0.0);
      affine_backward(p.attn_hidden_w, score_in[i], grad_pre, grads.attn_hidden_w,
                      grads.attn_hidden_b, &grad_in);
      // score input was [e; e0; e - e0; e * e0]
      for (std::size_t k = 0; k < d; ++k) {
        grad_e[i][k] += grad_in[k] + grad_in[2 * d + k] + grad_in[3 * d + k] * e0[k];
        grad_e0[k] += grad_in[d + k] - grad_in[2 * d + k] + grad_in[3 * d + k] * e[i][k];
      }
    }
  } else {
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) axpy(w, grad_pooled, grad_e[i]);
  }

  for (std::size_t i = 0; i < n; ++i) embed_backward(frame.history[i], grad_e[i], cfg, p, grads);
  embed_backward(frame.reference, grad_e0, cfg, p, grads);

  return err * err;
}

double batch_loss_backward(const std::vector<MovingFrame>& frames,
                           const std::vector<std::size_t>& indices, const DdnConfig& cfg,
                           const DdnParams& p, DdnParams& grads, int threads) {
  if (indices.empty()) throw std::invalid_argument("batch_loss_backward: empty batch");
  for (std::size_t idx : indices) {
    if (idx >= frames.size()) {
      throw std::invalid_argument("batch_loss_backward: frame index " + std::to_string(idx) +
                                  " out of range");
    }
  }
  const double inv_m = 1.0 / static_cast<double>(indices.size());

  std::vector<DdnParams> partial(indices.size(), DdnParams::zeros_like(cfg));
  std::vector<double> se(indices.size(), 0.0);
  parallel_for(indices.size(), threads, [&](std::size_t i) {
    se[i] = frame_backward(frames[indices[i]], cfg, p, inv_m, partial[i]);
  });

  double loss = 0.0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    loss += se[i];
    grads.add_scaled(partial[i], 1.0);
  }
  return loss * inv_m;
}

double batch_loss_backward(const std::vector<MovingFrame>& frames, const DdnConfig& cfg,
                           const DdnParams& p, DdnParams& grads, int threads) {
  std::vector<std::size_t> all(frames.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch_loss_backward(frames, all, cfg, p, grads, threads);
}

}  // namespace ddn
