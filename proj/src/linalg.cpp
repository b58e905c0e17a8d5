#include "ddn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ddn {

namespace {

void require_same_len(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch, " +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

}  // namespace

Vec affine(const Mat& w, const Vec& b, const Vec& x) {
  if (w.cols != x.size() || w.rows != b.size()) {
    throw std::invalid_argument("affine: W is " + std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + " but x has length " +
                                std::to_string(x.size()) + " and b has length " +
                                std::to_string(b.size()));
  }
  Vec y(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* row = &w.a[i * w.cols];
    double acc = b[i];
    for (std::size_t k = 0; k < w.cols; ++k) acc += row[k] * x[k];
    y[i] = acc;
  }
  return y;
}

void affine_backward(const Mat& w, const Vec& x, const Vec& grad_y, Mat& grad_w, Vec& grad_b,
                     Vec* grad_x) {
  if (grad_y.size() != w.rows || x.size() != w.cols) {
    throw std::invalid_argument("affine_backward: shape mismatch");
  }
  if (grad_w.rows != w.rows || grad_w.cols != w.cols || grad_b.size() != w.rows) {
    throw std::invalid_argument("affine_backward: gradient buffer shape mismatch");
  }
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double g = grad_y[i];
    grad_b[i] += g;
    double* gw_row = &grad_w.a[i * w.cols];
    for (std::size_t k = 0; k < w.cols; ++k) gw_row[k] += g * x[k];
  }
  if (grad_x != nullptr) {
    if (grad_x->size() != w.cols) throw std::invalid_argument("affine_backward: grad_x length");
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double g = grad_y[i];
      const double* row = &w.a[i * w.cols];
      for (std::size_t k = 0; k < w.cols; ++k) (*grad_x)[k] += g * row[k];
    }
  }
}

Vec relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void relu_backward(const Vec& x, const Vec& grad_y, Vec& grad_x) {
  require_same_len(x, grad_y, "relu_backward");
  require_same_len(x, grad_x, "relu_backward");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) grad_x[i] += grad_y[i];
  }
}

Vec softmax(const Vec& z) {
  if (z.empty()) throw std::invalid_argument("softmax: empty input");
  const double zmax = *std::max_element(z.begin(), z.end());
  Vec a(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    a[i] = std::exp(z[i] - zmax);
    sum += a[i];
  }
  for (double& v : a) v /= sum;
  return a;
}

void softmax_backward(const Vec& alpha, const Vec& grad_alpha, Vec& grad_z) {
  require_same_len(alpha, grad_alpha, "softmax_backward");
  require_same_len(alpha, grad_z, "softmax_backward");
  double inner = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) inner += alpha[i] * grad_alpha[i];
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    grad_z[i] += alpha[i] * (grad_alpha[i] - inner);
  }
}

Vec hadamard(const Vec& a, const Vec& b) {
  require_same_len(a, b, "hadamard");
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

void hadamard_backward(const Vec& a, const Vec& b, const Vec& grad_y, Vec& grad_a, Vec& grad_b) {
  require_same_len(a, b, "hadamard_backward");
  require_same_len(a, grad_y, "hadamard_backward");
  for (std::size_t i = 0; i < a.size(); ++i) {
    grad_a[i] += grad_y[i] * b[i];
    grad_b[i] += grad_y[i] * a[i];
  }
}

Vec concat(const std::vector<Vec>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty part list");
  std::size_t total = 0;
  for (const Vec& p : parts) total += p.size();
  Vec out;
  out.reserve(total);
  for (const Vec& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Vec> split(const Vec& x, const std::vector<std::size_t>& lens) {
  std::size_t total = 0;
  for (std::size_t l : lens) total += l;
  if (total != x.size()) {
    throw std::invalid_argument("split: lengths sum to " + std::to_string(total) +
                                " but input has " + std::to_string(x.size()));
  }
  std::vector<Vec> parts;
  parts.reserve(lens.size());
  std::size_t off = 0;
  for (std::size_t l : lens) {
    parts.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(off),
                       x.begin() + static_cast<std::ptrdiff_t>(off + l));
    off += l;
  }
  return parts;
}

double mse(const Vec& pred, const Vec& target) {
  require_same_len(pred, target, "mse");
  if (pred.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

Vec mse_backward(const Vec& pred, const Vec& target) {
  require_same_len(pred, target, "mse_backward");
  if (pred.empty()) throw std::invalid_argument("mse_backward: empty input");
  const double scale = 2.0 / static_cast<double>(pred.size());
  Vec g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

Vec sub(const Vec& a, const Vec& b) {
  require_same_len(a, b, "sub");
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

double dot(const Vec& a, const Vec& b) {
  require_same_len(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double s, const Vec& x, Vec& y) {
  require_same_len(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

}  // namespace ddn
