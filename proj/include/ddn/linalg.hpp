#pragma once

#include <cstddef>
#include <vector>

namespace ddn {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit floats.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::size_t size() const { return a.size(); }
};

// y = W x + b
Vec affine(const Mat& w, const Vec& b, const Vec& x);

// Accumulates gradients of y = W x + b given dL/dy. grad_x may be null when
// the input is a constant (raw sensor features).
void affine_backward(const Mat& w, const Vec& x, const Vec& grad_y, Mat& grad_w, Vec& grad_b,
                     Vec* grad_x);

Vec relu(const Vec& x);

// Subgradient at exactly 0 is fixed to 0. Accumulates into grad_x.
void relu_backward(const Vec& x, const Vec& grad_y, Vec& grad_x);

// Max-shifted for stability.
Vec softmax(const Vec& z);

// grad_z from grad_alpha, where alpha = softmax(z). Accumulates into grad_z.
void softmax_backward(const Vec& alpha, const Vec& grad_alpha, Vec& grad_z);

Vec hadamard(const Vec& a, const Vec& b);
void hadamard_backward(const Vec& a, const Vec& b, const Vec& grad_y, Vec& grad_a, Vec& grad_b);

Vec concat(const std::vector<Vec>& parts);

// Inverse of concat; lens must sum to x.size().
std::vector<Vec> split(const Vec& x, const std::vector<std::size_t>& lens);

double mse(const Vec& pred, const Vec& target);

// d(mse)/d(pred_i) = 2 (pred_i - target_i) / M
Vec mse_backward(const Vec& pred, const Vec& target);

// Elementwise helpers used throughout the model.
Vec sub(const Vec& a, const Vec& b);
double dot(const Vec& a, const Vec& b);
void axpy(double s, const Vec& x, Vec& y);  // y += s * x

}  // namespace ddn
