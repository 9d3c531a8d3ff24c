#include "speechrt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace speechrt {

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    const double* wr = w.data.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) out[j] += xi * wr[j];
  }
}

void vec_mat_lanes(std::span<const double> x, const Matrix& w, std::span<double> out) {
  const std::size_t n = w.cols;
  std::vector<double> lanes(4 * n, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double* lane = lanes.data() + (i % 4) * n;
    const double xi = x[i];
    const double* wr = w.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) lane[j] += xi * wr[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] = (lanes[j] + lanes[n + j]) + (lanes[2 * n + j] + lanes[3 * n + j]);
}

double log_sum_exp(std::span<const double> v) noexcept {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::uint64_t checksum(std::span<const Matrix* const> arrays) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Matrix* m : arrays) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m->data.data());
    for (std::size_t i = 0; i < m->data.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace speechrt
