#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace speechrt {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);
bool all_finite(std::span<const double> v) noexcept;

// Controls summation order in batched projections. Incremental steps always use
// sequential accumulation; in `deterministic` mode the batched path does too,
// so cached and uncached passes agree bit for bit.
enum class ArithmeticMode { deterministic, fast };

// out[j] = sum_i x[i] * w(i, j), accumulated in increasing i.
void vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out);
// Same product with four interleaved partial sums.
void vec_mat_lanes(std::span<const double> x, const Matrix& w, std::span<double> out);

// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v) noexcept;

// A named view of one trainable array and its gradient accumulator.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

// FNV-1a over the raw bytes of every array, in order.
std::uint64_t checksum(std::span<const Matrix* const> arrays);

}  // namespace speechrt
