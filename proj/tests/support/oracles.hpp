#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

// exp(x_k) / sum_i exp(x_i) in long double, no max shift.
inline long double softmax_prob(std::span<const double> logits, int k) {
  long double den = 0.0L;
  for (double x : logits) den += std::exp(static_cast<long double>(x));
  return std::exp(static_cast<long double>(logits[static_cast<std::size_t>(k)])) / den;
}

// -(1/L) log prod_t p(target_t) with the product formed explicitly.
inline long double backbone_nll(const std::vector<std::vector<double>>& rows, const std::vector<int>& targets) {
  long double prod = 1.0L;
  for (std::size_t t = 0; t < rows.size(); ++t) prod *= softmax_prob(rows[t], targets[t]);
  return -std::log(prod) / static_cast<long double>(rows.size());
}

// logits[t][j] is the row for refinement level j+1 of frame t. The joint
// probability of every frame is the product of its per-level conditionals.
inline long double decoder_nll(const std::vector<std::vector<std::vector<double>>>& logits,
                               const std::vector<std::vector<int>>& targets) {
  long double prod = 1.0L;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    long double frame = 1.0L;
    for (std::size_t j = 0; j < logits[t].size(); ++j) frame *= softmax_prob(logits[t][j], targets[t][j]);
    prod *= frame;
  }
  return -std::log(prod) / static_cast<long double>(logits.size());
}

// Index of the closest row by a full distance scan; earliest index on ties.
// `skip` excludes one index (the reserved stop code on level 0).
inline int nearest_row(const std::vector<std::vector<double>>& rows, std::span<const double> x, int skip = -1) {
  int best = -1;
  long double best_d = std::numeric_limits<long double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(i) == skip) continue;
    long double d = 0.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const long double diff = static_cast<long double>(x[k]) - rows[i][k];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Central difference of f along coordinate `x` (restored afterwards).
inline double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

// One-sided sign test: P[X >= wins] for X ~ Binomial(n, 1/2).
inline double sign_test_p(std::size_t wins, std::size_t n) {
  long double p = 0.0L;
  for (std::size_t k = wins; k <= n; ++k) {
    long double c = 1.0L;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    p += c;
  }
  return static_cast<double>(p / std::pow(2.0L, static_cast<long double>(n)));
}

}  // namespace oracle
