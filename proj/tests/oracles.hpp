#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the solver paths under test beyond the plain Matrix/Vector containers.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sefa/image.hpp"
#include "sefa/matrix.hpp"
#include "sefa/random.hpp"

namespace oracle {

/// AᵀA by the textbook triple loop.
inline sefa::Matrix naive_gram(const sefa::Matrix& a) {
  sefa::Matrix s(a.cols(), a.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) sum += a(r, i) * a(r, j);
      s(i, j) = sum;
    }
  return s;
}

inline std::vector<double> naive_matvec(const sefa::Matrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) y[r] += a(r, c) * x[c];
  return y;
}

struct Pair {
  double value;
  std::vector<double> vector;
};

/// Power iteration with Hotelling deflation. Each pair is iterated until the
/// residual ‖S·v − λ·v‖ drops below `tol`·‖S‖_F.
inline std::vector<Pair> power_iteration(sefa::Matrix s, std::size_t k, double tol = 1e-13,
                                         std::uint64_t seed = 99, std::size_t max_iter = 2000000) {
  const std::size_t n = s.rows();
  double norm_f = 0.0;
  for (double x : s.values()) norm_f += x * x;
  norm_f = std::sqrt(norm_f);

  sefa::Rng rng(seed);
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < k; ++p) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
      const auto sv = naive_matvec(s, v);
      lambda = 0.0;
      for (std::size_t i = 0; i < n; ++i) lambda += v[i] * sv[i];
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) res += (sv[i] - lambda * v[i]) * (sv[i] - lambda * v[i]);
      v = sv;
      if (std::sqrt(res) <= tol * norm_f) break;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s(i, j) -= lambda * v[i] * v[j];
    pairs.push_back({lambda, std::move(v)});
  }
  return pairs;
}

/// Centroid of pixels that differ from the background color, weighted by the
/// L1 color distance.
inline std::pair<double, double> centroid(const sefa::RenderedImage& img) {
  const std::uint8_t* bg = img.at(0, 0);
  double wsum = 0.0, xs = 0.0, ys = 0.0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::uint8_t* p = img.at(x, y);
      const double w = std::abs(p[0] - bg[0]) + std::abs(p[1] - bg[1]) + std::abs(p[2] - bg[2]);
      wsum += w;
      xs += w * (static_cast<double>(x) + 0.5);
      ys += w * (static_cast<double>(y) + 0.5);
    }
  return {xs / wsum, ys / wsum};
}

}  // namespace oracle
