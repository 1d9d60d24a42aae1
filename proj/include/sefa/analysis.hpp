#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "sefa/error.hpp"
#include "sefa/factorizer.hpp"
#include "sefa/linalg.hpp"
#include "sefa/matrix.hpp"
#include "sefa/random.hpp"
#include "sefa/toy_generator.hpp"

namespace sefa {

inline constexpr double kUnitTolerance = 1e-9;
inline constexpr std::size_t kDefaultRescoreSamples = 2000;
inline constexpr double kDefaultRescoreAlpha = 1.0;

/// z + α·n for a unit direction n.
inline Vector edit_code(const Vector& z, const Vector& n, double alpha) {
  if (z.dim() != n.dim()) {
    throw Error(ErrorCode::DimMismatch, "code of dim " + std::to_string(z.dim()) +
                                            " edited along direction of dim " + std::to_string(n.dim()));
  }
  if (std::abs(n.norm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::NotUnit, "direction has norm " + std::to_string(n.norm()));
  }
  Vector out(z);
  for (std::size_t i = 0; i < out.dim(); ++i) out[i] += alpha * n[i];
  return out;
}

/// Standard-normal latent code drawn from `rng`.
inline Vector sample_code(std::size_t dim, Rng& rng) {
  Vector z(dim);
  for (std::size_t i = 0; i < dim; ++i) z[i] = rng.normal();
  return z;
}

/// The `steps` evenly spaced intensities from alpha_min to alpha_max. For an
/// odd count over a symmetric range the middle value is exactly zero.
inline std::vector<double> sweep_alphas(double alpha_min, double alpha_max, std::size_t steps) {
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "a sweep needs at least 2 steps");
  std::vector<double> alphas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    alphas[i] = alpha_min * (1.0 - t) + alpha_max * t;
  }
  return alphas;
}

inline std::vector<RenderedImage> sweep(const ToyGenerator& gen, const Vector& z, const Vector& n,
                                        double alpha_min, double alpha_max, std::size_t steps) {
  std::vector<RenderedImage> frames;
  for (double alpha : sweep_alphas(alpha_min, alpha_max, steps)) {
    frames.push_back(render(gen, edit_code(z, n, alpha)));
  }
  return frames;
}

// -- re-scoring ---------------------------------------------------------------

/// Mean attribute change per direction when codes move by α along it.
struct RescoreMatrix {
  std::vector<std::string> direction_labels;
  std::vector<std::string> attribute_labels;
  std::vector<std::vector<double>> values;  // [direction][attribute]
  std::size_t sample_count = 0;
  double alpha = 0.0;
};

/// Wraps x into (−period/2, period/2].
inline double wrap_centered(double x, double period) {
  return x - period * std::ceil(x / period - 0.5);
}

inline RescoreMatrix rescore(const ToyGenerator& gen, const DirectionSet& ds, double alpha,
                             std::size_t num_samples, std::uint64_t seed) {
  if (alpha == 0.0) throw Error(ErrorCode::InvalidArgument, "alpha must be non-zero");
  if (num_samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  if (ds.latent_dim != gen.latent_dim()) {
    throw Error(ErrorCode::DimMismatch, "direction set has latent dim " + std::to_string(ds.latent_dim) +
                                            ", generator " + std::to_string(gen.latent_dim()));
  }

  RescoreMatrix out;
  out.alpha = alpha;
  out.sample_count = num_samples;
  for (const char* label : AttributeVector::kLabels) out.attribute_labels.emplace_back(label);
  const std::size_t attrs = out.attribute_labels.size();

  // One stream per sample so results do not depend on evaluation order, and
  // every direction is scored on the same codes.
  std::vector<Vector> codes;
  std::vector<std::array<double, 6>> base;
  codes.reserve(num_samples);
  for (std::size_t s = 0; s < num_samples; ++s) {
    Rng rng = Rng::stream(seed, s);
    codes.push_back(sample_code(gen.latent_dim(), rng));
    base.push_back(attributes(gen, codes.back()).as_array());
  }

  for (std::size_t i = 0; i < ds.k(); ++i) {
    out.direction_labels.push_back("direction_" + std::to_string(i));
    std::vector<double> sums(attrs, 0.0);
    for (std::size_t s = 0; s < num_samples; ++s) {
      const auto moved = attributes(gen, edit_code(codes[s], ds.directions[i], alpha)).as_array();
      for (std::size_t j = 0; j < attrs; ++j) {
        double delta = moved[j] - base[s][j];
        if (j == 2) delta = wrap_centered(delta, std::numbers::pi);  // rotation has period π
        if (j == 4) delta = wrap_centered(delta, 1.0);               // hue is cyclic
        sums[j] += delta;
      }
    }
    for (double& v : sums) v /= static_cast<double>(num_samples);
    out.values.push_back(std::move(sums));
  }
  return out;
}

// -- sampling-based baseline --------------------------------------------------

/// Directions from PCA of sampled projected codes, mapped back to latent space
/// through Aᵀ and normalized. Eigenvalues are the sample variances.
inline DirectionSet pca_baseline(const ToyGenerator& gen, std::size_t num_samples, std::size_t k,
                                 std::uint64_t seed) {
  if (num_samples < k + 1) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(num_samples) + " samples cannot estimate " +
                                              std::to_string(k) + " components (need at least k+1)");
  }
  const std::size_t m = gen.projected_dim();
  if (k == 0 || k > std::min(m, gen.latent_dim())) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds min(m, d)");
  }

  Matrix ys(num_samples, m);
  for (std::size_t s = 0; s < num_samples; ++s) {
    Rng rng = Rng::stream(seed, s);
    const Vector y = project(gen, sample_code(gen.latent_dim(), rng));
    std::copy(y.values().begin(), y.values().end(), ys.row(s).begin());
  }
  std::vector<double> mean(m, 0.0);
  for (std::size_t s = 0; s < num_samples; ++s)
    for (std::size_t j = 0; j < m; ++j) mean[j] += ys(s, j);
  for (double& v : mean) v /= static_cast<double>(num_samples);
  for (std::size_t s = 0; s < num_samples; ++s)
    for (std::size_t j = 0; j < m; ++j) ys(s, j) -= mean[j];

  Matrix cov = gram(ys);
  cov *= 1.0 / static_cast<double>(num_samples - 1);

  DirectionSet ds;
  ds.latent_dim = gen.latent_dim();
  ds.source.method = Method::PcaBaseline;
  for (auto& pair : top_k_eigenpairs(cov, k)) {
    Vector n = gen.a.transpose_times(pair.vector).normalized();
    canonicalize_sign(n);
    ds.directions.push_back(std::move(n));
    ds.eigenvalues.push_back(pair.value);
  }
  return ds;
}

// -- direction comparison -----------------------------------------------------

struct SimilarityReport {
  std::vector<double> abs_cosines;       // per index, in [0, 1]
  std::vector<double> principal_angles;  // radians, ascending, in [0, π/2]
};

namespace detail {

/// Orthonormal basis of span(vectors); numerically dependent vectors are dropped.
inline std::vector<Vector> orthonormal_basis(const std::vector<Vector>& vectors) {
  std::vector<Vector> basis;
  for (const Vector& v : vectors) {
    Vector x(v);
    const double original = x.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : basis) x -= x.dot(q) * q;
    if (original == 0.0 || x.norm() <= 1e-12 * original) continue;
    basis.push_back(x.normalized());
  }
  return basis;
}

/// Singular values of the matrix with the given columns, descending.
inline std::vector<double> singular_values(const std::vector<Vector>& columns) {
  const std::size_t q = columns.size();
  Matrix g(q, q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i; j < q; ++j) g(i, j) = g(j, i) = columns[i].dot(columns[j]);
  std::vector<double> out;
  for (const auto& p : top_k_eigenpairs(g, q)) out.push_back(std::sqrt(std::max(0.0, p.value)));
  return out;
}

}  // namespace detail

/// Principal angles between span(a) and span(b), ascending. Small angles come
/// from sines and large ones from cosines so both ends stay accurate.
inline std::vector<double> principal_angles(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  auto qa = detail::orthonormal_basis(a);
  auto qb = detail::orthonormal_basis(b);
  if (qa.empty() || qb.empty()) return {};
  if (qb.size() > qa.size()) std::swap(qa, qb);

  std::vector<Vector> overlap;   // columns of Qaᵀ·Qb
  std::vector<Vector> residual;  // columns of Qb − Qa·Qaᵀ·Qb
  for (const Vector& y : qb) {
    Vector coeffs(qa.size());
    Vector rest(y);
    for (std::size_t i = 0; i < qa.size(); ++i) {
      coeffs[i] = qa[i].dot(y);
      rest -= coeffs[i] * qa[i];
    }
    overlap.push_back(std::move(coeffs));
    residual.push_back(std::move(rest));
  }
  const auto cosines = detail::singular_values(overlap);
  auto sines = detail::singular_values(residual);
  std::reverse(sines.begin(), sines.end());

  std::vector<double> angles;
  for (std::size_t i = 0; i < qb.size(); ++i) {
    const double s = std::min(1.0, sines[i]);
    const double c = std::min(1.0, cosines[i]);
    angles.push_back(s * s < 0.5 ? std::asin(s) : std::acos(c));
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

inline SimilarityReport direction_similarity(const DirectionSet& d1, const DirectionSet& d2) {
  if (d1.latent_dim != d2.latent_dim) {
    throw Error(ErrorCode::DimMismatch, "direction sets have latent dims " + std::to_string(d1.latent_dim) +
                                            " and " + std::to_string(d2.latent_dim));
  }
  SimilarityReport report;
  const std::size_t common = std::min(d1.k(), d2.k());
  for (std::size_t i = 0; i < common; ++i) {
    const double c = std::abs(d1.directions[i].dot(d2.directions[i])) /
                     (d1.directions[i].norm() * d2.directions[i].norm());
    report.abs_cosines.push_back(std::min(1.0, c));
  }
  report.principal_angles = principal_angles(d1.directions, d2.directions);
  return report;
}

// -- serialization -------------------------------------------------------------

inline std::string format_number(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

inline std::string to_csv(const RescoreMatrix& r) {
  std::string out = "direction";
  for (const auto& label : r.attribute_labels) out += "," + label;
  out += "\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    out += r.direction_labels[i];
    for (double v : r.values[i]) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

inline std::string to_csv(const SimilarityReport& s) {
  std::string out = "direction,abs_cosine,principal_angle\n";
  const std::size_t rows = std::max(s.abs_cosines.size(), s.principal_angles.size());
  for (std::size_t i = 0; i < rows; ++i) {
    out += "direction_" + std::to_string(i) + ",";
    if (i < s.abs_cosines.size()) out += format_number(s.abs_cosines[i]);
    out += ",";
    if (i < s.principal_angles.size()) out += format_number(s.principal_angles[i]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(const RescoreMatrix& r) {
  return {{"directions", r.direction_labels},
          {"attributes", r.attribute_labels},
          {"values", r.values},
          {"sample_count", r.sample_count},
          {"alpha", r.alpha}};
}

inline nlohmann::json to_json(const SimilarityReport& s) {
  return {{"abs_cosines", s.abs_cosines}, {"principal_angles", s.principal_angles}};
}

inline nlohmann::json to_json(const AttributeVector& a) {
  return {{"pos_x", a.pos_x},         {"pos_y", a.pos_y}, {"rotation", a.rotation},
          {"log_scale", a.log_scale}, {"hue", a.hue},     {"brightness", a.brightness}};
}

}  // namespace sefa
