#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sefa/error.hpp"
#include "sefa/matrix.hpp"

namespace sefa {

struct EigenPair {
  double value = 0.0;
  Vector vector;
  /// ‖S·v − λ·v‖₂ measured after the solve.
  double residual = 0.0;
};

/// Relative residual tolerance every returned pair is certified against:
/// ‖S·v − λ·v‖₂ ≤ kResidualTolerance · ‖S‖_F.
inline constexpr double kResidualTolerance = 1e-8;
inline constexpr double kSymmetryTolerance = 1e-12;

/// AᵀA. Only the upper triangle is accumulated and then mirrored, so the
/// result is exactly symmetric. Each entry is summed over the rows of A in
/// ascending order.
inline Matrix gram(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t d = a.cols();
  Matrix s(d, d);
  constexpr std::size_t kRowBlock = 32;

  for (std::size_t r0 = 0; r0 < m; r0 += kRowBlock) {
    const std::size_t r1 = std::min(m, r0 + kRowBlock);
    std::size_t i = 0;
    // Four output rows at a time so each loaded row of A feeds four updates.
    for (; i + 4 <= d; i += 4) {
      double* s0 = &s(i, 0);
      double* s1 = s0 + d;
      double* s2 = s1 + d;
      double* s3 = s2 + d;
      for (std::size_t r = r0; r < r1; ++r) {
        const double* x = a.row(r).data();
        const double c0 = x[i], c1 = x[i + 1], c2 = x[i + 2], c3 = x[i + 3];
        for (std::size_t j = i; j < d; ++j) {
          const double xj = x[j];
          s0[j] += c0 * xj;
          s1[j] += c1 * xj;
          s2[j] += c2 * xj;
          s3[j] += c3 * xj;
        }
      }
    }
    for (; i < d; ++i) {
      double* si = &s(i, 0);
      for (std::size_t r = r0; r < r1; ++r) {
        const double* x = a.row(r).data();
        const double c = x[i];
        for (std::size_t j = i; j < d; ++j) si[j] += c * x[j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

inline double trace(const Matrix& s) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(s.rows(), s.cols()); ++i) t += s(i, i);
  return t;
}

/// Flips v so that its largest-magnitude component is positive (first index
/// wins among equal magnitudes).
inline void canonicalize_sign(Vector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.dim(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) v *= -1.0;
}

namespace detail {

inline void check_symmetric(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw Error(ErrorCode::NotSymmetric, "matrix is " + std::to_string(s.rows()) + "x" +
                                             std::to_string(s.cols()) + ", not square");
  }
  double scale = 0.0;
  for (double x : s.values()) scale = std::max(scale, std::abs(x));
  const double tol = kSymmetryTolerance * scale;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = i + 1; j < s.cols(); ++j) {
      if (std::abs(s(i, j) - s(j, i)) > tol) {
        throw Error(ErrorCode::NotSymmetric,
                    "entries (" + std::to_string(i) + "," + std::to_string(j) +
                        ") and their transpose differ beyond relative tolerance 1e-12");
      }
    }
  }
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Reflector k acts on indices k+1..n-1 and is I − β·v·vᵀ.
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> sub;  // sub[i] couples i and i+1; sub[n-1] == 0
  std::vector<std::vector<double>> reflectors;
  std::vector<double> betas;
};

inline Tridiagonal tridiagonalize(Matrix a) {
  const std::size_t n = a.rows();
  Tridiagonal t;
  t.diag.assign(n, 0.0);
  t.sub.assign(n, 0.0);
  std::vector<double> p(n), w(n);

  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    const double* x = &a(k, k + 1);
    double sigma = 0.0;
    for (std::size_t i = 1; i < len; ++i) sigma += x[i] * x[i];

    std::vector<double> v(x, x + len);
    double beta = 0.0;
    double alpha = x[0];
    if (sigma != 0.0) {
      const double norm = std::sqrt(x[0] * x[0] + sigma);
      alpha = x[0] <= 0.0 ? norm : -norm;
      v[0] = x[0] - alpha;
      beta = -1.0 / (alpha * v[0]);  // 2 / ‖v‖²
    }
    t.sub[k] = alpha;

    if (beta != 0.0) {
      // p = β·B·v over the trailing block B.
      for (std::size_t i = 0; i < len; ++i) {
        const double* row = &a(k + 1 + i, k + 1);
        double sum = 0.0;
        for (std::size_t j = 0; j < len; ++j) sum += row[j] * v[j];
        p[i] = beta * sum;
      }
      double pv = 0.0;
      for (std::size_t i = 0; i < len; ++i) pv += p[i] * v[i];
      const double half = 0.5 * beta * pv;
      for (std::size_t i = 0; i < len; ++i) w[i] = p[i] - half * v[i];
      // B ← B − v·wᵀ − w·vᵀ
      for (std::size_t i = 0; i < len; ++i) {
        double* row = &a(k + 1 + i, k + 1);
        const double vi = v[i];
        const double wi = w[i];
        for (std::size_t j = 0; j < len; ++j) row[j] -= vi * w[j] + wi * v[j];
      }
    }
    t.reflectors.push_back(std::move(v));
    t.betas.push_back(beta);
  }
  for (std::size_t i = 0; i < n; ++i) t.diag[i] = a(i, i);
  if (n >= 2) t.sub[n - 2] = a(n - 1, n - 2);
  t.sub[n - 1] = 0.0;
  return t;
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues (unsorted) and row i of `vectors` the eigenvector for diag[i],
/// expressed in the tridiagonal basis.
inline void tridiagonal_ql(std::vector<double>& diag, std::vector<double>& sub,
                           std::vector<double>& vectors) {
  const std::size_t n = diag.size();
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  const std::size_t max_iterations = 30 * n + 30;
  double shift = 0.0;
  double scale = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    scale = std::max(scale, std::abs(diag[l]) + std::abs(sub[l]));
    std::size_t m = l;
    while (m < n && std::abs(sub[m]) > eps * scale) ++m;
    if (m == n) m = n - 1;

    if (m > l) {
      std::size_t iteration = 0;
      do {
        if (++iteration > max_iterations) {
          throw Error(ErrorCode::NoConvergence,
                      "tridiagonal QL did not converge for eigenvalue " + std::to_string(l));
        }
        double g = diag[l];
        double p = (diag[l + 1] - g) / (2.0 * sub[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        diag[l] = sub[l] / (p + r);
        diag[l + 1] = sub[l] * (p + r);
        const double dl1 = diag[l + 1];
        double h = g - diag[l];
        for (std::size_t i = l + 2; i < n; ++i) diag[i] -= h;
        shift += h;

        p = diag[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = sub[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * sub[i];
          h = c * p;
          r = std::hypot(p, sub[i]);
          sub[i + 1] = s * r;
          s = sub[i] / r;
          c = p / r;
          p = c * diag[i] - s * g;
          diag[i + 1] = h + s * (c * g + s * diag[i]);

          double* zi = &vectors[i * n];
          double* zi1 = zi + n;
          for (std::size_t k = 0; k < n; ++k) {
            const double t = zi1[k];
            zi1[k] = s * zi[k] + c * t;
            zi[k] = c * zi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * sub[l] / dl1;
        sub[l] = s * p;
        diag[l] = c * p;
      } while (std::abs(sub[l]) > eps * scale);
    }
    diag[l] += shift;
    sub[l] = 0.0;
  }
}

}  // namespace detail

/// The k largest eigenpairs of a symmetric positive semidefinite matrix,
/// sorted by eigenvalue descending, sign-canonicalized, and each certified
/// against the residual bound.
inline std::vector<EigenPair> top_k_eigenpairs(const Matrix& s, std::size_t k) {
  detail::check_symmetric(s);
  const std::size_t n = s.rows();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (k > n) {
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " exceeds dimension " + std::to_string(n));
  }

  const double norm_f = s.frobenius_norm();
  std::vector<double> values;
  std::vector<double> basis;  // row i: eigenvector i in the tridiagonal basis
  detail::Tridiagonal tri;
  if (n == 1) {
    values = {s(0, 0)};
    basis = {1.0};
  } else {
    tri = detail::tridiagonalize(s);
    values = tri.diag;
    std::vector<double> sub = tri.sub;
    detail::tridiagonal_ql(values, sub, basis);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });

  std::vector<EigenPair> pairs;
  pairs.reserve(k);
  for (std::size_t idx = 0; idx < k; ++idx) {
    const std::size_t src = order[idx];
    std::vector<double> y(basis.begin() + static_cast<std::ptrdiff_t>(src * n),
                          basis.begin() + static_cast<std::ptrdiff_t>((src + 1) * n));
    // Undo the reflectors: x = H₀·H₁·…·H_{n-3}·y
    for (std::size_t r = tri.reflectors.size(); r-- > 0;) {
      const auto& v = tri.reflectors[r];
      const double beta = tri.betas[r];
      if (beta == 0.0) continue;
      double dot = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * y[r + 1 + i];
      dot *= beta;
      for (std::size_t i = 0; i < v.size(); ++i) y[r + 1 + i] -= dot * v[i];
    }
    Vector vec(std::move(y));
    vec = vec.normalized();
    canonicalize_sign(vec);

    double value = values[src];
    if (value < 0.0) {
      if (value < -kResidualTolerance * norm_f) {
        throw Error(ErrorCode::InvalidArgument,
                    "matrix is not positive semidefinite: eigenvalue " + std::to_string(value));
      }
      value = 0.0;
    }

    Vector residual = s * vec;
    residual -= value * vec;
    const double res = residual.norm();
    if (res > kResidualTolerance * norm_f) {
      throw Error(ErrorCode::NoConvergence, "eigenpair " + std::to_string(idx) +
                                                " residual " + std::to_string(res) +
                                                " exceeds certified bound");
    }
    pairs.push_back(EigenPair{value, std::move(vec), res});
  }
  return pairs;
}

}  // namespace sefa
