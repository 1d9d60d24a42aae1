#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sefa/error.hpp"
#include "sefa/factorizer.hpp"
#include "sefa/image.hpp"
#include "sefa/io.hpp"
#include "sefa/manifest.hpp"
#include "sefa/matrix.hpp"
#include "sefa/npy.hpp"
#include "sefa/random.hpp"

namespace sefa {

/// Ground truth of a planted generator: A·vⱼ = σⱼ·uⱼ for orthonormal vⱼ.
struct PlantedSpectrum {
  Matrix v;  // d × r, orthonormal columns
  std::vector<double> sigma;
  bool aligned = false;  // uⱼ is the j-th standard basis vector of y-space
};

/// Generator whose first step is an explicit affine map y = A·z + b, followed
/// by a fixed renderer driven by the first six components of y.
struct ToyGenerator {
  Matrix a;  // m × d
  Vector b;  // m
  std::optional<PlantedSpectrum> planted;
  std::uint64_t seed = 0;

  std::size_t latent_dim() const noexcept { return a.cols(); }
  std::size_t projected_dim() const noexcept { return a.rows(); }
};

inline constexpr std::size_t kMinProjectedDim = 6;

/// Ground-truth semantics of one sample.
struct AttributeVector {
  double pos_x = 0.0;       // (-1, 1)
  double pos_y = 0.0;       // (-1, 1)
  double rotation = 0.0;    // (-π/2, π/2)
  double log_scale = 0.0;   // (-1, 1)
  double hue = 0.0;         // [0, 1)
  double brightness = 0.0;  // (0, 1)

  static constexpr std::array<const char*, 6> kLabels = {"pos_x",     "pos_y", "rotation",
                                                         "log_scale", "hue",   "brightness"};

  std::array<double, 6> as_array() const {
    return {pos_x, pos_y, rotation, log_scale, hue, brightness};
  }
};

namespace detail {

/// Modified Gram-Schmidt, two passes, on the columns of `m` in place.
inline void orthonormalize_columns(Matrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    Vector col = m.column(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const Vector prev = m.column(i);
        col -= col.dot(prev) * prev;
      }
    }
    m.set_column(j, col.normalized());
  }
}

/// (I − Q·Qᵀ)·x for a matrix Q with orthonormal columns.
inline Vector project_out(const Matrix& q, const Vector& x) {
  Vector coeffs = q.transpose_times(x);
  return x - q * coeffs;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// Builds A = U·diag(σ)·Vᵀ + ε·N with ε = 1e-6·σ_r. N is a Gaussian matrix
/// restricted to the orthogonal complements of span(U) and span(V), which
/// keeps A full rank while leaving every planted pair exact. With `aligned`,
/// U holds the first r standard basis vectors so direction j drives y_j only.
inline ToyGenerator make_planted(std::size_t d, std::size_t m, std::size_t r,
                                 const std::vector<double>& sigma, std::uint64_t seed,
                                 bool aligned = false) {
  if (m < kMinProjectedDim) {
    throw Error(ErrorCode::BadShape, "projected dim m=" + std::to_string(m) + " must be at least 6");
  }
  if (d == 0 || r == 0 || r > std::min(d, m)) {
    throw Error(ErrorCode::BadShape, "planted rank r=" + std::to_string(r) + " must be in 1..min(d, m)");
  }
  if (sigma.size() != r) {
    throw Error(ErrorCode::BadShape, "expected " + std::to_string(r) + " singular values, got " +
                                         std::to_string(sigma.size()));
  }
  for (std::size_t i = 0; i < r; ++i) {
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]) || (i > 0 && sigma[i] > sigma[i - 1])) {
      throw Error(ErrorCode::BadShape, "singular values must be positive and non-increasing");
    }
  }

  Rng rng(seed);
  Matrix u(m, r);
  if (aligned) {
    for (std::size_t j = 0; j < r; ++j) u(j, j) = 1.0;
  } else {
    u = Matrix::gaussian(m, r, rng);
    detail::orthonormalize_columns(u);
  }
  Matrix v = Matrix::gaussian(d, r, rng);
  detail::orthonormalize_columns(v);

  Matrix a(m, d);
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t row = 0; row < m; ++row) {
      const double scaled = sigma[j] * u(row, j);
      if (scaled == 0.0) continue;
      for (std::size_t col = 0; col < d; ++col) a(row, col) += scaled * v(col, j);
    }
  }

  Matrix noise = Matrix::gaussian(m, d, rng);
  for (std::size_t row = 0; row < m; ++row) {
    Vector x(std::vector<double>(noise.row(row).begin(), noise.row(row).end()));
    x = detail::project_out(v, x);
    std::copy(x.values().begin(), x.values().end(), noise.row(row).begin());
  }
  for (std::size_t col = 0; col < d; ++col) noise.set_column(col, detail::project_out(u, noise.column(col)));
  const double eps = 1e-6 * sigma.back();
  for (std::size_t i = 0; i < a.values().size(); ++i) a.values()[i] += eps * noise.values()[i];

  Vector b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = rng.normal();

  return ToyGenerator{std::move(a), std::move(b), PlantedSpectrum{std::move(v), sigma, aligned}, seed};
}

/// y = A·z + b
inline Vector project(const ToyGenerator& gen, const Vector& z) {
  if (z.dim() != gen.latent_dim()) {
    throw Error(ErrorCode::DimMismatch, "latent code of dim " + std::to_string(z.dim()) +
                                            ", generator expects " + std::to_string(gen.latent_dim()));
  }
  Vector y = gen.a * z;
  y += gen.b;
  return y;
}

inline AttributeVector attributes_from_projection(const Vector& y) {
  if (y.dim() < kMinProjectedDim) {
    throw Error(ErrorCode::DimMismatch, "projected code needs at least 6 components");
  }
  AttributeVector attr;
  attr.pos_x = std::tanh(y[0]);
  attr.pos_y = std::tanh(y[1]);
  attr.rotation = 0.5 * std::numbers::pi * std::tanh(y[2]);
  attr.log_scale = std::tanh(y[3]);
  const double s = detail::sigmoid(y[4]);
  attr.hue = s - std::floor(s);
  attr.brightness = detail::sigmoid(y[5]);
  return attr;
}

inline AttributeVector attributes(const ToyGenerator& gen, const Vector& z) {
  return attributes_from_projection(project(gen, z));
}

// -- rendering ---------------------------------------------------------------

inline constexpr std::size_t kDefaultImageSize = 256;
inline constexpr int kSupersample = 4;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

inline Rgb hsv_to_rgb(double h, double s, double v) {
  const double scaled = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(scaled) % 6;
  const double f = scaled - std::floor(scaled);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {to_byte(r), to_byte(g), to_byte(b)};
}

/// Rasterizes the ellipse described by `attr`.
///
/// Pixel (px, py) covers [px, px+1) × [py, py+1) with y pointing down. Each
/// pixel is tested at a 4×4 grid of sample points (px + (i+½)/4, py + (j+½)/4);
/// a point is inside when (u/a)² + (v/b)² ≤ 1 after rotating its offset from
/// the center by −rotation. With c of the 16 samples inside, every channel is
/// (bg·(16−c) + fill·c + 8) / 16 in integer arithmetic.
inline RenderedImage render_attributes(const AttributeVector& attr,
                                       std::size_t width = kDefaultImageSize,
                                       std::size_t height = kDefaultImageSize) {
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  const double cx = 0.5 * (1.0 + attr.pos_x) * w;
  const double cy = 0.5 * (1.0 + attr.pos_y) * h;
  const double scale = std::exp(attr.log_scale);
  const double semi_a = 0.25 * w * scale;
  const double semi_b = 0.15 * h * scale;
  const double cos_t = std::cos(attr.rotation);
  const double sin_t = std::sin(attr.rotation);
  const double inv_a2 = 1.0 / (semi_a * semi_a);
  const double inv_b2 = 1.0 / (semi_b * semi_b);

  const std::uint8_t gray = to_byte(attr.brightness);
  const Rgb fill = hsv_to_rgb(attr.hue, 0.8, 0.9);

  RenderedImage img(width, height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = gray;

  const double half_x = std::sqrt(semi_a * semi_a * cos_t * cos_t + semi_b * semi_b * sin_t * sin_t);
  const double half_y = std::sqrt(semi_a * semi_a * sin_t * sin_t + semi_b * semi_b * cos_t * cos_t);
  const auto clamp_index = [](double v, std::size_t limit) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(limit)));
  };
  const std::size_t x0 = clamp_index(std::floor(cx - half_x) - 1.0, width);
  const std::size_t x1 = clamp_index(std::ceil(cx + half_x) + 1.0, width);
  const std::size_t y0 = clamp_index(std::floor(cy - half_y) - 1.0, height);
  const std::size_t y1 = clamp_index(std::ceil(cy + half_y) + 1.0, height);

  constexpr double step = 1.0 / kSupersample;
  constexpr int full = kSupersample * kSupersample;
  for (std::size_t py = y0; py < y1; ++py) {
    for (std::size_t px = x0; px < x1; ++px) {
      int covered = 0;
      for (int j = 0; j < kSupersample; ++j) {
        const double dy = static_cast<double>(py) + (j + 0.5) * step - cy;
        for (int i = 0; i < kSupersample; ++i) {
          const double dx = static_cast<double>(px) + (i + 0.5) * step - cx;
          const double u = dx * cos_t + dy * sin_t;
          const double v = -dx * sin_t + dy * cos_t;
          if (u * u * inv_a2 + v * v * inv_b2 <= 1.0) ++covered;
        }
      }
      if (covered == 0) continue;
      std::uint8_t* p = img.at(px, py);
      const int keep = full - covered;
      p[0] = static_cast<std::uint8_t>((gray * keep + fill.r * covered + full / 2) / full);
      p[1] = static_cast<std::uint8_t>((gray * keep + fill.g * covered + full / 2) / full);
      p[2] = static_cast<std::uint8_t>((gray * keep + fill.b * covered + full / 2) / full);
    }
  }
  return img;
}

inline RenderedImage render(const ToyGenerator& gen, const Vector& z,
                            std::size_t width = kDefaultImageSize,
                            std::size_t height = kDefaultImageSize) {
  return render_attributes(attributes(gen, z), width, height);
}

// -- on-disk layout -----------------------------------------------------------
//
// A generator directory holds manifest.json (family pggan, one layer with
// weight a.npy and bias b.npy) plus, for planted generators, planted.json and
// planted_v.npy with the ground-truth right singular vectors.

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kPlantedFile = "planted.json";
inline constexpr const char* kPlantedVectorsFile = "planted_v.npy";

inline void save_toy(const ToyGenerator& gen, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  npy::save_matrix(gen.a, dir / "a.npy");
  npy::save_vector(gen.b, dir / "b.npy");
  ArchitectureManifest manifest;
  manifest.family = Family::Pggan;
  manifest.latent_dim = gen.latent_dim();
  manifest.layers.push_back(LayerEntry{"latent_to_feature", "a.npy", gen.projected_dim(), false, "b.npy"});
  manifest.notes = "toy generator, seed " + std::to_string(gen.seed);
  io::write_atomically(dir / kManifestFile, manifest_to_json(manifest).dump(2) + "\n");

  if (gen.planted) {
    npy::save_matrix(gen.planted->v, dir / kPlantedVectorsFile);
    const nlohmann::json planted = {{"d", gen.latent_dim()},
                                    {"m", gen.projected_dim()},
                                    {"r", gen.planted->sigma.size()},
                                    {"sigma", gen.planted->sigma},
                                    {"seed", gen.seed},
                                    {"aligned", gen.planted->aligned},
                                    {"vectors", kPlantedVectorsFile}};
    io::write_atomically(dir / kPlantedFile, planted.dump(2) + "\n");
  }
}

/// Reads a generator directory. Every manifest layer contributes rows to A;
/// a layer without a bias contributes zeros to b.
inline ToyGenerator load_toy(const std::filesystem::path& dir) {
  const ArchitectureManifest manifest = load_manifest(dir / kManifestFile);
  const auto layers = select_layers(manifest, LayerSelection::all());
  ToyGenerator gen{concat_weights(layers), Vector(), std::nullopt, 0};
  std::vector<double> bias;
  for (const auto& l : layers) {
    if (l.bias) {
      bias.insert(bias.end(), l.bias->values().begin(), l.bias->values().end());
    } else {
      bias.insert(bias.end(), l.a.rows(), 0.0);
    }
  }
  gen.b = Vector(std::move(bias));
  if (gen.projected_dim() < kMinProjectedDim) {
    throw Error(ErrorCode::BadShape, "generator needs at least 6 projected components, has " +
                                         std::to_string(gen.projected_dim()));
  }

  if (std::filesystem::exists(dir / kPlantedFile)) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(io::read_file(dir / kPlantedFile));
      PlantedSpectrum p{npy::load_matrix(dir / doc.at("vectors").get<std::string>()),
                        doc.at("sigma").get<std::vector<double>>(), doc.value("aligned", false)};
      gen.seed = doc.at("seed").get<std::uint64_t>();
      if (p.v.rows() != gen.latent_dim() || p.v.cols() != p.sigma.size()) {
        throw Error(ErrorCode::ShapeMismatch, "planted vectors do not match the generator");
      }
      gen.planted = std::move(p);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("planted.json: ") + e.what());
    }
  }
  return gen;
}

/// The planted right singular vectors as a DirectionSet (eigenvalues σ²).
inline DirectionSet planted_directions(const ToyGenerator& gen) {
  if (!gen.planted) throw Error(ErrorCode::InvalidArgument, "generator has no planted spectrum");
  DirectionSet ds;
  ds.latent_dim = gen.latent_dim();
  ds.source.method = Method::Planted;
  for (std::size_t j = 0; j < gen.planted->sigma.size(); ++j) {
    ds.directions.push_back(gen.planted->v.column(j));
    ds.eigenvalues.push_back(gen.planted->sigma[j] * gen.planted->sigma[j]);
  }
  return ds;
}

}  // namespace sefa
