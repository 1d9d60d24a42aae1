#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sefa/archive.hpp"
#include "sefa/error.hpp"
#include "sefa/io.hpp"
#include "sefa/linalg.hpp"
#include "sefa/manifest.hpp"
#include "sefa/matrix.hpp"
#include "sefa/npy.hpp"

namespace sefa {

enum class Method { Sefa, PcaBaseline, Planted };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Sefa: return "sefa";
    case Method::PcaBaseline: return "pca_baseline";
    case Method::Planted: return "planted";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "sefa") return Method::Sefa;
  if (s == "pca_baseline") return Method::PcaBaseline;
  if (s == "planted") return Method::Planted;
  return std::nullopt;
}

struct Provenance {
  std::string model = "toy";  // manifest id, or "toy"
  std::string layers;         // layer selection string
  std::string created;        // ISO-8601 UTC
  Method method = Method::Sefa;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// k unit latent directions with their eigenvalues, strongest first.
struct DirectionSet {
  std::size_t latent_dim = 0;
  std::vector<Vector> directions;
  std::vector<double> eigenvalues;
  Provenance source;

  std::size_t k() const noexcept { return directions.size(); }

  /// The d×k matrix whose columns are the directions.
  Matrix as_matrix() const {
    Matrix n(latent_dim, directions.size());
    for (std::size_t j = 0; j < directions.size(); ++j) n.set_column(j, directions[j]);
    return n;
  }

  friend bool operator==(const DirectionSet&, const DirectionSet&) = default;
};

inline constexpr std::size_t kDefaultMaxDirections = 50;
inline constexpr double kNearZeroRatio = 1e-10;

inline std::size_t default_k(std::size_t latent_dim) {
  return std::min(latent_dim, kDefaultMaxDirections);
}

/// Stacks the layer matrices along the output axis, in the given order.
inline Matrix concat_weights(const std::vector<LayerWeights>& layers) {
  if (layers.empty()) throw Error(ErrorCode::InvalidArgument, "no layers to concatenate");
  const std::size_t d = layers.front().a.cols();
  std::size_t rows = 0;
  for (const LayerWeights& l : layers) {
    if (l.a.cols() != d) {
      throw Error(ErrorCode::DimMismatch, "layer '" + l.name + "' has " +
                                              std::to_string(l.a.cols()) + " columns, expected " +
                                              std::to_string(d));
    }
    rows += l.a.rows();
  }
  std::vector<double> data;
  data.reserve(rows * d);
  for (const LayerWeights& l : layers) {
    data.insert(data.end(), l.a.values().begin(), l.a.values().end());
  }
  return Matrix(rows, d, std::move(data));
}

/// ‖A·n‖₂², the variation a unit step along n causes after the affine step.
inline double variation_energy(const Matrix& a, const Vector& n) {
  if (n.dim() != a.cols()) {
    throw Error(ErrorCode::DimMismatch, "direction of dim " + std::to_string(n.dim()) +
                                            " for matrix with " + std::to_string(a.cols()) +
                                            " columns");
  }
  const Vector y = a * n;
  return y.dot(y);
}

/// Top-k eigenvectors of AᵀA: the unit directions maximizing ‖A·n‖². Biases
/// play no part; only the weight matrix is consulted.
inline DirectionSet factorize(const Matrix& a, std::size_t k) {
  if (k > a.cols()) {
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " exceeds latent dim " + std::to_string(a.cols()));
  }
  auto pairs = top_k_eigenpairs(gram(a), k);
  DirectionSet ds;
  ds.latent_dim = a.cols();
  ds.source.method = Method::Sefa;
  for (auto& p : pairs) {
    ds.eigenvalues.push_back(p.value);
    ds.directions.push_back(std::move(p.vector));
  }
  return ds;
}

/// Indices whose eigenvalue is below 1e-10·λ₁; such directions barely move
/// the projected code and are useless for editing.
inline std::vector<std::size_t> near_zero_eigenvalues(const DirectionSet& ds) {
  std::vector<std::size_t> out;
  if (ds.eigenvalues.empty()) return out;
  const double threshold = kNearZeroRatio * ds.eigenvalues.front();
  for (std::size_t i = 0; i < ds.eigenvalues.size(); ++i) {
    if (ds.eigenvalues[i] < threshold || ds.eigenvalues[i] == 0.0) out.push_back(i);
  }
  return out;
}

// -- persistence ------------------------------------------------------------

inline constexpr std::string_view kMetaMember = "meta.json";
inline constexpr std::string_view kDirectionsMember = "directions.npy";

inline std::string encode_directions(const DirectionSet& ds) {
  nlohmann::json meta = {
      {"format_version", 1},
      {"latent_dim", ds.latent_dim},
      {"k", ds.k()},
      {"eigenvalues", ds.eigenvalues},
      {"source",
       {{"model", ds.source.model},
        {"layers", ds.source.layers},
        {"created", ds.source.created},
        {"method", std::string(to_string(ds.source.method))}}},
  };
  return archive::write_zip({
      {std::string(kMetaMember), meta.dump(2) + "\n"},
      {std::string(kDirectionsMember), npy::encode_matrix(ds.as_matrix())},
  });
}

inline DirectionSet decode_directions(std::string_view bytes, const std::string& origin) {
  auto schema = [&](const std::string& what) {
    return Error(ErrorCode::SchemaViolation, origin + ": " + what);
  };
  const auto members = archive::read_zip(bytes);
  const auto meta_it = members.find(std::string(kMetaMember));
  const auto dirs_it = members.find(std::string(kDirectionsMember));
  if (meta_it == members.end() || dirs_it == members.end()) {
    throw schema("archive must contain meta.json and directions.npy");
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_it->second);
  } catch (const nlohmann::json::exception& e) {
    throw schema(std::string("meta.json is not valid JSON: ") + e.what());
  }
  if (!meta.is_object() || !meta.contains("latent_dim") || !meta["latent_dim"].is_number_integer() ||
      !meta.contains("k") || !meta["k"].is_number_integer() || !meta.contains("eigenvalues") ||
      !meta["eigenvalues"].is_array() || !meta.contains("source") || !meta["source"].is_object()) {
    throw schema("meta.json lacks latent_dim, k, eigenvalues or source");
  }

  DirectionSet ds;
  ds.latent_dim = meta["latent_dim"].get<std::size_t>();
  const std::size_t k = meta["k"].get<std::size_t>();
  for (const auto& v : meta["eigenvalues"]) {
    if (!v.is_number()) throw schema("eigenvalues must be numbers");
    ds.eigenvalues.push_back(v.get<double>());
  }
  const auto& src = meta["source"];
  auto text = [&](const char* key) {
    if (!src.contains(key) || !src[key].is_string()) throw schema(std::string("source.") + key + " missing");
    return src[key].get<std::string>();
  };
  ds.source.model = text("model");
  ds.source.layers = text("layers");
  ds.source.created = text("created");
  const auto method = parse_method(text("method"));
  if (!method) throw schema("unknown method tag");
  ds.source.method = *method;

  const Matrix n = npy::to_matrix(npy::decode(dirs_it->second, origin + ":directions.npy"), origin);
  if (n.rows() != ds.latent_dim || n.cols() != k || ds.eigenvalues.size() != k) {
    throw schema("directions.npy is " + std::to_string(n.rows()) + "x" + std::to_string(n.cols()) +
                 ", meta declares " + std::to_string(ds.latent_dim) + "x" + std::to_string(k));
  }
  for (std::size_t j = 0; j < k; ++j) ds.directions.push_back(n.column(j));
  return ds;
}

inline void save_directions(const DirectionSet& ds, const std::filesystem::path& path) {
  io::write_atomically(path, encode_directions(ds));
}

inline DirectionSet load_directions(const std::filesystem::path& path) {
  return decode_directions(io::read_file(path), path.string());
}

}  // namespace sefa
