#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sefa/error.hpp"
#include "sefa/matrix.hpp"
#include "sefa/npy.hpp"

namespace sefa {

enum class Family { Pggan, Stylegan, Biggan };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Pggan: return "pggan";
    case Family::Stylegan: return "stylegan";
    case Family::Biggan: return "biggan";
  }
  return "unknown";
}

inline std::optional<Family> parse_family(std::string_view s) {
  if (s == "pggan") return Family::Pggan;
  if (s == "stylegan") return Family::Stylegan;
  if (s == "biggan") return Family::Biggan;
  return std::nullopt;
}

struct LayerEntry {
  std::string name;
  std::string tensor_path;
  std::size_t rows = 0;
  bool transpose = false;
  std::optional<std::string> bias_path;
};

/// Which stored tensors form the first affine step of a generator. Layer
/// index 0 is the bottom of the network.
struct ArchitectureManifest {
  Family family = Family::Pggan;
  std::size_t latent_dim = 0;
  std::vector<LayerEntry> layers;
  std::string notes;
  /// Directory relative tensor paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

/// First-step weights of one layer, oriented output × latent.
struct LayerWeights {
  std::string name;
  Matrix a;
  std::optional<Vector> bias;
};

/// Inclusive index ranges over the manifest's layer order. An absent upper
/// bound means "through the last layer".
class LayerSelection {
 public:
  struct Range {
    std::size_t first = 0;
    std::optional<std::size_t> last;
  };

  /// Parses "a-b", "a-" or "a", comma separated, e.g. "0-1,6-".
  static LayerSelection parse(std::string_view text) {
    LayerSelection sel;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::InvalidSelection,
                   "layer selection '" + std::string(text) + "': " + why);
    };
    auto number = [&](std::string_view token) {
      std::size_t value = 0;
      const auto* end = token.data() + token.size();
      const auto [ptr, ec] = std::from_chars(token.data(), end, value);
      if (token.empty() || ec != std::errc() || ptr != end) {
        throw fail("'" + std::string(token) + "' is not a layer index");
      }
      return value;
    };

    std::string_view rest = text;
    if (rest.empty()) throw fail("empty selection");
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto dash = item.find('-');
      Range r;
      if (dash == std::string_view::npos) {
        r.first = number(item);
        r.last = r.first;
      } else {
        r.first = number(item.substr(0, dash));
        const auto upper = item.substr(dash + 1);
        if (!upper.empty()) {
          r.last = number(upper);
          if (*r.last < r.first) {
            throw fail("range " + std::string(item) + " is inverted");
          }
        }
      }
      sel.ranges_.push_back(r);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }

    auto sorted = sel.ranges_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Range& x, const Range& y) { return x.first < y.first; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (!sorted[i - 1].last || *sorted[i - 1].last >= sorted[i].first) {
        throw fail("ranges overlap");
      }
    }
    return sel;
  }

  static LayerSelection all() { return LayerSelection{{Range{0, std::nullopt}}}; }

  const std::vector<Range>& ranges() const noexcept { return ranges_; }

  /// Selected layer indices in ascending order for a network of `count` layers.
  std::vector<std::size_t> resolve(std::size_t count) const {
    std::vector<std::size_t> out;
    for (const Range& r : ranges_) {
      const std::size_t last = r.last.value_or(count == 0 ? 0 : count - 1);
      if (r.first >= count || last >= count) {
        throw Error(ErrorCode::InvalidSelection,
                    "layer range " + std::to_string(r.first) + "-" +
                        (r.last ? std::to_string(*r.last) : std::string()) +
                        " is outside 0-" + std::to_string(count == 0 ? 0 : count - 1));
      }
      for (std::size_t i = r.first; i <= last; ++i) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(ErrorCode::InvalidSelection, "selection is empty");
    return out;
  }

  std::string to_string() const {
    std::string s;
    for (const Range& r : ranges_) {
      if (!s.empty()) s += ",";
      s += std::to_string(r.first);
      if (!r.last) {
        s += "-";
      } else if (*r.last != r.first) {
        s += "-" + std::to_string(*r.last);
      }
    }
    return s;
  }

 private:
  explicit LayerSelection(std::vector<Range> ranges = {}) : ranges_(std::move(ranges)) {}

  std::vector<Range> ranges_;
};

namespace detail {

/// Shape of a stored tensor without reading its payload.
inline std::vector<std::size_t> stored_shape(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingTensor, "tensor file " + path.string() + " not found");
  }
  std::ifstream in(path, std::ios::binary);
  std::string pre(10, '\0');
  in.read(pre.data(), 10);
  pre.resize(static_cast<std::size_t>(in.gcount()));
  if (pre.size() < 10 || pre.compare(0, npy::kMagicSize, npy::kMagic, npy::kMagicSize) != 0) {
    // Let the decoder produce the precise error.
    npy::decode(pre, path.string());
  }
  const std::size_t len = static_cast<unsigned char>(pre[8]) |
                          (static_cast<std::size_t>(static_cast<unsigned char>(pre[9])) << 8);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in.gcount()) != len) {
    throw Error(ErrorCode::TruncatedFile, path.string() + ": file ends inside the header");
  }
  return npy::detail::parse_header(header, path.string()).shape;
}

}  // namespace detail

/// Parses and validates a manifest document. `base_dir` resolves relative
/// tensor paths; every referenced tensor is checked for existence and shape.
inline ArchitectureManifest parse_manifest(const nlohmann::json& doc,
                                           const std::filesystem::path& base_dir) {
  auto schema = [](const std::string& what) {
    return Error(ErrorCode::SchemaViolation, "manifest " + what);
  };
  if (!doc.is_object()) throw schema("must be a JSON object");

  ArchitectureManifest m;
  m.base_dir = base_dir;
  if (!doc.contains("family") || !doc["family"].is_string()) throw schema("needs string 'family'");
  const auto family = parse_family(doc["family"].get<std::string>());
  if (!family) {
    throw schema("family '" + doc["family"].get<std::string>() +
                 "' is not one of pggan, stylegan, biggan");
  }
  m.family = *family;

  if (!doc.contains("latent_dim") || !doc["latent_dim"].is_number_integer() ||
      doc["latent_dim"].get<long long>() <= 0) {
    throw schema("needs positive integer 'latent_dim'");
  }
  m.latent_dim = doc["latent_dim"].get<std::size_t>();

  if (doc.contains("notes")) {
    if (!doc["notes"].is_string()) throw schema("'notes' must be a string");
    m.notes = doc["notes"].get<std::string>();
  }

  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw schema("needs a non-empty 'layers' array");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const auto& item = doc["layers"][i];
    const std::string where = "layer " + std::to_string(i);
    if (!item.is_object()) throw schema(where + " must be an object");
    LayerEntry e;
    if (!item.contains("name") || !item["name"].is_string()) throw schema(where + " needs string 'name'");
    e.name = item["name"].get<std::string>();
    if (!names.insert(e.name).second) throw schema("layer name '" + e.name + "' is repeated");
    if (!item.contains("tensor_path") || !item["tensor_path"].is_string()) {
      throw schema(where + " needs string 'tensor_path'");
    }
    e.tensor_path = item["tensor_path"].get<std::string>();
    if (!item.contains("rows") || !item["rows"].is_number_integer() ||
        item["rows"].get<long long>() <= 0) {
      throw schema(where + " needs positive integer 'rows'");
    }
    e.rows = item["rows"].get<std::size_t>();
    if (item.contains("transpose")) {
      if (!item["transpose"].is_boolean()) throw schema(where + " 'transpose' must be a boolean");
      e.transpose = item["transpose"].get<bool>();
    }
    if (item.contains("bias_path")) {
      if (!item["bias_path"].is_string()) throw schema(where + " 'bias_path' must be a string");
      e.bias_path = item["bias_path"].get<std::string>();
    }
    m.layers.push_back(std::move(e));
  }

  if (m.family == Family::Pggan && m.layers.size() != 1) {
    throw schema("family pggan declares exactly one latent-to-feature-map layer, got " +
                 std::to_string(m.layers.size()));
  }
  if (m.family == Family::Biggan && m.layers.size() < 2) {
    throw schema("family biggan needs a feature-map layer plus at least one per-layer entry");
  }

  for (const LayerEntry& e : m.layers) {
    const auto shape = detail::stored_shape(m.resolve(e.tensor_path));
    if (shape.size() != 2) {
      throw Error(ErrorCode::ShapeMismatch,
                  "layer '" + e.name + "' tensor is " + std::to_string(shape.size()) + "-D, expected 2-D");
    }
    const std::size_t rows = e.transpose ? shape[1] : shape[0];
    const std::size_t cols = e.transpose ? shape[0] : shape[1];
    if (cols != m.latent_dim) {
      throw Error(ErrorCode::LatentDimInconsistent,
                  "layer '" + e.name + "' acts on latent dim " + std::to_string(cols) +
                      " but the manifest declares " + std::to_string(m.latent_dim));
    }
    if (rows != e.rows) {
      throw Error(ErrorCode::ShapeMismatch, "layer '" + e.name + "' has " + std::to_string(rows) +
                                                " output rows, manifest declares " +
                                                std::to_string(e.rows));
    }
    if (e.bias_path) {
      const auto bshape = detail::stored_shape(m.resolve(*e.bias_path));
      if (bshape.size() != 1 || bshape[0] != e.rows) {
        throw Error(ErrorCode::ShapeMismatch, "layer '" + e.name + "' bias does not have " +
                                                  std::to_string(e.rows) + " entries");
      }
    }
  }
  return m;
}

inline ArchitectureManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

inline nlohmann::json manifest_to_json(const ArchitectureManifest& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerEntry& e : m.layers) {
    nlohmann::json item = {{"name", e.name}, {"tensor_path", e.tensor_path}, {"rows", e.rows}};
    if (e.transpose) item["transpose"] = true;
    if (e.bias_path) item["bias_path"] = *e.bias_path;
    layers.push_back(std::move(item));
  }
  nlohmann::json doc = {{"family", std::string(to_string(m.family))},
                        {"latent_dim", m.latent_dim},
                        {"layers", std::move(layers)}};
  if (!m.notes.empty()) doc["notes"] = m.notes;
  return doc;
}

inline LayerWeights load_layer(const ArchitectureManifest& m, std::size_t index) {
  const LayerEntry& e = m.layers.at(index);
  Matrix a = npy::load_matrix(m.resolve(e.tensor_path));
  if (e.transpose) a = a.transposed();
  if (a.rows() != e.rows || a.cols() != m.latent_dim) {
    throw Error(ErrorCode::ShapeMismatch, "layer '" + e.name + "' changed shape on disk");
  }
  LayerWeights w{e.name, std::move(a), std::nullopt};
  if (e.bias_path) {
    w.bias = npy::load_vector(m.resolve(*e.bias_path));
    if (w.bias->dim() != e.rows) {
      throw Error(ErrorCode::ShapeMismatch, "layer '" + e.name + "' bias length mismatch");
    }
  }
  return w;
}

/// Loads exactly the selected layers in manifest order.
inline std::vector<LayerWeights> select_layers(const ArchitectureManifest& m,
                                               const LayerSelection& sel) {
  std::vector<LayerWeights> out;
  for (std::size_t index : sel.resolve(m.layers.size())) out.push_back(load_layer(m, index));
  return out;
}

}  // namespace sefa
