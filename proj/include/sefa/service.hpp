#pragma once

// Local HTTP API for live editing of a toy generator: one session holding a
// base latent code, the direction set and user annotations.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sefa/analysis.hpp"
#include "sefa/error.hpp"
#include "sefa/factorizer.hpp"
#include "sefa/io.hpp"
#include "sefa/random.hpp"
#include "sefa/toy_generator.hpp"

namespace sefa {

inline constexpr int kDefaultPort = 8641;
inline constexpr double kOffsetBound = 10.0;

struct Annotation {
  std::string name;
  std::string note;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

using AnnotationMap = std::map<std::size_t, Annotation>;

inline nlohmann::json annotations_to_json(const AnnotationMap& map) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [index, a] : map) doc[std::to_string(index)] = {{"name", a.name}, {"note", a.note}};
  return doc;
}

inline AnnotationMap annotations_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "annotations must be a JSON object");
  AnnotationMap map;
  for (const auto& [key, value] : doc.items()) {
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec != std::errc() || ptr != key.data() + key.size()) {
      throw Error(ErrorCode::SchemaViolation, "annotation key '" + key + "' is not a direction index");
    }
    if (!value.is_object() || !value.contains("name") || !value["name"].is_string()) {
      throw Error(ErrorCode::SchemaViolation, "annotation " + key + " needs a string name");
    }
    map[index] = Annotation{value["name"].get<std::string>(), value.value("note", std::string())};
  }
  return map;
}

/// Annotations persisted as one JSON file, rewritten atomically on every change.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      try {
        map_ = annotations_from_json(nlohmann::json::parse(io::read_file(path_)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, path_.string() + ": " + e.what());
      }
    }
  }

  void put(std::size_t index, Annotation a) {
    std::lock_guard lock(mutex_);
    AnnotationMap next = map_;
    next[index] = std::move(a);
    io::write_atomically(path_, annotations_to_json(next).dump(2) + "\n");
    map_ = std::move(next);
  }

  AnnotationMap snapshot() const {
    std::lock_guard lock(mutex_);
    return map_;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  AnnotationMap map_;
};

/// Single-operator editing session. Renders read a consistent copy of the
/// base code; resampling replaces it atomically.
class Session {
 public:
  Session(std::shared_ptr<const ToyGenerator> gen, DirectionSet ds, std::uint64_t seed)
      : gen_(std::move(gen)), ds_(std::move(ds)), rng_(seed) {
    if (ds_.latent_dim != gen_->latent_dim()) {
      throw Error(ErrorCode::DimMismatch, "direction set latent dim " + std::to_string(ds_.latent_dim) +
                                              " does not match generator " +
                                              std::to_string(gen_->latent_dim()));
    }
    z_ = sample_code(gen_->latent_dim(), rng_);
    offsets_.assign(ds_.k(), 0.0);
  }

  const ToyGenerator& generator() const noexcept { return *gen_; }
  const DirectionSet& directions() const noexcept { return ds_; }

  Vector base_code() const {
    std::shared_lock lock(mutex_);
    return z_;
  }

  Vector resample(std::optional<std::uint64_t> seed) {
    std::unique_lock lock(mutex_);
    if (seed) {
      Rng rng(*seed);
      z_ = sample_code(gen_->latent_dim(), rng);
    } else {
      z_ = sample_code(gen_->latent_dim(), rng_);
    }
    offsets_.assign(ds_.k(), 0.0);
    return z_;
  }

  /// z + Σᵢ αᵢ·nᵢ for the current base code.
  Vector edited_code(const std::vector<double>& offsets) const {
    Vector z = base_code();
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i] != 0.0) z = edit_code(z, ds_.directions[i], offsets[i]);
    }
    return z;
  }

  /// Slider state of the last render; zeroed by resample.
  std::vector<double> offsets() const {
    std::shared_lock lock(mutex_);
    return offsets_;
  }

  void record_offsets(std::vector<double> offsets) {
    std::unique_lock lock(mutex_);
    if (offsets.size() == offsets_.size()) offsets_ = std::move(offsets);
  }

 private:
  std::shared_ptr<const ToyGenerator> gen_;
  DirectionSet ds_;
  mutable std::shared_mutex mutex_;
  Rng rng_;
  Vector z_;
  std::vector<double> offsets_;
};

class EditingService {
 public:
  EditingService(std::shared_ptr<const ToyGenerator> gen, DirectionSet ds,
                 const std::filesystem::path& annotations_path, std::uint64_t seed = 0,
                 std::optional<std::filesystem::path> ui_dir = std::nullopt)
      : session_(std::move(gen), std::move(ds), seed), annotations_(annotations_path) {
    if (ui_dir) server_.set_mount_point("/", ui_dir->string());
    routes(ui_dir.has_value());
  }

  EditingService(const EditingService&) = delete;
  EditingService& operator=(const EditingService&) = delete;
  ~EditingService() { stop(); }

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host = "127.0.0.1", int port = kDefaultPort) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
    return port_;
  }

  /// Serves until stop() is called.
  void listen() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  Session& session() noexcept { return session_; }
  const AnnotationStore& annotations() const noexcept { return annotations_; }

 private:
  static void json_reply(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error_reply(httplib::Response& res, int status, const std::string& message) {
    json_reply(res, {{"error", message}}, status);
  }

  static bool local_origin(const std::string& origin) {
    for (const char* prefix : {"http://localhost", "http://127.0.0.1", "http://[::1]"}) {
      const std::string p(prefix);
      if (origin.compare(0, p.size(), p) == 0 &&
          (origin.size() == p.size() || origin[p.size()] == ':')) {
        return true;
      }
    }
    return false;
  }

  /// Parsed offsets, or the HTTP status to reply with.
  struct Offsets {
    std::vector<double> values;
    int status = 200;
    std::string message;
  };

  Offsets check_offsets(const nlohmann::json& array) const {
    Offsets out;
    if (!array.is_array()) return {{}, 400, "offsets must be an array of numbers"};
    for (const auto& v : array) {
      if (!v.is_number()) return {{}, 400, "offsets must be an array of numbers"};
      out.values.push_back(v.get<double>());
    }
    const std::size_t k = session_.directions().k();
    if (out.values.size() != k) {
      return {{}, 422, "expected " + std::to_string(k) + " offsets, got " + std::to_string(out.values.size())};
    }
    for (double a : out.values) {
      if (!std::isfinite(a) || std::abs(a) > kOffsetBound) {
        return {{}, 400, "offsets must lie within ±10"};
      }
    }
    return out;
  }

  Offsets offsets_from_body(const std::string& body) const {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return {{}, 400, "request body is not valid JSON"};
    }
    if (!doc.is_object() || !doc.contains("offsets")) return {{}, 400, "body needs an 'offsets' array"};
    return check_offsets(doc["offsets"]);
  }

  Offsets offsets_from_request(const httplib::Request& req) const {
    if (req.has_param("offsets")) {
      nlohmann::json array = nlohmann::json::array();
      const std::string text = req.get_param_value("offsets");
      std::size_t start = 0;
      while (start <= text.size() && !text.empty()) {
        const auto comma = text.find(',', start);
        const std::string token = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
          return {{}, 400, "offsets query must be comma-separated numbers"};
        }
        array.push_back(value);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return check_offsets(array);
    }
    if (!req.body.empty()) return offsets_from_body(req.body);
    return check_offsets(nlohmann::json::array_t(session_.directions().k(), 0.0));
  }

  void routes(bool has_ui) {
    server_.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
      const std::string origin = req.get_header_value("Origin");
      if (!origin.empty() && local_origin(origin)) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
      }
    });
    server_.Options(R"(/api/.*)", [](const httplib::Request& req, httplib::Response& res) {
      const std::string origin = req.get_header_value("Origin");
      if (!origin.empty() && local_origin(origin)) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
      }
      res.status = 204;
    });

    if (!has_ui) {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!DOCTYPE html><html><head><title>sefa</title></head><body>"
            "<h1>sefa editing service</h1><ul>"
            "<li>GET /api/meta</li><li>POST /api/resample</li><li>POST /api/render</li>"
            "<li>GET /api/attributes</li><li>GET /api/annotations</li>"
            "<li>PUT /api/annotations/{i}</li></ul></body></html>",
            "text/html");
      });
    }

    server_.Get("/api/meta", [this](const httplib::Request&, httplib::Response& res) {
      const DirectionSet& ds = session_.directions();
      const AnnotationMap notes = annotations_.snapshot();
      nlohmann::json labels = nlohmann::json::array();
      for (std::size_t i = 0; i < ds.k(); ++i) {
        const auto it = notes.find(i);
        labels.push_back(it != notes.end() && !it->second.name.empty() ? it->second.name
                                                                       : "direction " + std::to_string(i));
      }
      json_reply(res, {{"d", ds.latent_dim},
                       {"k", ds.k()},
                       {"eigenvalues", ds.eigenvalues},
                       {"labels", labels},
                       {"offset_bound", kOffsetBound},
                       {"width", kDefaultImageSize},
                       {"height", kDefaultImageSize}});
    });

    server_.Post("/api/resample", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::uint64_t> seed;
      if (!req.body.empty()) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
          return error_reply(res, 400, "request body is not valid JSON");
        }
        if (!doc.is_object()) return error_reply(res, 400, "body must be a JSON object");
        if (doc.contains("seed") && !doc["seed"].is_null()) {
          if (!doc["seed"].is_number_unsigned()) return error_reply(res, 400, "seed must be a non-negative integer");
          seed = doc["seed"].get<std::uint64_t>();
        }
      }
      const Vector z = session_.resample(seed);
      json_reply(res, {{"z", z.raw()}});
    });

    server_.Post("/api/render", [this](const httplib::Request& req, httplib::Response& res) {
      const Offsets offsets = offsets_from_body(req.body);
      if (offsets.status != 200) return error_reply(res, offsets.status, offsets.message);
      const RenderedImage img = render(session_.generator(), session_.edited_code(offsets.values));
      session_.record_offsets(offsets.values);
      res.set_content(encode_png(img), "image/png");
    });

    const auto attributes_handler = [this](const httplib::Request& req, httplib::Response& res) {
      const Offsets offsets = offsets_from_request(req);
      if (offsets.status != 200) return error_reply(res, offsets.status, offsets.message);
      const Vector z = session_.edited_code(offsets.values);
      const Vector y = project(session_.generator(), z);
      nlohmann::json body = to_json(attributes_from_projection(y));
      body["y"] = y.raw();
      body["z"] = z.raw();
      json_reply(res, body);
    };
    server_.Get("/api/attributes", attributes_handler);
    server_.Post("/api/attributes", attributes_handler);

    server_.Get("/api/annotations", [this](const httplib::Request&, httplib::Response& res) {
      json_reply(res, annotations_to_json(annotations_.snapshot()));
    });

    server_.Put(R"(/api/annotations/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t index = 0;
      const std::string key = req.matches[1];
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
      if (ec != std::errc() || index >= session_.directions().k()) {
        return error_reply(res, 404, "no direction " + key);
      }
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        return error_reply(res, 400, "request body is not valid JSON");
      }
      if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string() ||
          (doc.contains("note") && !doc["note"].is_string())) {
        return error_reply(res, 400, "body needs string 'name' and optional string 'note'");
      }
      try {
        annotations_.put(index, Annotation{doc["name"].get<std::string>(), doc.value("note", std::string())});
      } catch (const Error& e) {
        return error_reply(res, 500, e.what());
      }
      res.status = 204;
    });
  }

  Session session_;
  AnnotationStore annotations_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace sefa
