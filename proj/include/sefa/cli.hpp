#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sefa/analysis.hpp"
#include "sefa/error.hpp"
#include "sefa/factorizer.hpp"
#include "sefa/image.hpp"
#include "sefa/io.hpp"
#include "sefa/manifest.hpp"
#include "sefa/service.hpp"
#include "sefa/toy_generator.hpp"

namespace sefa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Raised for argument problems found after parsing (bad selection syntax etc.).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string manifest;
  std::string layers = "0-";
  std::optional<std::size_t> k;
  std::string out;
  std::string gen_dir;
  std::string directions;
  std::size_t index = 0;
  double alpha_min = -3.0;
  double alpha_max = 3.0;
  double alpha = kDefaultRescoreAlpha;
  std::size_t steps = 7;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  int port = kDefaultPort;
  std::string host = "127.0.0.1";
  std::string annotations;
  std::string ui_dir;
  std::size_t d = 0;
  std::size_t m = 0;
  std::optional<std::size_t> r;
  std::vector<double> sigma;
  bool aligned = false;
};

/// ISO-8601 UTC stamp for provenance. Taken from SOURCE_DATE_EPOCH when set,
/// otherwise from the input file's modification time, so repeated runs on
/// the same inputs write identical files.
inline std::string provenance_timestamp(const std::filesystem::path& input) {
  std::time_t seconds = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    seconds = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  } else {
    const auto mtime = std::filesystem::last_write_time(input);
    const auto sys = std::chrono::file_clock::to_sys(mtime);
    seconds = std::chrono::system_clock::to_time_t(sys);
  }
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

inline std::string eigenvalue_table(const DirectionSet& ds) {
  std::string out = "index\teigenvalue\n";
  for (std::size_t i = 0; i < ds.k(); ++i) {
    out += std::to_string(i) + "\t" + format_number(ds.eigenvalues[i]) + "\n";
  }
  return out;
}

inline int cmd_factorize(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  LayerSelection sel = [&] {
    try {
      return LayerSelection::parse(cfg.layers);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  const ArchitectureManifest manifest = load_manifest(cfg.manifest);
  const Matrix a = concat_weights(select_layers(manifest, sel));
  const std::size_t k = cfg.k.value_or(default_k(manifest.latent_dim));
  err << "factorizing " << a.rows() << "x" << a.cols() << " weights, k=" << k << "\n";

  DirectionSet ds = factorize(a, k);
  ds.source.model = cfg.manifest;
  ds.source.layers = sel.to_string();
  ds.source.created = provenance_timestamp(cfg.manifest);
  if (const auto weak = near_zero_eigenvalues(ds); !weak.empty()) {
    err << "warning: " << weak.size() << " near-zero eigenvalue(s) (below 1e-10 of the largest):";
    for (std::size_t i : weak) err << " " << i << "=" << format_number(ds.eigenvalues[i]);
    err << "\n";
  }
  save_directions(ds, cfg.out);
  out << eigenvalue_table(ds);
  return kExitOk;
}

inline int cmd_make_toy(const CliConfig& cfg, std::ostream& out, std::ostream&) {
  const std::size_t r = cfg.r.value_or(cfg.sigma.size());
  const ToyGenerator gen = make_planted(cfg.d, cfg.m, r, cfg.sigma, cfg.seed, cfg.aligned);
  save_toy(gen, cfg.out);
  out << "wrote generator d=" << gen.latent_dim() << " m=" << gen.projected_dim() << " r=" << r
      << " to " << cfg.out << "\n";
  return kExitOk;
}

inline int cmd_sweep(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const ToyGenerator gen = load_toy(cfg.gen_dir);
  const DirectionSet ds = load_directions(cfg.directions);
  if (cfg.index >= ds.k()) {
    throw Error(ErrorCode::InvalidArgument, "direction index " + std::to_string(cfg.index) +
                                                " out of range for " + std::to_string(ds.k()) + " directions");
  }
  Rng rng(cfg.seed);
  const Vector z = sample_code(gen.latent_dim(), rng);
  const auto frames = sweep(gen, z, ds.directions[cfg.index], cfg.alpha_min, cfg.alpha_max, cfg.steps);

  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
    save_png(frames[i], dir / name);
  }
  save_png(hstack(frames), dir / "strip.png");
  err << "wrote " << frames.size() << " frames\n";
  out << (dir / "strip.png").string() << "\n";
  return kExitOk;
}

inline int cmd_rescore(const CliConfig& cfg, std::ostream& out, std::ostream&) {
  const ToyGenerator gen = load_toy(cfg.gen_dir);
  const DirectionSet ds = load_directions(cfg.directions);
  const std::size_t samples = cfg.samples == 0 ? kDefaultRescoreSamples : cfg.samples;
  const std::string csv = to_csv(rescore(gen, ds, cfg.alpha, samples, cfg.seed));
  if (!cfg.out.empty()) io::write_atomically(cfg.out, csv);
  out << csv;
  return kExitOk;
}

inline int cmd_compare(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const ToyGenerator gen = load_toy(cfg.gen_dir);
  const std::size_t k = cfg.k.value_or(std::min(default_k(gen.latent_dim()), gen.projected_dim()));
  const std::size_t samples = cfg.samples == 0 ? 10000 : cfg.samples;

  const auto start = std::chrono::steady_clock::now();
  const DirectionSet sefa = factorize(gen.a, k);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const DirectionSet baseline = pca_baseline(gen, samples, k, cfg.seed);

  const std::string csv = to_csv(direction_similarity(sefa, baseline));
  if (!cfg.out.empty()) io::write_atomically(cfg.out, csv);
  out << csv;
  err << "factorize wall time: " << format_number(seconds) << " s\n";
  return kExitOk;
}

inline int cmd_serve(const CliConfig& cfg, std::ostream& out, std::ostream&) {
  auto gen = std::make_shared<const ToyGenerator>(load_toy(cfg.gen_dir));
  DirectionSet ds = load_directions(cfg.directions);
  const std::filesystem::path notes =
      cfg.annotations.empty() ? std::filesystem::path(cfg.gen_dir) / "annotations.json"
                              : std::filesystem::path(cfg.annotations);
  std::optional<std::filesystem::path> ui;
  if (!cfg.ui_dir.empty()) ui = cfg.ui_dir;
  EditingService service(std::move(gen), std::move(ds), notes, cfg.seed, ui);
  const int port = service.bind(cfg.host, cfg.port);
  out << "serving on http://" << cfg.host << ":" << port << "\n" << std::flush;
  service.listen();
  return kExitOk;
}

/// Runs one command line. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CliConfig cfg;
  CLI::App app{"Closed-form discovery of latent directions from generator weights", "sefa"};
  app.require_subcommand(1);

  auto* factorize_cmd = app.add_subcommand("factorize", "top-k directions of a manifest's selected layers");
  factorize_cmd->add_option("--manifest", cfg.manifest, "architecture manifest JSON")->required()->check(CLI::ExistingFile);
  factorize_cmd->add_option("--layers", cfg.layers, "layer selection, e.g. 0-1,6-")->capture_default_str();
  factorize_cmd->add_option("--k", cfg.k, "number of directions (default min(d, 50))")->check(CLI::PositiveNumber);
  factorize_cmd->add_option("--out", cfg.out, "output direction-set archive")->required();

  auto* toy_cmd = app.add_subcommand("make-toy", "write a planted toy generator");
  toy_cmd->add_option("--d", cfg.d, "latent dimension")->required()->check(CLI::PositiveNumber);
  toy_cmd->add_option("--m", cfg.m, "projected dimension (>= 6)")->required()->check(CLI::Range(6, 1 << 24));
  toy_cmd->add_option("--r", cfg.r, "planted rank (default: number of sigmas)")->check(CLI::PositiveNumber);
  toy_cmd->add_option("--sigma", cfg.sigma, "planted singular values, descending")->required()->delimiter(',');
  toy_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  toy_cmd->add_flag("--aligned", cfg.aligned, "direction j drives projected component j only");
  toy_cmd->add_option("--out", cfg.out, "output directory")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "render frames moving along one direction");
  sweep_cmd->add_option("--gen", cfg.gen_dir, "generator directory")->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--directions", cfg.directions)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--index", cfg.index)->capture_default_str();
  sweep_cmd->add_option("--alpha-min", cfg.alpha_min)->capture_default_str();
  sweep_cmd->add_option("--alpha-max", cfg.alpha_max)->capture_default_str();
  sweep_cmd->add_option("--steps", cfg.steps)->capture_default_str()->check(CLI::Range(2, 1000));
  sweep_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  sweep_cmd->add_option("--out", cfg.out, "output directory")->required();

  auto* rescore_cmd = app.add_subcommand("rescore", "mean attribute change per direction");
  rescore_cmd->add_option("--gen", cfg.gen_dir)->required()->check(CLI::ExistingDirectory);
  rescore_cmd->add_option("--directions", cfg.directions)->required()->check(CLI::ExistingFile);
  rescore_cmd->add_option("--alpha", cfg.alpha)->capture_default_str();
  rescore_cmd->add_option("--samples", cfg.samples, "samples (default 2000)")->check(CLI::PositiveNumber);
  rescore_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  rescore_cmd->add_option("--out", cfg.out, "CSV output path");

  auto* compare_cmd = app.add_subcommand("compare", "closed-form directions vs sampled PCA baseline");
  compare_cmd->add_option("--gen", cfg.gen_dir)->required()->check(CLI::ExistingDirectory);
  compare_cmd->add_option("--k", cfg.k)->check(CLI::PositiveNumber);
  compare_cmd->add_option("--samples", cfg.samples, "samples (default 10000)")->check(CLI::PositiveNumber);
  compare_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  compare_cmd->add_option("--out", cfg.out, "CSV output path");

  auto* serve_cmd = app.add_subcommand("serve", "interactive editing HTTP service");
  serve_cmd->add_option("--gen", cfg.gen_dir)->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--directions", cfg.directions)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", cfg.port)->capture_default_str()->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", cfg.host)->capture_default_str();
  serve_cmd->add_option("--annotations", cfg.annotations, "annotation file (default <gen>/annotations.json)");
  serve_cmd->add_option("--ui", cfg.ui_dir, "static UI bundle served at /")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--seed", cfg.seed)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  if (cfg.alpha_min > cfg.alpha_max) {
    err << "usage error: --alpha-min exceeds --alpha-max\n";
    return kExitUsage;
  }

  try {
    if (factorize_cmd->parsed()) return cmd_factorize(cfg, out, err);
    if (toy_cmd->parsed()) return cmd_make_toy(cfg, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, out, err);
    if (rescore_cmd->parsed()) return cmd_rescore(cfg, out, err);
    if (compare_cmd->parsed()) return cmd_compare(cfg, out, err);
    if (serve_cmd->parsed()) return cmd_serve(cfg, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sefa::cli
