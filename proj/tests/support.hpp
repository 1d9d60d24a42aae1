#pragma once

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sefa/error.hpp"
#include "sefa/io.hpp"

namespace support {

template <typename F>
sefa::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const sefa::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected sefa::Error";
  return sefa::ErrorCode::InvalidArgument;
}

/// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(std::filesystem::path(SEFA_TEST_TMP) / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string from_hex(std::string_view hex) {
  std::string out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

inline std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

/// Runs the built command-line tool; stdout and stderr are captured separately.
inline CliResult run_cli(const std::vector<std::string>& args, const std::filesystem::path& scratch) {
  const auto err_path = scratch / "stderr.txt";
  std::string cmd = quote(SEFA_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>" + quote(err_path.string());
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = sefa::io::read_file(err_path);
  std::filesystem::remove(err_path);
  return r;
}

}  // namespace support
