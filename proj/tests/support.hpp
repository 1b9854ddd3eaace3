#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "rafiq/engine.hpp"

namespace support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return RAFIQ_DATA_DIR; }

inline rafiq::engine::EngineConfig fixture_config() {
  return rafiq::engine::EngineConfig::load(data_dir() / "config.json");
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// A fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("rafiq-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace support
