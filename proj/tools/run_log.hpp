#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace anomex::cli {

// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

// Everything needed to rerun a command: flags, base seed and the per-step
// seeds derived from it, input digests. Deliberately free of wall-clock data so
// identical invocations give identical logs.
class RunLog {
 public:
  RunLog(std::string command, std::uint64_t seed);

  void flag(const std::string& name, nlohmann::json value);
  void derived_seed(const std::string& step, std::uint64_t value);
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void note(const std::string& key, nlohmann::json value);

  nlohmann::json to_json() const;

  // Writes <output>.run.json next to `primary`.
  void write_beside(const std::filesystem::path& primary) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  nlohmann::json flags_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json notes_ = nlohmann::json::object();
};

std::filesystem::path run_log_path(const std::filesystem::path& primary);

}  // namespace anomex::cli
