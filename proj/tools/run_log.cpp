#include "run_log.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include <fmt/format.h>

#include "anomex/detector.hpp"
#include "anomex/errors.hpp"

namespace anomex::cli {

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 context initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

RunLog::RunLog(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

void RunLog::flag(const std::string& name, nlohmann::json value) { flags_[name] = std::move(value); }

void RunLog::derived_seed(const std::string& step, std::uint64_t value) { seeds_[step] = value; }

void RunLog::input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", file_sha256(path)}});
}

void RunLog::output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

void RunLog::note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

nlohmann::json RunLog::to_json() const {
  nlohmann::json doc = {{"command", command_}, {"seed", seed_},   {"derived_seeds", seeds_},
                        {"flags", flags_},     {"inputs", inputs_}, {"outputs", outputs_}};
  if (!notes_.empty()) doc["notes"] = notes_;
  return doc;
}

std::filesystem::path run_log_path(const std::filesystem::path& primary) {
  std::filesystem::path p = primary;
  p += ".run.json";
  return p;
}

void RunLog::write_beside(const std::filesystem::path& primary) const {
  write_json_file(to_json(), run_log_path(primary));
}

}  // namespace anomex::cli
