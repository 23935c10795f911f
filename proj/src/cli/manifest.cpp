#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "heatid/version.hpp"

namespace heatid::cli {

namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read for checksum: " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1)
      throw std::runtime_error("sha256: digest update failed");
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw std::runtime_error("sha256: digest final failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

Check check_le(std::string name, double value, double bound) {
  return {std::move(name), value, "<=", bound, 0, value <= bound};
}
Check check_ge(std::string name, double value, double bound) {
  return {std::move(name), value, ">=", bound, 0, value >= bound};
}
Check check_in(std::string name, double value, double lo, double hi) {
  return {std::move(name), value, "in", lo, hi, value >= lo && value <= hi};
}
Check check_true(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, "==", 1, 0, ok}; }

Manifest::Manifest(std::string out_dir, std::string mode, nlohmann::ordered_json config_echo)
    : out_dir_(std::move(out_dir)), mode_(std::move(mode)), config_(std::move(config_echo)) {
  fs::create_directories(out_dir_);
}

std::string Manifest::path_of(const std::string& name) const { return (fs::path(out_dir_) / name).string(); }

void Manifest::write_file(const std::string& name, const std::string& content) {
  write_atomic(path_of(name), content);
  files_.push_back(name);
}

void Manifest::fail(const std::string& message) { errors_.push_back(message); }

bool Manifest::passed() const {
  if (!errors_.empty()) return false;
  for (const auto& c : checks_)
    if (!c.passed) return false;
  return true;
}

std::string Manifest::finish(double wall_seconds) {
  nlohmann::ordered_json doc;
  doc["tool"] = "heatid";
  doc["version"] = HEATID_VERSION;
  doc["mode"] = mode_;
  doc["status"] = passed() ? "pass" : "fail";
  doc["config"] = config_;
  doc["results"] = results_;
  auto& checks = doc["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks_) {
    nlohmann::ordered_json j{{"name", c.name}, {"value", c.value}, {"relation", c.relation}};
    if (c.relation == "in") j["range"] = {c.bound, c.upper};
    else j["bound"] = c.bound;
    j["passed"] = c.passed;
    checks.push_back(std::move(j));
  }
  doc["errors"] = errors_;
  auto& files = doc["files"] = nlohmann::ordered_json::array();
  for (const auto& name : files_) {
    const auto p = path_of(name);
    files.push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  doc["wall_seconds"] = wall_seconds;
  const std::string text = doc.dump(2) + "\n";
  write_atomic(path_of("manifest.json"), text);
  return text;
}

}  // namespace heatid::cli
