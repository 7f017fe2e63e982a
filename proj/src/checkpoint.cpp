#include "rrgen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace rrgen {

namespace {

void write_f64_le(std::ofstream& out, const std::vector<double>& v) {
  static_assert(sizeof(double) == 8);
  // x86/arm64 linux are little-endian; serialize via byte copy.
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * 8));
}

}  // namespace

void save_checkpoint(const std::string& prefix,
                     const std::vector<Parameter>& params,
                     const nlohmann::json& config) {
  nlohmann::json manifest;
  manifest["format"] = "rrgen-ckpt-v1";
  manifest["config"] = config;
  auto& plist = manifest["params"] = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& p : params) {
    plist.push_back({{"name", p.name},
                     {"shape", {p.tensor.rows(), p.tensor.cols()}},
                     {"offset", offset}});
    offset += p.tensor.size() * 8;
  }
  std::ofstream jf(prefix + ".json");
  if (!jf) throw std::runtime_error("save_checkpoint: cannot write " + prefix + ".json");
  jf << manifest.dump(2) << "\n";
  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("save_checkpoint: cannot write " + prefix + ".bin");
  for (const auto& p : params) write_f64_le(bf, p.tensor.value());
}

nlohmann::json load_checkpoint(const std::string& prefix,
                               std::vector<Parameter>& params) {
  std::ifstream jf(prefix + ".json");
  if (!jf) throw std::runtime_error("load_checkpoint: missing " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(jf);
  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("load_checkpoint: missing " + prefix + ".bin");

  struct Entry { size_t rows, cols, offset; };
  std::unordered_map<std::string, Entry> entries;
  for (const auto& e : manifest.at("params"))
    entries[e.at("name").get<std::string>()] = {e.at("shape")[0], e.at("shape")[1],
                                                e.at("offset")};
  for (auto& p : params) {
    auto it = entries.find(p.name);
    if (it == entries.end())
      throw std::runtime_error("load_checkpoint: parameter '" + p.name +
                               "' not in " + prefix);
    const Entry& e = it->second;
    if (e.rows != p.tensor.rows() || e.cols != p.tensor.cols())
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + p.name + "'");
    bf.seekg(static_cast<std::streamoff>(e.offset));
    bf.read(reinterpret_cast<char*>(p.tensor.value().data()),
            static_cast<std::streamsize>(p.tensor.size() * 8));
    if (!bf) throw std::runtime_error("load_checkpoint: truncated blob for '" + p.name + "'");
  }
  return manifest.at("config");
}

nlohmann::json read_checkpoint_config(const std::string& prefix) {
  std::ifstream jf(prefix + ".json");
  if (!jf) throw std::runtime_error("read_checkpoint_config: missing " + prefix + ".json");
  return nlohmann::json::parse(jf).at("config");
}

bool checkpoint_exists(const std::string& prefix) {
  return std::filesystem::exists(prefix + ".json") &&
         std::filesystem::exists(prefix + ".bin");
}

}  // namespace rrgen
