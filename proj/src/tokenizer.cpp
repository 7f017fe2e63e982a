#include "rrgen/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rrgen {

std::vector<std::string> Tokenizer::split(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
    } else if (std::ispunct(c)) {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
      out.push_back(std::string(1, static_cast<char>(std::tolower(c))));
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void Tokenizer::add_text(const std::string& text) {
  if (frozen_) throw std::runtime_error("Tokenizer: vocabulary is frozen");
  for (const auto& tok : split(text))
    if (!vocab_.count(tok)) {
      vocab_[tok] = static_cast<int>(kNumSpecials + words_.size());
      words_.push_back(tok);
    }
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : split(text)) {
    auto it = vocab_.find(tok);
    ids.push_back(it == vocab_.end() ? kUnk : it->second);
  }
  if (ids.empty()) ids.push_back(kUnk);
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kNumSpecials) continue;
    const size_t w = static_cast<size_t>(id - kNumSpecials);
    if (w >= words_.size()) throw std::runtime_error("Tokenizer: id out of range");
    if (!out.empty()) out += " ";
    out += words_[w];
  }
  return out;
}

int Tokenizer::id_of(const std::string& token) const {
  auto it = vocab_.find(token);
  return it == vocab_.end() ? kUnk : it->second;
}

void Tokenizer::save(const std::string& path) const {
  nlohmann::json j;
  j["words"] = words_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Tokenizer::save: cannot write " + path);
  out << j.dump() << "\n";
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Tokenizer::load: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Tokenizer t;
  for (const auto& w : j.at("words")) t.add_text(w.get<std::string>());
  t.freeze();
  return t;
}

}  // namespace rrgen
