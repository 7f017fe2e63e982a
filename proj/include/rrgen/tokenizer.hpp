#pragma once

#include <map>
#include <string>
#include <vector>

namespace rrgen {

// Lowercased whitespace/punctuation tokenizer with a fixed word vocabulary.
// encode(decode(ids)) is identity for in-vocab text modulo whitespace.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kBos = 4;
  static constexpr int kEos = 5;
  static constexpr int kNumSpecials = 6;

  Tokenizer() = default;

  static std::vector<std::string> split(const std::string& text);

  void add_text(const std::string& text);  // grows the vocabulary
  void freeze() { frozen_ = true; }

  std::vector<int> encode(const std::string& text) const;  // [UNK] for OOV
  std::string decode(const std::vector<int>& ids) const;   // skips specials

  size_t vocab_size() const { return kNumSpecials + words_.size(); }
  int id_of(const std::string& token) const;

  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

 private:
  std::map<std::string, int> vocab_;        // token -> id (specials excluded)
  std::vector<std::string> words_;          // id - kNumSpecials -> token
  bool frozen_ = false;
};

}  // namespace rrgen
