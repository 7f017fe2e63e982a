#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rrgen/corpus.hpp"
#include "rrgen/scored_list.hpp"

namespace rrgen {

// Okapi BM25 over an inverted index. Tokenization is shared with the models
// (Tokenizer::split), applied to "title text".
class InvertedIndex {
 public:
  struct Posting {
    uint32_t ordinal;  // corpus position
    uint32_t tf;
  };

  // k1=0.9, b=0.4 defaults follow the usual Anserini settings.
  static InvertedIndex build(const Corpus& corpus, double k1 = 0.9, double b = 0.4);

  // score(q,p) = sum_t idf(t) * tf*(k1+1) / (tf + k1*(1-b+b*len/avglen)),
  // idf(t) = ln(1 + (N-df+0.5)/(df+0.5)); non-negative by construction.
  // Top-k by score, ties by ascending passage id. A query with no in-vocab
  // terms yields an empty result.
  ScoredList search(const std::string& query, size_t k) const;

  double idf(const std::string& term) const;
  double score_passage(const std::string& query, size_t ordinal) const;
  const std::vector<Posting>& postings(const std::string& term) const;

  size_t passage_count() const { return ids_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  const PassageId& id_of(size_t ordinal) const { return ids_[ordinal]; }

  // Documented binary format; save then load round-trips bit-exact.
  void save(const std::string& path) const;
  static InvertedIndex load(const std::string& path);

 private:
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<uint32_t> doc_lengths_;
  std::vector<PassageId> ids_;
  double avg_doc_length_ = 0.0;
  double k1_ = 0.9;
  double b_ = 0.4;
};

}  // namespace rrgen
