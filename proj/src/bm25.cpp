#include "rrgen/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rrgen/tokenizer.hpp"

namespace rrgen {

std::string to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::kDense: return "dense";
    case ScoreSource::kSparse: return "sparse";
    case ScoreSource::kReranker: return "reranker";
    case ScoreSource::kFused: return "fused";
  }
  return "?";
}

void sort_scored(std::vector<ScoredEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ScoredEntry& a, const ScoredEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
}

InvertedIndex InvertedIndex::build(const Corpus& corpus, double k1, double b) {
  if (corpus.size() == 0) throw std::invalid_argument("InvertedIndex: empty corpus");
  InvertedIndex idx;
  idx.k1_ = k1;
  idx.b_ = b;
  size_t total = 0;
  for (size_t ord = 0; ord < corpus.size(); ++ord) {
    const Passage& p = corpus.at(ord);
    auto toks = Tokenizer::split(p.title + " " + p.text);
    std::map<std::string, uint32_t> tf;
    for (const auto& t : toks) ++tf[t];
    for (const auto& [term, f] : tf)
      idx.postings_[term].push_back({static_cast<uint32_t>(ord), f});
    idx.doc_lengths_.push_back(static_cast<uint32_t>(toks.size()));
    idx.ids_.push_back(p.id);
    total += toks.size();
  }
  idx.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(corpus.size());
  return idx;
}

double InvertedIndex::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(ids_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

const std::vector<InvertedIndex::Posting>& InvertedIndex::postings(
    const std::string& term) const {
  static const std::vector<Posting> kEmpty;
  auto it = postings_.find(term);
  return it == postings_.end() ? kEmpty : it->second;
}

namespace {

double bm25_term(double tf, double idf, double k1, double b, double len, double avglen) {
  return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avglen));
}

}  // namespace

ScoredList InvertedIndex::search(const std::string& query, size_t k) const {
  if (k < 1) throw std::invalid_argument("bm25_search: k must be >= 1");
  std::map<uint32_t, double> acc;
  for (const auto& term : Tokenizer::split(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& post : it->second)
      acc[post.ordinal] += bm25_term(post.tf, w, k1_, b_,
                                     doc_lengths_[post.ordinal], avg_doc_length_);
  }
  std::vector<ScoredEntry> scored;
  scored.reserve(acc.size());
  for (const auto& [ord, s] : acc)
    scored.push_back({ids_[ord], s, ScoreSource::kSparse});
  sort_scored(scored);
  if (scored.size() > k) scored.resize(k);
  return {std::move(scored)};
}

double InvertedIndex::score_passage(const std::string& query, size_t ordinal) const {
  double s = 0.0;
  for (const auto& term : Tokenizer::split(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    for (const auto& post : it->second)
      if (post.ordinal == ordinal)
        s += bm25_term(post.tf, idf(term), k1_, b_, doc_lengths_[ordinal],
                       avg_doc_length_);
  }
  return s;
}

// Layout: magic "RRGNIDX1", k1, b, avgdl (f64), N (u64), then per passage
// {doc_id, passage_index (u64), length (u32)}, term count (u64), then per
// term {term, postings count (u64), (ordinal, tf) pairs}. Strings are
// u64 length + bytes. Terms are emitted in sorted order so rebuilds of the
// same corpus serialize to identical bytes.
void InvertedIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("InvertedIndex::save: cannot write " + path);
  auto w_u64 = [&out](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto w_u32 = [&out](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto w_f64 = [&out](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto w_str = [&](const std::string& s) {
    w_u64(s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  out.write("RRGNIDX1", 8);
  w_f64(k1_);
  w_f64(b_);
  w_f64(avg_doc_length_);
  w_u64(ids_.size());
  for (size_t i = 0; i < ids_.size(); ++i) {
    w_str(ids_[i].doc_id);
    w_u64(ids_[i].passage_index);
    w_u32(doc_lengths_[i]);
  }
  w_u64(postings_.size());
  for (const auto& [term, plist] : postings_) {
    w_str(term);
    w_u64(plist.size());
    for (const auto& p : plist) {
      w_u32(p.ordinal);
      w_u32(p.tf);
    }
  }
}

InvertedIndex InvertedIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("InvertedIndex::load: cannot open " + path);
  auto r_u64 = [&in]() { uint64_t v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
  auto r_u32 = [&in]() { uint32_t v; in.read(reinterpret_cast<char*>(&v), 4); return v; };
  auto r_f64 = [&in]() { double v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
  auto r_str = [&]() {
    std::string s(r_u64(), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
  };
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "RRGNIDX1")
    throw std::runtime_error("InvertedIndex::load: bad magic in " + path);
  InvertedIndex idx;
  idx.k1_ = r_f64();
  idx.b_ = r_f64();
  idx.avg_doc_length_ = r_f64();
  const uint64_t n = r_u64();
  for (uint64_t i = 0; i < n; ++i) {
    PassageId id;
    id.doc_id = r_str();
    id.passage_index = r_u64();
    idx.ids_.push_back(std::move(id));
    idx.doc_lengths_.push_back(r_u32());
  }
  const uint64_t terms = r_u64();
  for (uint64_t t = 0; t < terms; ++t) {
    std::string term = r_str();
    auto& plist = idx.postings_[term];
    const uint64_t np = r_u64();
    for (uint64_t i = 0; i < np; ++i) {
      uint32_t ord = r_u32(), tf = r_u32();
      plist.push_back({ord, tf});
    }
  }
  if (!in) throw std::runtime_error("InvertedIndex::load: truncated file " + path);
  return idx;
}

}  // namespace rrgen
