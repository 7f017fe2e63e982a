#pragma once

#include <string>
#include <vector>

#include "rrgen/corpus.hpp"

namespace rrgen {

enum class ScoreSource { kDense, kSparse, kReranker, kFused };

std::string to_string(ScoreSource s);

struct ScoredEntry {
  PassageId id;
  double score = 0.0;
  ScoreSource source = ScoreSource::kDense;
};

// Ranked passages, sorted descending by score, no duplicate ids.
struct ScoredList {
  std::vector<ScoredEntry> entries;

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const ScoredEntry& operator[](size_t i) const { return entries[i]; }
};

// Sorts descending by score with ties broken by ascending passage id.
void sort_scored(std::vector<ScoredEntry>& entries);

}  // namespace rrgen
