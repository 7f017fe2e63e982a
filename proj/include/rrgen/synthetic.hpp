#pragma once

#include <cstdint>

#include "rrgen/corpus.hpp"

namespace rrgen {

struct SyntheticTask {
  Corpus corpus;
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> dev;
  std::vector<TaskInstance> test;
};

// Slot-filling-shaped synthetic data: every document states entity-relation-
// filler facts ("<ea> <eb> <rel> <fc> <fd>" groups); a query names the entity
// pair and one relation, the target is that fact's two filler tokens. Filler
// pairs are unique corpus-wide, so the target is recoverable only from the
// provenance passage. Deterministic for a fixed seed.
//
// Throws std::invalid_argument when n_docs < 10, vocab_size < 30, or the
// parameters are too small to guarantee unique answers.
SyntheticTask generate_synthetic_task(uint64_t seed, size_t n_docs,
                                      size_t n_instances, size_t vocab_size);

constexpr size_t kSyntheticFactsPerDoc = 3;
constexpr size_t kSyntheticRelations = 8;

}  // namespace rrgen
