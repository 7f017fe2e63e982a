#pragma once

#include <string>
#include <vector>

#include "rrgen/bm25.hpp"
#include "rrgen/corpus.hpp"
#include "rrgen/dense_index.hpp"
#include "rrgen/models.hpp"
#include "rrgen/scored_list.hpp"

namespace rrgen {

struct GenerationOutput {
  std::string text;
  std::vector<double> sequence_scores;  // P(s_j) over the retained passages
  std::vector<std::pair<std::string, double>> candidates;  // text, combined score
};

struct PipelineConfig {
  size_t n_dense = 12;
  size_t n_sparse = 12;
  size_t top_k = 5;
  BeamConfig decode;
  bool use_dense = true;
  bool use_sparse = true;
  bool use_reranker = true;
  // P(s_j) over all scored candidates instead of the retained top-k.
  bool renormalize_over_all = false;
};

// Deduplicated union, dense order first then sparse; duplicates keep their
// first (dense) occurrence. Scores are never compared across sources.
std::vector<ScoredEntry> merge_union(const ScoredList& dense, const ScoredList& sparse);

// Baseline fusion: score(p) = sum over sources of 1/rank(p), ranks from 1.
ScoredList inverse_rank_merge(const ScoredList& dense, const ScoredList& sparse,
                              size_t k);

struct RerankResult {
  ScoredList list;                  // top-k by reranker logit
  std::vector<double> all_logits;   // z_r aligned with the candidate order
};

RerankResult rerank(const CrossEncoder& model, const Tokenizer& tok,
                    const Corpus& corpus, const std::string& query,
                    const std::vector<ScoredEntry>& candidates, size_t k);

// softmax over the retained logits (renormalized after the top-k cut).
std::vector<double> marginalize_sequence_probs(const std::vector<double>& logits);

// Beam-decodes each sequence p_j [SEP] q and combines candidates by
// sum_j P(s_j) * P(y|s_j) over the beams that produced y ("fast" decoding,
// no forced rescoring). Ties on the combined score break lexicographically.
GenerationOutput generate(const Seq2Seq& model, const Tokenizer& tok,
                          const std::string& query,
                          const std::vector<std::string>& passage_texts,
                          const std::vector<double>& sequence_probs,
                          const BeamConfig& bc);

struct PipelineComponents {
  const Tokenizer* tokenizer = nullptr;
  const Corpus* corpus = nullptr;
  const BiEncoder* biencoder = nullptr;
  const CrossEncoder* reranker = nullptr;
  const Seq2Seq* generator = nullptr;
  const InvertedIndex* sparse = nullptr;
  const VectorIndex* dense = nullptr;
};

struct PipelineResult {
  GenerationOutput output;
  ScoredList provenance;  // rerank (or fusion) order, for metric scoring
};

PipelineResult run_pipeline(const std::string& query,
                            const PipelineComponents& parts,
                            const PipelineConfig& cfg);

std::string passage_text_for_models(const Passage& p);

}  // namespace rrgen
