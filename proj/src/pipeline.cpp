#include "rrgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace rrgen {

std::string passage_text_for_models(const Passage& p) {
  return p.title + " " + p.text;
}

std::vector<ScoredEntry> merge_union(const ScoredList& dense, const ScoredList& sparse) {
  std::vector<ScoredEntry> out;
  std::set<PassageId> seen;
  for (const auto& e : dense.entries)
    if (seen.insert(e.id).second) out.push_back(e);
  for (const auto& e : sparse.entries)
    if (seen.insert(e.id).second) out.push_back(e);
  return out;
}

ScoredList inverse_rank_merge(const ScoredList& dense, const ScoredList& sparse,
                              size_t k) {
  std::map<PassageId, double> fused;
  for (size_t i = 0; i < dense.size(); ++i)
    fused[dense[i].id] += 1.0 / static_cast<double>(i + 1);
  for (size_t i = 0; i < sparse.size(); ++i)
    fused[sparse[i].id] += 1.0 / static_cast<double>(i + 1);
  std::vector<ScoredEntry> entries;
  for (const auto& [id, s] : fused) entries.push_back({id, s, ScoreSource::kFused});
  sort_scored(entries);
  if (entries.size() > k) entries.resize(k);
  return {std::move(entries)};
}

RerankResult rerank(const CrossEncoder& model, const Tokenizer& tok,
                    const Corpus& corpus, const std::string& query,
                    const std::vector<ScoredEntry>& candidates, size_t k) {
  if (candidates.empty()) throw std::invalid_argument("rerank: no candidates");
  RerankResult res;
  std::vector<ScoredEntry> scored;
  for (const auto& c : candidates) {
    const long ord = corpus.ordinal_of(c.id);
    if (ord < 0)
      throw std::runtime_error("rerank: candidate '" + c.id.render() +
                               "' not in corpus");
    const double logit =
        model.score(tok, query, passage_text_for_models(corpus.at(ord))).item();
    res.all_logits.push_back(logit);
    scored.push_back({c.id, logit, ScoreSource::kReranker});
  }
  sort_scored(scored);
  if (scored.size() > k) scored.resize(k);
  res.list = {std::move(scored)};
  return res;
}

std::vector<double> marginalize_sequence_probs(const std::vector<double>& logits) {
  if (logits.empty())
    throw std::invalid_argument("marginalize_sequence_probs: no logits");
  double mx = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z))
      throw std::invalid_argument("marginalize_sequence_probs: non-finite logit");
    mx = std::max(mx, z);
  }
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (auto& x : p) x /= s;
  return p;
}

GenerationOutput generate(const Seq2Seq& model, const Tokenizer& tok,
                          const std::string& query,
                          const std::vector<std::string>& passage_texts,
                          const std::vector<double>& sequence_probs,
                          const BeamConfig& bc) {
  if (passage_texts.empty()) throw std::invalid_argument("generate: no passages");
  if (passage_texts.size() != sequence_probs.size())
    throw std::invalid_argument("generate: probs/passages size mismatch");
  GenerationOutput out;
  out.sequence_scores = sequence_probs;
  std::map<std::string, double> combined;
  for (size_t j = 0; j < passage_texts.size(); ++j) {
    auto source = build_generator_source(tok, passage_texts[j], query,
                                         model.config().max_positions);
    auto hyps = model.beam_search(source, bc);
    // A beam can produce distinct token sequences rendering to the same
    // text; only the most probable one per sequence counts.
    std::map<std::string, double> best_in_beam;
    for (const auto& h : hyps) {
      const std::string text = tok.decode(h.tokens);
      const double p = std::exp(h.sum_logprob);
      auto it = best_in_beam.find(text);
      if (it == best_in_beam.end() || p > it->second) best_in_beam[text] = p;
    }
    for (const auto& [text, p] : best_in_beam)
      combined[text] += sequence_probs[j] * p;
  }
  if (combined.empty()) throw std::runtime_error("generate: decoding produced nothing");
  for (const auto& [text, score] : combined) out.candidates.push_back({text, score});
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  out.text = out.candidates.front().first;
  return out;
}

PipelineResult run_pipeline(const std::string& query,
                            const PipelineComponents& parts,
                            const PipelineConfig& cfg) {
  if (!parts.tokenizer || !parts.corpus || !parts.generator)
    throw std::runtime_error("run_pipeline: tokenizer, corpus, and generator required");
  if (cfg.use_dense && (!parts.dense || !parts.biencoder))
    throw std::runtime_error("run_pipeline: dense retrieval enabled but index-dense output missing");
  if (cfg.use_sparse && !parts.sparse)
    throw std::runtime_error("run_pipeline: sparse retrieval enabled but index-bm25 output missing");
  if (cfg.use_reranker && !parts.reranker)
    throw std::runtime_error("run_pipeline: reranker model missing");
  if (!cfg.use_dense && !cfg.use_sparse)
    throw std::runtime_error("run_pipeline: at least one retrieval source required");

  ScoredList dense_list, sparse_list;
  if (cfg.use_dense) {
    auto qv = embed_query(*parts.biencoder, *parts.tokenizer, query);
    dense_list = parts.dense->search(qv, cfg.n_dense);
  }
  if (cfg.use_sparse) sparse_list = parts.sparse->search(query, cfg.n_sparse);

  ScoredList ranked;
  std::vector<double> probs;
  if (cfg.use_reranker) {
    auto candidates = merge_union(dense_list, sparse_list);
    if (candidates.empty())
      throw std::runtime_error("run_pipeline: retrieval returned no candidates");
    auto rr = rerank(*parts.reranker, *parts.tokenizer, *parts.corpus, query,
                     candidates, cfg.renormalize_over_all ? candidates.size()
                                                          : cfg.top_k);
    if (cfg.renormalize_over_all) {
      probs = marginalize_sequence_probs(rr.all_logits);
      // Reorder probabilities to match the reranked list, then cut.
      std::map<PassageId, double> by_id;
      for (size_t i = 0; i < candidates.size(); ++i)
        by_id[candidates[i].id] = probs[i];
      ranked = rr.list;
      probs.clear();
      for (size_t i = 0; i < std::min(ranked.size(), cfg.top_k); ++i)
        probs.push_back(by_id[ranked[i].id]);
      if (ranked.size() > cfg.top_k) ranked.entries.resize(cfg.top_k);
    } else {
      ranked = rr.list;
      std::vector<double> kept;
      for (const auto& e : ranked.entries) kept.push_back(e.score);
      probs = marginalize_sequence_probs(kept);
    }
  } else if (cfg.use_dense && cfg.use_sparse) {
    ranked = inverse_rank_merge(dense_list, sparse_list, cfg.top_k);
    std::vector<double> kept;
    for (const auto& e : ranked.entries) kept.push_back(e.score);
    probs = marginalize_sequence_probs(kept);
  } else {
    ranked = cfg.use_dense ? dense_list : sparse_list;
    if (ranked.size() > cfg.top_k) ranked.entries.resize(cfg.top_k);
    std::vector<double> kept;
    for (const auto& e : ranked.entries) kept.push_back(e.score);
    probs = marginalize_sequence_probs(kept);
  }

  std::vector<std::string> texts;
  for (const auto& e : ranked.entries) {
    const long ord = parts.corpus->ordinal_of(e.id);
    if (ord < 0) throw std::runtime_error("run_pipeline: passage missing from corpus");
    texts.push_back(passage_text_for_models(parts.corpus->at(ord)));
  }
  PipelineResult res;
  res.output = generate(*parts.generator, *parts.tokenizer, query, texts, probs,
                        cfg.decode);
  res.provenance = ranked;
  return res;
}

}  // namespace rrgen
