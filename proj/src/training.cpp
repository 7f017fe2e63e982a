#include "rrgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rrgen/checkpoint.hpp"
#include "rrgen/optim.hpp"
#include "rrgen/pipeline.hpp"

namespace rrgen {

E2EMode parse_e2e_mode(const std::string& s) {
  if (s == "combine") return E2EMode::kCombineScores;
  if (s == "freeze") return E2EMode::kFreezeQueryEncoder;
  if (s == "kd") return E2EMode::kOnlineKd;
  throw std::invalid_argument("unknown e2e mode '" + s + "' (combine|freeze|kd)");
}

std::string to_string(E2EMode m) {
  switch (m) {
    case E2EMode::kCombineScores: return "combine";
    case E2EMode::kFreezeQueryEncoder: return "freeze";
    case E2EMode::kOnlineKd: return "kd";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  if (s == "dpr") return Phase::kDpr;
  if (s == "gen") return Phase::kGeneration;
  if (s == "rerank") return Phase::kRerank;
  if (s == "e2e") return Phase::kE2E;
  throw std::invalid_argument("unknown phase '" + s + "' (dpr|gen|rerank|e2e)");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kDpr: return "dpr";
    case Phase::kGeneration: return "gen";
    case Phase::kRerank: return "rerank";
    case Phase::kE2E: return "e2e";
  }
  return "?";
}

std::vector<DprTriple> build_dpr_triples(const std::vector<TaskInstance>& instances,
                                         const InvertedIndex& sparse,
                                         const Corpus& corpus,
                                         size_t bm25_depth, size_t* skipped) {
  std::vector<DprTriple> out;
  size_t skip = 0;
  for (const auto& inst : instances) {
    if (inst.provenance.empty()) { ++skip; continue; }
    ScoredList hits = sparse.search(inst.query, bm25_depth);
    long positive = -1, negative = -1;
    for (const auto& h : hits.entries) {
      const bool is_prov = inst.provenance.count(h.id.doc_id) > 0;
      if (is_prov && positive < 0) positive = corpus.ordinal_of(h.id);
      if (!is_prov && negative < 0) negative = corpus.ordinal_of(h.id);
      if (positive >= 0 && negative >= 0) break;
    }
    if (positive < 0) {
      // Positive not retrieved; fall back to the document's first passage.
      for (const auto& doc : inst.provenance) {
        auto ords = corpus.doc_passages(doc);
        if (!ords.empty()) { positive = static_cast<long>(ords[0]); break; }
      }
    }
    if (positive < 0 || negative < 0) { ++skip; continue; }
    out.push_back({inst.query, static_cast<size_t>(positive),
                   static_cast<size_t>(negative)});
  }
  if (skipped) *skipped = skip;
  return out;
}

Tensor dpr_stage1_loss(const BiEncoder& enc, const Tokenizer& tok,
                       const Corpus& corpus, const std::vector<DprTriple>& batch) {
  if (batch.empty()) throw std::invalid_argument("dpr_stage1_loss: empty batch");
  std::vector<Tensor> queries, passages;
  std::vector<int> targets;
  for (size_t i = 0; i < batch.size(); ++i) {
    queries.push_back(enc.encode_query(tok, batch[i].query));
    passages.push_back(enc.encode_passage(tok, corpus.at(batch[i].positive_ordinal)));
    passages.push_back(enc.encode_passage(tok, corpus.at(batch[i].negative_ordinal)));
    targets.push_back(static_cast<int>(2 * i));
  }
  Tensor q = concat_rows(queries);                  // [B, d]
  Tensor p = concat_rows(passages);                 // [2B, d]
  Tensor scores = matmul(q, transpose(p));          // [B, 2B]
  return cross_entropy(scores, targets);
}

namespace {

std::vector<int> target_tokens(const Tokenizer& tok, const std::string& target) {
  return tok.encode(target);
}

// Sum of teacher-forced log-probs for one passage context.
Tensor sequence_logprob(const Seq2Seq& gen, const Tokenizer& tok,
                        const std::string& passage_text, const std::string& query,
                        const std::vector<int>& target) {
  auto source = build_generator_source(tok, passage_text, query,
                                       gen.config().max_positions);
  return sum(gen.token_logprobs(source, target));
}

Tensor weighted_generation_loss(const Tensor& logits,
                                const std::vector<Tensor>& seq_logprobs,
                                GenLossForm form, size_t target_len) {
  Tensor lps = stack_scalars(seq_logprobs);  // [1,k]
  if (form == GenLossForm::kWeighted) {
    // -sum_j P(s_j) * sum_i log P(t_i|s_j)
    return scale(sum(mul(softmax(logits), lps)), -1.0);
  }
  // Literal summed form: -sum_{i,j} log(P(t_i|s_j) * P(s_j)).
  Tensor lsm = log_softmax(logits);
  return scale(add(sum(lps), scale(sum(lsm), static_cast<double>(target_len))), -1.0);
}

}  // namespace

Tensor generation_loss(const Seq2Seq& gen, const BiEncoder& enc,
                       const Tokenizer& tok, const Corpus& corpus,
                       const VectorIndex& dense, const TaskInstance& inst,
                       size_t top_k, GenLossForm form) {
  Tensor q_vec = enc.encode_query(tok, inst.query);
  ScoredList hits = dense.search(q_vec.value(), std::min(top_k, dense.size()));
  if (hits.empty()) throw std::runtime_error("generation_loss: empty retrieval");
  std::vector<Tensor> dense_scores, seq_lps;
  const auto target = target_tokens(tok, inst.target);
  for (const auto& h : hits.entries) {
    const long ord = dense.ordinal_of(h.id);
    Tensor row = Tensor::from_values(1, dense.dim(), dense.row(ord));
    dense_scores.push_back(dot(q_vec, row));
    const long cord = corpus.ordinal_of(h.id);
    seq_lps.push_back(sequence_logprob(
        gen, tok, passage_text_for_models(corpus.at(cord)), inst.query, target));
  }
  return weighted_generation_loss(stack_scalars(dense_scores), seq_lps, form,
                                  target.size() + 1);
}

Tensor reranker_stage1_loss(const CrossEncoder& reranker, const Tokenizer& tok,
                            const Corpus& corpus, const RerankTrainItem& item) {
  if (item.positive_indices.empty())
    throw std::invalid_argument("reranker_stage1_loss: no positive indices");
  std::vector<std::string> texts;
  for (size_t ord : item.candidate_ordinals)
    texts.push_back(passage_text_for_models(corpus.at(ord)));
  Tensor z = reranker.score_batch(tok, item.query, texts);
  Tensor lsm = log_softmax(z);
  std::vector<Tensor> picked;
  for (size_t i : item.positive_indices)
    picked.push_back(slice_cols(lsm, i, i + 1));
  return scale(sum(stack_scalars(picked)), -1.0);
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("kd_loss: temperature must be > 0");
  if (student_logits.cols() != teacher_logits.cols() ||
      student_logits.rows() != 1 || teacher_logits.rows() != 1)
    throw std::invalid_argument("kd_loss: logit shape mismatch");
  Tensor zs = scale(student_logits, 1.0 / temperature);
  Tensor zt = scale(teacher_logits, 1.0 / temperature);
  Tensor ps = softmax(zs);
  Tensor kl = sum(mul(ps, sub(log_softmax(zs), log_softmax(zt))));
  return scale(kl, temperature * temperature);
}

E2ELossResult e2e_loss(const BiEncoder& enc, const CrossEncoder& reranker,
                       const Seq2Seq& gen, const Tokenizer& tok,
                       const Corpus& corpus, const VectorIndex& dense,
                       const InvertedIndex& sparse, const TaskInstance& inst,
                       const E2EConfig& cfg) {
  Tensor q_vec = enc.encode_query(tok, inst.query);
  ScoredList dense_hits =
      dense.search(q_vec.value(), std::min(cfg.n_dense, dense.size()));
  ScoredList sparse_hits = sparse.search(inst.query, cfg.n_sparse);
  auto candidates = merge_union(dense_hits, sparse_hits);
  if (candidates.empty()) throw std::runtime_error("e2e_loss: no candidates");

  std::vector<std::string> texts;
  for (const auto& c : candidates)
    texts.push_back(passage_text_for_models(corpus.at(corpus.ordinal_of(c.id))));
  Tensor z_r = reranker.score_batch(tok, inst.query, texts);  // [1, m]

  // Top-k by reranker logit, ties by ascending passage id.
  std::vector<size_t> order(candidates.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (z_r.at(0, a) != z_r.at(0, b)) return z_r.at(0, a) > z_r.at(0, b);
    return candidates[a].id < candidates[b].id;
  });
  const size_t k = std::min(cfg.top_k, order.size());
  std::vector<Tensor> kept;
  for (size_t i = 0; i < k; ++i)
    kept.push_back(slice_cols(z_r, order[i], order[i] + 1));
  Tensor zk = stack_scalars(kept);  // [1,k] retained reranker logits

  Tensor weights = zk;
  if (cfg.mode == E2EMode::kCombineScores) {
    // Pathological by design: dense scores re-enter the marginalization.
    std::vector<Tensor> d_scores;
    for (size_t i = 0; i < k; ++i) {
      const long ord = dense.ordinal_of(candidates[order[i]].id);
      Tensor row = Tensor::from_values(1, dense.dim(), dense.row(ord));
      d_scores.push_back(dot(q_vec, row));
    }
    weights = add(zk, log_softmax(stack_scalars(d_scores)));
  }

  const auto target = target_tokens(tok, inst.target);
  std::vector<Tensor> seq_lps;
  for (size_t i = 0; i < k; ++i)
    seq_lps.push_back(
        sequence_logprob(gen, tok, texts[order[i]], inst.query, target));

  E2ELossResult res;
  res.generation =
      weighted_generation_loss(weights, seq_lps, cfg.form, target.size() + 1);
  res.total = res.generation;
  if (cfg.mode == E2EMode::kOnlineKd) {
    // Student/teacher over every dense-retrieved passage, not just the top-k;
    // dense hits occupy the head of the merged candidate list.
    const size_t n = dense_hits.size();
    if (n > 0) {
      std::vector<Tensor> student;
      for (size_t i = 0; i < n; ++i) {
        const long ord = dense.ordinal_of(candidates[i].id);
        Tensor row = Tensor::from_values(1, dense.dim(), dense.row(ord));
        student.push_back(dot(q_vec, row));
      }
      Tensor teacher = slice_cols(z_r, 0, n).detach();
      res.kd = kd_loss(stack_scalars(student), teacher, cfg.kd_temperature);
      res.has_kd = true;
      res.total = add(res.generation, scale(res.kd, cfg.kd_lr_scale));
    }
  }
  return res;
}

ModelSet ModelSet::fresh(const ModelConfig& cfg, Tokenizer tok, uint64_t seed) {
  ModelSet ms;
  ms.config = cfg;
  ms.tokenizer = std::move(tok);
  ms.biencoder = std::make_unique<BiEncoder>(cfg, seed + 1);
  ms.reranker = std::make_unique<CrossEncoder>(cfg, seed + 2);
  ms.generator = std::make_unique<Seq2Seq>(cfg, seed + 3);
  return ms;
}

std::vector<Parameter> ModelSet::all_params() const {
  std::vector<Parameter> all = biencoder->params();
  for (const auto& p : reranker->params()) all.push_back(p);
  for (const auto& p : generator->params()) all.push_back(p);
  return all;
}

void ModelSet::save(const std::string& prefix) const {
  nlohmann::json cfg = {{"vocab", config.vocab},     {"dim", config.dim},
                        {"heads", config.heads},     {"layers", config.layers},
                        {"ff_dim", config.ff_dim},   {"max_positions", config.max_positions}};
  save_checkpoint(prefix, all_params(), cfg);
  tokenizer.save(prefix + ".vocab.json");
}

ModelSet ModelSet::load(const std::string& prefix) {
  nlohmann::json cfg = read_checkpoint_config(prefix);
  ModelConfig mc;
  mc.vocab = cfg.at("vocab");
  mc.dim = cfg.at("dim");
  mc.heads = cfg.at("heads");
  mc.layers = cfg.at("layers");
  mc.ff_dim = cfg.at("ff_dim");
  mc.max_positions = cfg.at("max_positions");
  ModelSet ms = fresh(mc, Tokenizer::load(prefix + ".vocab.json"), 0);
  auto params = ms.all_params();
  load_checkpoint(prefix, params);
  return ms;
}

namespace {

std::vector<Parameter> exclude_params(const std::vector<Parameter>& all,
                                      const std::string& needle) {
  std::vector<Parameter> out;
  for (const auto& p : all)
    if (p.name.find(needle) == std::string::npos) out.push_back(p);
  return out;
}

}  // namespace

PhaseResult train_phase(ModelSet& models, const Corpus& corpus,
                        const std::vector<TaskInstance>& train,
                        const InvertedIndex& sparse, const VectorIndex* dense,
                        const TrainConfig& cfg) {
  PhaseResult result;
  Rng rng(cfg.seed);
  const Tokenizer& tok = models.tokenizer;

  if (cfg.phase != Phase::kDpr && dense == nullptr)
    throw std::runtime_error("train_phase: phase '" + to_string(cfg.phase) +
                             "' requires the dense index built after phase dpr");

  // Which parameters each phase updates. The passage encoder is frozen after
  // Stage 1, so the dense index stays valid.
  std::vector<Parameter> params;
  switch (cfg.phase) {
    case Phase::kDpr:
      params = models.biencoder->params();
      break;
    case Phase::kGeneration: {
      params = models.generator->params();
      for (const auto& p : models.biencoder->query_params()) params.push_back(p);
      break;
    }
    case Phase::kRerank:
      params = models.reranker->params();
      break;
    case Phase::kE2E: {
      params = models.generator->params();
      for (const auto& p : models.reranker->params()) params.push_back(p);
      if (cfg.e2e.mode != E2EMode::kFreezeQueryEncoder)
        for (const auto& p : models.biencoder->query_params()) params.push_back(p);
      break;
    }
  }

  // Per-phase training items.
  std::vector<DprTriple> triples;
  std::vector<RerankTrainItem> rerank_items;
  std::vector<const TaskInstance*> instances;
  if (cfg.phase == Phase::kDpr) {
    triples = build_dpr_triples(train, sparse, corpus,
                                std::max<size_t>(cfg.e2e.n_sparse, 12),
                                &result.skipped);
    if (triples.empty()) throw std::runtime_error("train_phase: no usable DPR triples");
  } else if (cfg.phase == Phase::kRerank) {
    for (const auto& inst : train) {
      if (inst.provenance.empty()) { ++result.skipped; continue; }
      auto qv = embed_query(*models.biencoder, tok, inst.query);
      ScoredList d = dense->search(qv, std::min(cfg.e2e.n_dense, dense->size()));
      ScoredList s = sparse.search(inst.query, cfg.e2e.n_sparse);
      auto cands = merge_union(d, s);
      RerankTrainItem item;
      item.query = inst.query;
      for (size_t i = 0; i < cands.size(); ++i) {
        item.candidate_ordinals.push_back(corpus.ordinal_of(cands[i].id));
        if (inst.provenance.count(cands[i].id.doc_id))
          item.positive_indices.push_back(i);
      }
      if (item.positive_indices.empty()) { ++result.skipped; continue; }
      rerank_items.push_back(std::move(item));
    }
    if (rerank_items.empty())
      throw std::runtime_error("train_phase: no usable rerank items");
  } else {
    for (const auto& inst : train) instances.push_back(&inst);
  }

  const size_t n_items = cfg.phase == Phase::kDpr      ? triples.size()
                         : cfg.phase == Phase::kRerank ? rerank_items.size()
                                                       : instances.size();
  const size_t steps_per_epoch = (n_items + cfg.batch_size - 1) / cfg.batch_size;
  const size_t total_steps = steps_per_epoch * cfg.epochs;
  size_t step = 0;

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(n_items);
    for (size_t i = 0; i < n_items; ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t start = 0; start < n_items; start += cfg.batch_size) {
      const size_t end = std::min(start + cfg.batch_size, n_items);
      zero_grads(params);
      std::vector<Tensor> losses, kd_terms;
      Tensor batch_loss;
      if (cfg.phase == Phase::kDpr) {
        std::vector<DprTriple> batch;
        for (size_t i = start; i < end; ++i) batch.push_back(triples[order[i]]);
        batch_loss = dpr_stage1_loss(*models.biencoder, tok, corpus, batch);
      } else if (cfg.phase == Phase::kRerank) {
        for (size_t i = start; i < end; ++i)
          losses.push_back(reranker_stage1_loss(*models.reranker, tok, corpus,
                                                rerank_items[order[i]]));
        batch_loss = mean(stack_scalars(losses));
      } else if (cfg.phase == Phase::kGeneration) {
        for (size_t i = start; i < end; ++i)
          losses.push_back(generation_loss(*models.generator, *models.biencoder,
                                           tok, corpus, *dense,
                                           *instances[order[i]], cfg.gen_top_k,
                                           cfg.form));
        batch_loss = mean(stack_scalars(losses));
      } else {
        for (size_t i = start; i < end; ++i) {
          auto r = e2e_loss(*models.biencoder, *models.reranker,
                            *models.generator, tok, corpus, *dense, sparse,
                            *instances[order[i]], cfg.e2e);
          losses.push_back(r.total);
          if (r.has_kd) kd_terms.push_back(r.kd);
        }
        batch_loss = mean(stack_scalars(losses));
      }
      backward(batch_loss);
      SgdConfig sgd;
      sgd.learn_rate = lr_at_step(cfg.learn_rate, step, total_steps, cfg.warmup_frac);
      sgd.max_grad_norm = cfg.max_grad_norm;
      sgd.weight_decay = cfg.weight_decay;
      sgd_step(params, sgd);
      PhaseLogEntry entry;
      entry.step = step;
      entry.phase = to_string(cfg.phase);
      entry.loss = batch_loss.item();
      if (!kd_terms.empty()) {
        double s = 0.0;
        for (const auto& t : kd_terms) s += t.item();
        entry.kd_loss = s / static_cast<double>(kd_terms.size());
      }
      result.log.push_back(entry);
      ++step;
    }
  }
  return result;
}

}  // namespace rrgen
