#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrgen/bm25.hpp"
#include "rrgen/corpus.hpp"
#include "rrgen/dense_index.hpp"
#include "rrgen/models.hpp"
#include "rrgen/tensor.hpp"

namespace rrgen {

struct DprTriple {
  std::string query;
  size_t positive_ordinal;   // p+ from a provenance document
  size_t negative_ordinal;   // hard negative: top non-provenance BM25 hit
};

struct RerankTrainItem {
  std::string query;
  std::vector<size_t> candidate_ordinals;  // merged dense+sparse retrieval
  std::vector<size_t> positive_indices;    // indices into candidates
};

enum class E2EMode { kCombineScores, kFreezeQueryEncoder, kOnlineKd };
enum class GenLossForm { kWeighted, kLiteral };

E2EMode parse_e2e_mode(const std::string& s);
std::string to_string(E2EMode m);

struct E2EConfig {
  E2EMode mode = E2EMode::kOnlineKd;
  double kd_temperature = 10.0;
  double kd_lr_scale = 1.0;
  size_t n_dense = 12;
  size_t n_sparse = 12;
  size_t top_k = 5;
  GenLossForm form = GenLossForm::kWeighted;
};

// Hard negative = highest-BM25 passage outside Prov; positive = highest-BM25
// provenance passage, falling back to the document's first passage.
// Instances with no locatable positive or no non-provenance hit are skipped.
std::vector<DprTriple> build_dpr_triples(const std::vector<TaskInstance>& instances,
                                         const InvertedIndex& sparse,
                                         const Corpus& corpus,
                                         size_t bm25_depth, size_t* skipped);

// Softmax over dot products against all 2B batch passages; mean over queries
// of -log softmax(positive).
Tensor dpr_stage1_loss(const BiEncoder& enc, const Tokenizer& tok,
                       const Corpus& corpus, const std::vector<DprTriple>& batch);

// RAG-style marginalization on dense scores: P(s_j) = softmax(q . p_j) over
// the retrieved top-k; gradient reaches the generator and the query encoder.
Tensor generation_loss(const Seq2Seq& gen, const BiEncoder& enc,
                       const Tokenizer& tok, const Corpus& corpus,
                       const VectorIndex& dense, const TaskInstance& inst,
                       size_t top_k, GenLossForm form);

// -sum over positive indices of log softmax(z_r).
Tensor reranker_stage1_loss(const CrossEncoder& reranker, const Tokenizer& tok,
                            const Corpus& corpus, const RerankTrainItem& item);

// D_KL(softmax(z_s/T) || softmax(z_t/T)) * T^2. Pass the teacher detached.
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature);

struct E2ELossResult {
  Tensor total;       // generation + kd_lr_scale * kd (when present)
  Tensor generation;
  Tensor kd;          // defined only in online-KD mode
  bool has_kd = false;
};

E2ELossResult e2e_loss(const BiEncoder& enc, const CrossEncoder& reranker,
                       const Seq2Seq& gen, const Tokenizer& tok,
                       const Corpus& corpus, const VectorIndex& dense,
                       const InvertedIndex& sparse, const TaskInstance& inst,
                       const E2EConfig& cfg);

// ----- phase orchestration -----

enum class Phase { kDpr, kGeneration, kRerank, kE2E };

Phase parse_phase(const std::string& s);
std::string to_string(Phase p);

struct ModelSet {
  ModelConfig config;
  Tokenizer tokenizer;
  std::unique_ptr<BiEncoder> biencoder;
  std::unique_ptr<CrossEncoder> reranker;
  std::unique_ptr<Seq2Seq> generator;

  static ModelSet fresh(const ModelConfig& cfg, Tokenizer tok, uint64_t seed);
  std::vector<Parameter> all_params() const;

  void save(const std::string& prefix) const;
  static ModelSet load(const std::string& prefix);
};

struct TrainConfig {
  Phase phase = Phase::kDpr;
  size_t epochs = 2;
  size_t batch_size = 16;   // scaled down from the reference setting of 128
  double learn_rate = 5e-2;
  double max_grad_norm = 1.0;
  double weight_decay = 0.0;
  double warmup_frac = 0.1;
  uint64_t seed = 42;
  size_t gen_top_k = 5;
  GenLossForm form = GenLossForm::kWeighted;
  E2EConfig e2e;
};

struct PhaseLogEntry {
  size_t step = 0;
  std::string phase;
  double loss = 0.0;
  std::optional<double> kd_loss;
};

struct PhaseResult {
  std::vector<PhaseLogEntry> log;
  size_t skipped = 0;
};

// Runs one phase in place. The dense index is a required input for the
// generation, rerank, and e2e phases (built after DPR Stage 1; the passage
// encoder is frozen from then on).
PhaseResult train_phase(ModelSet& models, const Corpus& corpus,
                        const std::vector<TaskInstance>& train,
                        const InvertedIndex& sparse, const VectorIndex* dense,
                        const TrainConfig& cfg);

}  // namespace rrgen
