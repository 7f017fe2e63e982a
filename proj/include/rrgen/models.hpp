#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrgen/corpus.hpp"
#include "rrgen/optim.hpp"
#include "rrgen/tensor.hpp"
#include "rrgen/tokenizer.hpp"

namespace rrgen {

struct ModelConfig {
  size_t vocab = 0;  // including special tokens
  size_t dim = 64;
  size_t heads = 2;
  size_t layers = 2;
  size_t ff_dim = 128;
  size_t max_positions = 64;
};

// Named-parameter factory shared by the three models.
class ParamSet {
 public:
  explicit ParamSet(std::string prefix) : prefix_(std::move(prefix)) {}

  Tensor gaussian(const std::string& name, size_t rows, size_t cols, Rng& rng,
                  double stddev);
  Tensor constant(const std::string& name, size_t rows, size_t cols, double v);

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

 private:
  std::string prefix_;
  std::vector<Parameter> params_;
};

struct AttentionParams {
  Tensor wq, wk, wv, wo;
};

struct BlockParams {
  AttentionParams self_attn;
  std::optional<AttentionParams> cross_attn;
  Tensor ln1_g, ln1_b;
  Tensor lnc_g, lnc_b;  // only with cross attention
  Tensor ln2_g, ln2_b;
  Tensor w1, b1, w2, b2;
};

Tensor multi_head_attention(const AttentionParams& p, const Tensor& q_input,
                            const Tensor& kv_input, size_t heads, bool causal);
Tensor block_forward(const BlockParams& b, const Tensor& x, size_t heads,
                     bool causal, const Tensor* memory);

// Token+position embedding plus transformer blocks over one sequence.
struct EncoderStack {
  Tensor tok_emb, pos_emb;
  Tensor final_ln_g, final_ln_b;
  std::vector<BlockParams> blocks;
  size_t heads = 1;

  void init(ParamSet& ps, const std::string& name, const ModelConfig& cfg,
            Rng& rng, bool cross_attention);
  Tensor forward(const std::vector<int>& ids, bool causal,
                 const Tensor* memory = nullptr) const;
};

// Representation model: independent query and passage towers, relevance is
// the inner product of the two mean-pooled encodings.
class BiEncoder {
 public:
  BiEncoder(const ModelConfig& cfg, uint64_t seed);

  Tensor encode_query(const Tokenizer& tok, const std::string& text) const;
  Tensor encode_passage(const Tokenizer& tok, const Passage& p) const;
  Tensor encode_passage_text(const Tokenizer& tok, const std::string& text) const;

  std::vector<Parameter>& params() { return all_.params(); }
  std::vector<Parameter> query_params() const;
  std::vector<Parameter> passage_params() const;
  const ModelConfig& config() const { return cfg_; }

 private:
  Tensor encode(const EncoderStack& stack, const std::string& text,
                const Tokenizer& tok) const;
  ModelConfig cfg_;
  ParamSet all_;
  EncoderStack query_stack_, passage_stack_;
};

// Interaction model: cross attention over "[CLS] passage [SEP] query",
// scalar relevance head on the first position.
class CrossEncoder {
 public:
  CrossEncoder(const ModelConfig& cfg, uint64_t seed);

  // Differentiable scalar logit. Passage is truncated first when the pair
  // exceeds max_positions. Throws on an empty query.
  Tensor score(const Tokenizer& tok, const std::string& query,
               const std::string& passage_text) const;
  // Logits z_r aligned with the input order, as a [1,n] tensor.
  Tensor score_batch(const Tokenizer& tok, const std::string& query,
                     const std::vector<std::string>& passage_texts) const;

  std::vector<Parameter>& params() { return ps_.params(); }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_;
  EncoderStack stack_;
  Tensor head_w_, head_b_;
};

struct BeamConfig {
  size_t beam = 6;
  size_t min_len = 2;
  size_t max_len = 64;
  double length_penalty = 1.0;
};

struct BeamHypothesis {
  std::vector<int> tokens;  // generated tokens, [EOS]-terminated unless cut
  double sum_logprob = 0.0;
  double score = 0.0;       // sum_logprob / len^length_penalty
};

// Encoder-decoder transformer with teacher forcing and beam search.
class Seq2Seq {
 public:
  Seq2Seq(const ModelConfig& cfg, uint64_t seed);

  Tensor encode(const std::vector<int>& source) const;  // [Ls, d]
  // Logits for each decoder input position, [Lt, V].
  Tensor decode_logits(const Tensor& memory, const std::vector<int>& decoder_input) const;
  // Teacher-forced log P(t_i | source, t_<i), a [L+1, 1] column including the
  // final [EOS] step. Target must be non-empty and fit max_positions.
  Tensor token_logprobs(const std::vector<int>& source,
                        const std::vector<int>& target) const;

  std::vector<BeamHypothesis> beam_search(const std::vector<int>& source,
                                          const BeamConfig& bc) const;

  std::vector<Parameter>& params() { return ps_.params(); }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_;
  EncoderStack encoder_, decoder_;
  Tensor out_w_, out_b_;  // zero-initialized head: uniform distribution at init
};

// "<passage> [SEP] <query>" token sequence fed to the generator; the passage
// is truncated first when over budget.
std::vector<int> build_generator_source(const Tokenizer& tok,
                                        const std::string& passage_text,
                                        const std::string& query,
                                        size_t max_positions);

}  // namespace rrgen
