#include "rrgen/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rrgen {

Tensor ParamSet::gaussian(const std::string& name, size_t rows, size_t cols,
                          Rng& rng, double stddev) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.gaussian() * stddev;
  Tensor t = Tensor::from_values(rows, cols, std::move(v), /*requires_grad=*/true);
  params_.push_back({prefix_ + "." + name, t});
  return t;
}

Tensor ParamSet::constant(const std::string& name, size_t rows, size_t cols, double v) {
  Tensor t = Tensor::zeros(rows, cols, /*requires_grad=*/true);
  std::fill(t.value().begin(), t.value().end(), v);
  params_.push_back({prefix_ + "." + name, t});
  return t;
}

Tensor multi_head_attention(const AttentionParams& p, const Tensor& q_input,
                            const Tensor& kv_input, size_t heads, bool causal) {
  const size_t d = p.wq.cols();
  const size_t dh = d / heads;
  Tensor q = matmul(q_input, p.wq);
  Tensor k = matmul(kv_input, p.wk);
  Tensor v = matmul(kv_input, p.wv);
  std::vector<Tensor> outs;
  for (size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
    if (causal) scores = causal_mask(scores);
    outs.push_back(matmul(softmax(scores), vh));
  }
  return matmul(concat_cols(outs), p.wo);
}

Tensor block_forward(const BlockParams& b, const Tensor& x, size_t heads,
                     bool causal, const Tensor* memory) {
  Tensor h = x;
  Tensor n1 = layer_norm(h, b.ln1_g, b.ln1_b);
  h = add(h, multi_head_attention(b.self_attn, n1, n1, heads, causal));
  if (memory) {
    Tensor nc = layer_norm(h, b.lnc_g, b.lnc_b);
    h = add(h, multi_head_attention(*b.cross_attn, nc, *memory, heads, false));
  }
  Tensor n2 = layer_norm(h, b.ln2_g, b.ln2_b);
  Tensor ff = matmul(gelu(add(matmul(n2, b.w1), b.b1)), b.w2);
  return add(h, add(ff, b.b2));
}

void EncoderStack::init(ParamSet& ps, const std::string& name, const ModelConfig& cfg,
                        Rng& rng, bool cross_attention) {
  heads = cfg.heads;
  if (cfg.dim % cfg.heads != 0)
    throw std::invalid_argument("ModelConfig: dim must be divisible by heads");
  const double wstd = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  tok_emb = ps.gaussian(name + ".tok_emb", cfg.vocab, cfg.dim, rng, 0.1);
  pos_emb = ps.gaussian(name + ".pos_emb", cfg.max_positions, cfg.dim, rng, 0.1);
  final_ln_g = ps.constant(name + ".final_ln_g", 1, cfg.dim, 1.0);
  final_ln_b = ps.constant(name + ".final_ln_b", 1, cfg.dim, 0.0);
  for (size_t l = 0; l < cfg.layers; ++l) {
    const std::string bn = name + ".block" + std::to_string(l);
    BlockParams b;
    b.self_attn = {ps.gaussian(bn + ".wq", cfg.dim, cfg.dim, rng, wstd),
                   ps.gaussian(bn + ".wk", cfg.dim, cfg.dim, rng, wstd),
                   ps.gaussian(bn + ".wv", cfg.dim, cfg.dim, rng, wstd),
                   ps.gaussian(bn + ".wo", cfg.dim, cfg.dim, rng, wstd)};
    if (cross_attention) {
      b.cross_attn = AttentionParams{
          ps.gaussian(bn + ".cwq", cfg.dim, cfg.dim, rng, wstd),
          ps.gaussian(bn + ".cwk", cfg.dim, cfg.dim, rng, wstd),
          ps.gaussian(bn + ".cwv", cfg.dim, cfg.dim, rng, wstd),
          ps.gaussian(bn + ".cwo", cfg.dim, cfg.dim, rng, wstd)};
      b.lnc_g = ps.constant(bn + ".lnc_g", 1, cfg.dim, 1.0);
      b.lnc_b = ps.constant(bn + ".lnc_b", 1, cfg.dim, 0.0);
    }
    b.ln1_g = ps.constant(bn + ".ln1_g", 1, cfg.dim, 1.0);
    b.ln1_b = ps.constant(bn + ".ln1_b", 1, cfg.dim, 0.0);
    b.ln2_g = ps.constant(bn + ".ln2_g", 1, cfg.dim, 1.0);
    b.ln2_b = ps.constant(bn + ".ln2_b", 1, cfg.dim, 0.0);
    b.w1 = ps.gaussian(bn + ".w1", cfg.dim, cfg.ff_dim, rng, wstd);
    b.b1 = ps.constant(bn + ".b1", 1, cfg.ff_dim, 0.0);
    b.w2 = ps.gaussian(bn + ".w2", cfg.ff_dim, cfg.dim, rng,
                       1.0 / std::sqrt(static_cast<double>(cfg.ff_dim)));
    b.b2 = ps.constant(bn + ".b2", 1, cfg.dim, 0.0);
    blocks.push_back(std::move(b));
  }
}

Tensor EncoderStack::forward(const std::vector<int>& ids, bool causal,
                             const Tensor* memory) const {
  if (ids.size() > pos_emb.rows())
    throw std::invalid_argument("EncoderStack: sequence of " +
                                std::to_string(ids.size()) +
                                " tokens exceeds max positions " +
                                std::to_string(pos_emb.rows()));
  std::vector<int> pos(ids.size());
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  Tensor x = add(embedding(tok_emb, ids), embedding(pos_emb, pos));
  for (const auto& b : blocks) x = block_forward(b, x, heads, causal, memory);
  return layer_norm(x, final_ln_g, final_ln_b);
}

BiEncoder::BiEncoder(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), all_("biencoder") {
  Rng rng(seed);
  query_stack_.init(all_, "query", cfg_, rng, false);
  passage_stack_.init(all_, "passage", cfg_, rng, false);
}

Tensor BiEncoder::encode(const EncoderStack& stack, const std::string& text,
                         const Tokenizer& tok) const {
  std::vector<int> ids = tok.encode(text);
  if (ids.size() > cfg_.max_positions) ids.resize(cfg_.max_positions);
  return mean_rows(stack.forward(ids, false));
}

Tensor BiEncoder::encode_query(const Tokenizer& tok, const std::string& text) const {
  return encode(query_stack_, text, tok);
}

Tensor BiEncoder::encode_passage(const Tokenizer& tok, const Passage& p) const {
  return encode_passage_text(tok, p.title + " " + p.text);
}

Tensor BiEncoder::encode_passage_text(const Tokenizer& tok, const std::string& text) const {
  return encode(passage_stack_, text, tok);
}

namespace {

std::vector<Parameter> filter_params(const std::vector<Parameter>& all,
                                     const std::string& needle) {
  std::vector<Parameter> out;
  for (const auto& p : all)
    if (p.name.find(needle) != std::string::npos) out.push_back(p);
  return out;
}

}  // namespace

std::vector<Parameter> BiEncoder::query_params() const {
  return filter_params(all_.params(), ".query.");
}

std::vector<Parameter> BiEncoder::passage_params() const {
  return filter_params(all_.params(), ".passage.");
}

CrossEncoder::CrossEncoder(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), ps_("reranker") {
  Rng rng(seed);
  stack_.init(ps_, "enc", cfg_, rng, false);
  head_w_ = ps_.gaussian("head_w", cfg_.dim, 1, rng,
                         1.0 / std::sqrt(static_cast<double>(cfg_.dim)));
  head_b_ = ps_.constant("head_b", 1, 1, 0.0);
}

Tensor CrossEncoder::score(const Tokenizer& tok, const std::string& query,
                           const std::string& passage_text) const {
  std::vector<int> q = Tokenizer::split(query).empty()
                           ? std::vector<int>{}
                           : tok.encode(query);
  if (q.empty()) throw std::invalid_argument("CrossEncoder: empty query");
  std::vector<int> p = tok.encode(passage_text);
  // [CLS] passage [SEP] query — truncate passage first, query carries the task.
  const size_t budget = cfg_.max_positions;
  size_t fixed = 2 + q.size();  // CLS + SEP + query
  if (fixed > budget) {
    q.resize(budget - 2);
    fixed = budget;
  }
  if (p.size() > budget - fixed) p.resize(budget - fixed);
  std::vector<int> ids;
  ids.push_back(Tokenizer::kCls);
  ids.insert(ids.end(), p.begin(), p.end());
  ids.push_back(Tokenizer::kSep);
  ids.insert(ids.end(), q.begin(), q.end());
  Tensor enc = stack_.forward(ids, false);
  Tensor cls = slice_rows(enc, 0, 1);
  return add(matmul(cls, head_w_), head_b_);
}

Tensor CrossEncoder::score_batch(const Tokenizer& tok, const std::string& query,
                                 const std::vector<std::string>& passage_texts) const {
  std::vector<Tensor> logits;
  for (const auto& p : passage_texts) logits.push_back(score(tok, query, p));
  return stack_scalars(logits);
}

Seq2Seq::Seq2Seq(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), ps_("seq2seq") {
  Rng rng(seed);
  encoder_.init(ps_, "enc", cfg_, rng, false);
  decoder_.init(ps_, "dec", cfg_, rng, true);
  out_w_ = ps_.constant("out_w", cfg_.dim, cfg_.vocab, 0.0);
  out_b_ = ps_.constant("out_b", 1, cfg_.vocab, 0.0);
}

Tensor Seq2Seq::encode(const std::vector<int>& source) const {
  return encoder_.forward(source, false);
}

Tensor Seq2Seq::decode_logits(const Tensor& memory,
                              const std::vector<int>& decoder_input) const {
  Tensor h = decoder_.forward(decoder_input, true, &memory);
  return add(matmul(h, out_w_), out_b_);
}

Tensor Seq2Seq::token_logprobs(const std::vector<int>& source,
                               const std::vector<int>& target) const {
  if (target.empty()) throw std::invalid_argument("token_logprobs: empty target");
  if (target.size() + 1 > cfg_.max_positions)
    throw std::invalid_argument("token_logprobs: target of " +
                                std::to_string(target.size()) +
                                " tokens exceeds max positions");
  std::vector<int> dec_in;
  dec_in.push_back(Tokenizer::kBos);
  dec_in.insert(dec_in.end(), target.begin(), target.end());
  std::vector<int> labels = target;
  labels.push_back(Tokenizer::kEos);
  Tensor memory = encode(source);
  Tensor logits = decode_logits(memory, dec_in);
  return gather_per_row(log_softmax(logits), labels);
}

std::vector<BeamHypothesis> Seq2Seq::beam_search(const std::vector<int>& source,
                                                 const BeamConfig& bc) const {
  if (bc.beam < 1) throw std::invalid_argument("beam_search: beam must be >= 1");
  if (bc.min_len > bc.max_len)
    throw std::invalid_argument("beam_search: min_len exceeds max_len");
  Tensor memory = encode(source);

  struct Partial {
    std::vector<int> tokens;  // generated so far (no BOS)
    double sum_logprob = 0.0;
  };
  auto penalized = [&bc](double sum_lp, size_t len) {
    return sum_lp / std::pow(static_cast<double>(std::max<size_t>(len, 1)),
                             bc.length_penalty);
  };

  std::vector<Partial> live = {{}};
  std::vector<BeamHypothesis> done;
  const size_t cap = std::min(bc.max_len, cfg_.max_positions - 1);

  for (size_t step = 0; step < cap && !live.empty(); ++step) {
    std::vector<Partial> expanded;
    for (const auto& h : live) {
      std::vector<int> dec_in;
      dec_in.push_back(Tokenizer::kBos);
      dec_in.insert(dec_in.end(), h.tokens.begin(), h.tokens.end());
      Tensor logits = decode_logits(memory, dec_in);
      Tensor lp = log_softmax(slice_rows(logits, dec_in.size() - 1, dec_in.size()));
      for (size_t v = 0; v < cfg_.vocab; ++v) {
        if (v == Tokenizer::kEos && h.tokens.size() + 1 < bc.min_len) continue;
        if (v == Tokenizer::kPad || v == Tokenizer::kBos) continue;
        Partial nh = h;
        nh.tokens.push_back(static_cast<int>(v));
        nh.sum_logprob += lp.at(0, v);
        expanded.push_back(std::move(nh));
      }
    }
    std::sort(expanded.begin(), expanded.end(), [](const Partial& a, const Partial& b) {
      if (a.sum_logprob != b.sum_logprob) return a.sum_logprob > b.sum_logprob;
      return a.tokens < b.tokens;
    });
    live.clear();
    size_t considered = 0;
    for (const auto& h : expanded) {
      if (considered >= bc.beam && live.size() >= bc.beam) break;
      const bool finished =
          h.tokens.back() == Tokenizer::kEos || h.tokens.size() >= cap;
      if (finished) {
        // Finished hypotheses within the top-beam expansions are kept; they
        // no longer occupy a live slot.
        if (considered < bc.beam)
          done.push_back({h.tokens, h.sum_logprob,
                          penalized(h.sum_logprob, h.tokens.size())});
      } else if (live.size() < bc.beam) {
        live.push_back(h);
      }
      ++considered;
    }
  }
  for (const auto& h : live)
    done.push_back({h.tokens, h.sum_logprob, penalized(h.sum_logprob, h.tokens.size())});
  std::sort(done.begin(), done.end(),
            [](const BeamHypothesis& a, const BeamHypothesis& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.tokens < b.tokens;
            });
  if (done.size() > bc.beam) done.resize(bc.beam);
  return done;
}

std::vector<int> build_generator_source(const Tokenizer& tok,
                                        const std::string& passage_text,
                                        const std::string& query,
                                        size_t max_positions) {
  std::vector<int> q = tok.encode(query);
  std::vector<int> p = tok.encode(passage_text);
  size_t fixed = 1 + q.size();  // SEP + query
  if (fixed > max_positions) {
    q.resize(max_positions - 1);
    fixed = max_positions;
  }
  if (p.size() > max_positions - fixed) p.resize(max_positions - fixed);
  std::vector<int> ids = p;
  ids.push_back(Tokenizer::kSep);
  ids.insert(ids.end(), q.begin(), q.end());
  return ids;
}

}  // namespace rrgen
