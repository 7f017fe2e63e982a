#include "rrgen/run_config.hpp"

#include <fstream>
#include <stdexcept>

namespace rrgen {

using nlohmann::json;

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    c.corpus_path = p.value("corpus", "");
    c.train_path = p.value("train", "");
    c.dev_path = p.value("dev", "");
    c.test_path = p.value("test", "");
    c.run_dir = p.value("run_dir", "");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.dim = m.value("dim", c.model.dim);
    c.model.heads = m.value("heads", c.model.heads);
    c.model.layers = m.value("layers", c.model.layers);
    c.model.ff_dim = m.value("ff_dim", c.model.ff_dim);
    c.model.max_positions = m.value("max_positions", c.model.max_positions);
  }
  if (j.contains("retrieval")) {
    const auto& r = j["retrieval"];
    c.n_dense = r.value("n_dense", c.n_dense);
    c.n_sparse = r.value("n_sparse", c.n_sparse);
    c.top_k = r.value("top_k", c.top_k);
    c.bm25_k1 = r.value("k1", c.bm25_k1);
    c.bm25_b = r.value("b", c.bm25_b);
    c.dense_mode = r.value("dense_mode", c.dense_mode);
    if (r.contains("hnsw")) {
      const auto& h = r["hnsw"];
      c.hnsw.m = h.value("m", c.hnsw.m);
      c.hnsw.ef_construction = h.value("ef_construction", c.hnsw.ef_construction);
      c.hnsw.ef_search = h.value("ef_search", c.hnsw.ef_search);
    }
  }
  if (j.contains("decode")) {
    const auto& d = j["decode"];
    c.decode.beam = d.value("beam", c.decode.beam);
    c.decode.min_len = d.value("min_len", c.decode.min_len);
    c.decode.max_len = d.value("max_len", c.decode.max_len);
    c.decode.length_penalty = d.value("length_penalty", c.decode.length_penalty);
  }
  if (j.contains("e2e")) {
    const auto& e = j["e2e"];
    c.e2e.mode = parse_e2e_mode(e.value("mode", "kd"));
    c.e2e.kd_temperature = e.value("kd_temperature", c.e2e.kd_temperature);
    c.e2e.kd_lr_scale = e.value("kd_lr_scale", c.e2e.kd_lr_scale);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.epochs = t.value("epochs", c.epochs);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.learn_rate = t.value("learn_rate", c.learn_rate);
    c.max_grad_norm = t.value("max_grad_norm", c.max_grad_norm);
    c.weight_decay = t.value("weight_decay", c.weight_decay);
    c.warmup_frac = t.value("warmup_frac", c.warmup_frac);
    c.loss_form = t.value("loss_form", c.loss_form);
  }
  if (c.e2e.kd_temperature <= 0.0)
    throw std::invalid_argument("config: kd_temperature must be > 0");
  if (c.n_dense < 1 || c.n_sparse < 1 || c.top_k < 1)
    throw std::invalid_argument("config: retrieval counts must be >= 1");
  c.e2e.n_dense = c.n_dense;
  c.e2e.n_sparse = c.n_sparse;
  c.e2e.top_k = c.top_k;
  c.e2e.form = c.loss_form == "literal" ? GenLossForm::kLiteral : GenLossForm::kWeighted;
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return from_json(json::parse(in));
}

json RunConfig::to_json() const {
  return json{
      {"seed", seed},
      {"paths", {{"corpus", corpus_path}, {"train", train_path}, {"dev", dev_path},
                 {"test", test_path}, {"run_dir", run_dir}}},
      {"model", {{"dim", model.dim}, {"heads", model.heads}, {"layers", model.layers},
                 {"ff_dim", model.ff_dim}, {"max_positions", model.max_positions}}},
      {"retrieval", {{"n_dense", n_dense}, {"n_sparse", n_sparse}, {"top_k", top_k},
                     {"k1", bm25_k1}, {"b", bm25_b}, {"dense_mode", dense_mode},
                     {"hnsw", {{"m", hnsw.m}, {"ef_construction", hnsw.ef_construction},
                               {"ef_search", hnsw.ef_search}}}}},
      {"decode", {{"beam", decode.beam}, {"min_len", decode.min_len},
                  {"max_len", decode.max_len},
                  {"length_penalty", decode.length_penalty}}},
      {"e2e", {{"mode", to_string(e2e.mode)}, {"kd_temperature", e2e.kd_temperature},
               {"kd_lr_scale", e2e.kd_lr_scale}}},
      {"train", {{"epochs", epochs}, {"batch_size", batch_size},
                 {"learn_rate", learn_rate}, {"max_grad_norm", max_grad_norm},
                 {"weight_decay", weight_decay}, {"warmup_frac", warmup_frac},
                 {"loss_form", loss_form}}}};
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json().dump(2) << "\n";
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig p;
  p.n_dense = n_dense;
  p.n_sparse = n_sparse;
  p.top_k = top_k;
  p.decode = decode;
  return p;
}

TrainConfig RunConfig::train_config(Phase phase) const {
  TrainConfig t;
  t.phase = phase;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learn_rate = learn_rate;
  t.max_grad_norm = max_grad_norm;
  t.weight_decay = weight_decay;
  t.warmup_frac = warmup_frac;
  t.seed = seed;
  t.gen_top_k = top_k;
  t.form = e2e.form;
  t.e2e = e2e;
  return t;
}

}  // namespace rrgen
