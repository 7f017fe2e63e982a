// Command-line entry point: ingestion, indexing, four-phase training,
// inference, evaluation, and the ablation grid.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rrgen/bm25.hpp"
#include "rrgen/checkpoint.hpp"
#include "rrgen/corpus.hpp"
#include "rrgen/dense_index.hpp"
#include "rrgen/metrics.hpp"
#include "rrgen/pipeline.hpp"
#include "rrgen/run_config.hpp"
#include "rrgen/synthetic.hpp"
#include "rrgen/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rrgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::string default_run_dir(uint64_t seed) {
  const char* root = std::getenv("RRGEN_RUN_ROOT");
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now).count();
  return std::string(root ? root : "runs") + "/run-" + std::to_string(secs) +
         "-seed" + std::to_string(seed);
}

void write_snapshot(const RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  cfg.save(dir + "/config.resolved.json");
}

// Checkpoints land under a temporary prefix first so a failed run leaves no
// partial checkpoint behind.
void save_models_atomic(const ModelSet& models, const std::string& prefix) {
  const std::string tmp = prefix + ".tmp";
  models.save(tmp);
  fs::rename(tmp + ".json", prefix + ".json");
  fs::rename(tmp + ".bin", prefix + ".bin");
  fs::rename(tmp + ".vocab.json", prefix + ".vocab.json");
}

Tokenizer build_tokenizer(const Corpus& corpus,
                          const std::vector<TaskInstance>& instances) {
  Tokenizer tok;
  for (const auto& p : corpus.passages()) tok.add_text(p.title + " " + p.text);
  for (const auto& i : instances) {
    tok.add_text(i.query);
    tok.add_text(i.target);
  }
  tok.freeze();
  return tok;
}

struct LoadedRun {
  Corpus corpus;
  InvertedIndex sparse;
  VectorIndex dense;
  ModelSet models;
};

LoadedRun load_run(const std::string& corpus_path, const std::string& run_dir,
                   const std::string& ckpt_name) {
  LoadedRun r{load_corpus(corpus_path), {}, {}, {}};
  const std::string bm25_path = run_dir + "/bm25.idx";
  if (!fs::exists(bm25_path))
    throw std::runtime_error("missing " + bm25_path + "; run `rrgen index-bm25` first");
  r.sparse = InvertedIndex::load(bm25_path);
  const std::string dense_prefix = run_dir + "/dense";
  if (!checkpoint_exists(dense_prefix))
    throw std::runtime_error("missing dense index in " + run_dir +
                             "; run `rrgen index-dense` first");
  r.dense = VectorIndex::load(dense_prefix);
  const std::string ckpt = run_dir + "/" + ckpt_name;
  if (!checkpoint_exists(ckpt))
    throw std::runtime_error("missing checkpoint " + ckpt);
  r.models = ModelSet::load(ckpt);
  return r;
}

void write_predictions(const std::string& path,
                       const std::vector<TaskInstance>& instances,
                       const std::vector<PipelineResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t i = 0; i < instances.size(); ++i) {
    json prov = json::array();
    for (const auto& e : results[i].provenance.entries) prov.push_back(e.id.doc_id);
    json j = {{"id", instances[i].id},
              {"output", results[i].output.text},
              {"provenance", prov},
              {"sequence_scores", results[i].output.sequence_scores}};
    out << j.dump() << "\n";
  }
}

MetricsReport evaluate_files(const std::string& pred_path, const std::string& gold_path) {
  auto golds = load_instances(gold_path);
  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& g : golds) by_id[g.id] = &g;
  std::ifstream in(pred_path);
  if (!in) throw std::runtime_error("cannot open " + pred_path);
  std::vector<InstanceScore> scores;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    auto it = by_id.find(j.at("id").get<std::string>());
    if (it == by_id.end())
      throw std::runtime_error("prediction id '" + j.at("id").get<std::string>() +
                               "' not in gold file");
    InstanceScore s;
    s.id = it->first;
    s.prediction = j.at("output").get<std::string>();
    for (const auto& d : j.value("provenance", json::array()))
      s.ranked_doc_ids.push_back(d.get<std::string>());
    s.golds = {it->second->target};
    s.provenance = it->second->provenance;
    scores.push_back(std::move(s));
  }
  return aggregate_metrics(scores);
}

int cmd_synth(uint64_t seed, size_t docs, size_t instances, size_t vocab,
              const std::string& out_dir) {
  auto task = generate_synthetic_task(seed, docs, instances, vocab);
  fs::create_directories(out_dir);
  save_corpus(task.corpus, out_dir + "/corpus.jsonl");
  save_instances(task.train, out_dir + "/train.jsonl");
  save_instances(task.dev, out_dir + "/dev.jsonl");
  save_instances(task.test, out_dir + "/test.jsonl");
  std::cout << "wrote " << task.corpus.size() << " passages, "
            << task.train.size() << "/" << task.dev.size() << "/"
            << task.test.size() << " train/dev/test instances to " << out_dir
            << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& corpus_path, const std::string& out_dir) {
  Corpus corpus = load_corpus(corpus_path);
  fs::create_directories(out_dir);
  save_corpus(corpus, out_dir + "/corpus.jsonl");
  std::cout << "ingested " << corpus.size() << " passages across "
            << corpus.doc_index().size() << " documents\n";
  return kExitOk;
}

int cmd_index_bm25(const RunConfig& cfg) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto idx = InvertedIndex::build(corpus, cfg.bm25_k1, cfg.bm25_b);
  write_snapshot(cfg, cfg.run_dir);
  idx.save(cfg.run_dir + "/bm25.idx");
  std::cout << "bm25 index: N=" << idx.passage_count()
            << " avgdl=" << idx.avg_doc_length() << " k1=" << idx.k1()
            << " b=" << idx.b() << "\n";
  return kExitOk;
}

int cmd_index_dense(const RunConfig& cfg, const std::string& ckpt_name) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  ModelSet models = [&] {
    const std::string ckpt = cfg.run_dir + "/" + ckpt_name;
    if (checkpoint_exists(ckpt)) return ModelSet::load(ckpt);
    if (ckpt_name != "ckpt-init")
      throw std::runtime_error("missing checkpoint " + ckpt +
                               "; train first or pass --checkpoint ckpt-init");
    // Fresh seeded models for the untrained baseline.
    auto instances = cfg.train_path.empty() ? std::vector<TaskInstance>{}
                                            : load_instances(cfg.train_path);
    Tokenizer tok = build_tokenizer(corpus, instances);
    ModelConfig mc = cfg.model;
    mc.vocab = tok.vocab_size();
    ModelSet fresh = ModelSet::fresh(mc, std::move(tok), cfg.seed);
    fs::create_directories(cfg.run_dir);
    save_models_atomic(fresh, cfg.run_dir + "/ckpt-init");
    return fresh;
  }();
  const auto mode = cfg.dense_mode == "approximate" ? VectorIndex::Mode::kApproximate
                                                    : VectorIndex::Mode::kExact;
  HnswConfig hc = cfg.hnsw;
  hc.seed = cfg.seed;
  auto idx = build_dense_index(*models.biencoder, models.tokenizer, corpus, mode, hc);
  write_snapshot(cfg, cfg.run_dir);
  idx.save(cfg.run_dir + "/dense");
  std::cout << "dense index: " << idx.size() << " x " << idx.dim() << " ("
            << cfg.dense_mode << ")\n";
  return kExitOk;
}

int cmd_train(RunConfig cfg, const std::string& phase_str) {
  const Phase phase = parse_phase(phase_str);
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto train = load_instances(cfg.train_path);

  const std::string bm25_path = cfg.run_dir + "/bm25.idx";
  if (!fs::exists(bm25_path))
    throw std::runtime_error("missing " + bm25_path + "; run `rrgen index-bm25` first");
  InvertedIndex sparse = InvertedIndex::load(bm25_path);

  // Phase ordering: each phase requires its predecessor's checkpoint.
  static const std::map<Phase, std::string> kPrev = {
      {Phase::kGeneration, "ckpt-dpr"},
      {Phase::kRerank, "ckpt-gen"},
      {Phase::kE2E, "ckpt-rerank"}};
  ModelSet models = [&] {
    if (phase == Phase::kDpr) {
      Tokenizer tok = build_tokenizer(corpus, train);
      ModelConfig mc = cfg.model;
      mc.vocab = tok.vocab_size();
      return ModelSet::fresh(mc, std::move(tok), cfg.seed);
    }
    const std::string prev = cfg.run_dir + "/" + kPrev.at(phase);
    if (!checkpoint_exists(prev))
      throw std::runtime_error("phase '" + phase_str + "' requires checkpoint " +
                               prev + " from phase '" +
                               kPrev.at(phase).substr(5) + "'");
    return ModelSet::load(prev);
  }();

  std::optional<VectorIndex> dense;
  if (phase != Phase::kDpr) {
    const std::string dense_prefix = cfg.run_dir + "/dense";
    if (!checkpoint_exists(dense_prefix))
      throw std::runtime_error("phase '" + phase_str +
                               "' requires the dense index; run `rrgen index-dense` "
                               "with ckpt-dpr after phase dpr");
    dense = VectorIndex::load(dense_prefix);
  }

  auto result = train_phase(models, corpus, train, sparse,
                            dense ? &*dense : nullptr, cfg.train_config(phase));

  write_snapshot(cfg, cfg.run_dir);
  std::string ckpt_name = "ckpt-" + phase_str;
  if (phase == Phase::kE2E && cfg.e2e.mode != E2EMode::kOnlineKd)
    ckpt_name += "-" + to_string(cfg.e2e.mode);
  save_models_atomic(models, cfg.run_dir + "/" + ckpt_name);

  std::ofstream log(cfg.run_dir + "/train-" + phase_str + ".log.jsonl");
  for (const auto& e : result.log) {
    json j = {{"step", e.step}, {"phase", e.phase}, {"loss", e.loss}};
    if (e.kd_loss) j["kd_loss"] = *e.kd_loss;
    log << j.dump() << "\n";
  }
  // Rebuild the dense index once after Stage 1; the passage encoder is
  // frozen in every later phase.
  if (phase == Phase::kDpr) {
    HnswConfig hc = cfg.hnsw;
    hc.seed = cfg.seed;
    const auto mode = cfg.dense_mode == "approximate"
                          ? VectorIndex::Mode::kApproximate
                          : VectorIndex::Mode::kExact;
    auto idx = build_dense_index(*models.biencoder, models.tokenizer, corpus, mode, hc);
    idx.save(cfg.run_dir + "/dense");
  }
  const double final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  std::cout << "phase " << phase_str << ": " << result.log.size()
            << " steps, final loss " << final_loss << ", skipped "
            << result.skipped << "\n";
  return kExitOk;
}

int cmd_infer(const RunConfig& cfg, const std::string& input_path,
              const std::string& out_path, const std::string& ckpt_name,
              bool no_sparse, bool no_dense, bool no_rerank) {
  LoadedRun run = load_run(cfg.corpus_path, cfg.run_dir, ckpt_name);
  auto instances = load_instances(input_path);
  PipelineComponents parts;
  parts.tokenizer = &run.models.tokenizer;
  parts.corpus = &run.corpus;
  parts.biencoder = run.models.biencoder.get();
  parts.reranker = run.models.reranker.get();
  parts.generator = run.models.generator.get();
  parts.sparse = &run.sparse;
  parts.dense = &run.dense;
  PipelineConfig pc = cfg.pipeline_config();
  pc.use_sparse = !no_sparse;
  pc.use_dense = !no_dense;
  pc.use_reranker = !no_rerank;
  std::vector<PipelineResult> results;
  for (const auto& inst : instances)
    results.push_back(run_pipeline(inst.query, parts, pc));
  write_snapshot(cfg, cfg.run_dir);
  write_predictions(out_path, instances, results);
  std::cout << "wrote " << results.size() << " predictions to " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& pred, const std::string& gold,
             const std::string& out_path) {
  MetricsReport rep = evaluate_files(pred, gold);
  std::cout << report_to_table(rep);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << report_to_json(rep) << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, const std::string& input_path,
               const std::string& variants_csv, const std::string& out_dir) {
  std::vector<std::string> variants;
  std::string cur;
  for (char c : variants_csv + ",") {
    if (c == ',') {
      if (!cur.empty()) variants.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fs::create_directories(out_dir);
  std::map<std::string, MetricsReport> reports;
  for (const auto& v : variants) {
    std::string ckpt = "ckpt-e2e";
    bool no_sparse = false, no_rerank = false, no_dense = false;
    if (v == "full") {
    } else if (v == "no-kd") {
      ckpt = checkpoint_exists(cfg.run_dir + "/ckpt-e2e-freeze")
                 ? "ckpt-e2e-freeze"
                 : "ckpt-rerank";
    } else if (v == "no-bm25") {
      no_sparse = true;
    } else if (v == "baseline") {
      ckpt = "ckpt-gen";
      no_rerank = true;
      no_sparse = true;
    } else {
      throw std::invalid_argument("unknown ablation variant '" + v +
                                  "' (full|no-kd|no-bm25|baseline)");
    }
    const std::string pred = out_dir + "/pred-" + v + ".jsonl";
    cmd_infer(cfg, input_path, pred, ckpt, no_sparse, no_dense, no_rerank);
    reports[v] = evaluate_files(pred, input_path);
    std::ofstream out(out_dir + "/report-" + v + ".json");
    out << report_to_json(reports[v]) << "\n";
  }
  std::cout << "\nvariant     R-Prec  Recall@5  Accuracy  Token-F1\n";
  for (const auto& v : variants) {
    const auto& r = reports[v];
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-10s %7.4f  %7.4f   %7.4f   %7.4f\n",
                  v.c_str(), r.r_precision, r.recall_at_5, r.accuracy, r.token_f1);
    std::cout << buf;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieve-rerank-generate pipeline"};
  app.require_subcommand(1);

  std::string config_path, corpus, train_file, input, out, run_dir, pred, gold;
  std::string phase = "dpr", mode, ckpt_name, variants = "full,no-kd,no-bm25,baseline";
  uint64_t seed = 42;
  size_t docs = 200, instances = 300, vocab = 100;
  double kd_temperature = -1.0, kd_lr_scale = -1.0, learn_rate = -1.0;
  long epochs = -1, batch_size = -1;
  bool no_sparse = false, no_dense = false, no_rerank = false;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--run", run_dir, "run directory");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic task");
  synth->add_option("--seed", seed);
  synth->add_option("--docs", docs);
  synth->add_option("--instances", instances);
  synth->add_option("--vocab", vocab);
  synth->add_option("--out", out)->required();

  auto* ingest = app.add_subcommand("ingest", "validate and normalize a corpus");
  ingest->add_option("--corpus", corpus)->required();
  ingest->add_option("--out", out)->required();

  auto* ib = app.add_subcommand("index-bm25", "build the sparse index");
  add_common(ib);
  ib->add_option("--corpus", corpus);

  auto* id = app.add_subcommand("index-dense", "build the dense index");
  add_common(id);
  id->add_option("--corpus", corpus);
  id->add_option("--train", train_file, "instances used to build the vocab for fresh models");
  id->add_option("--checkpoint", ckpt_name, "model checkpoint name (default ckpt-init)");

  auto* tr = app.add_subcommand("train", "run one training phase");
  add_common(tr);
  tr->add_option("--phase", phase)->required();
  tr->add_option("--mode", mode, "e2e mode: combine|freeze|kd");
  tr->add_option("--kd-temperature", kd_temperature);
  tr->add_option("--kd-lr-scale", kd_lr_scale);
  tr->add_option("--epochs", epochs);
  tr->add_option("--batch-size", batch_size);
  tr->add_option("--learn-rate", learn_rate);
  tr->add_option("--corpus", corpus);
  tr->add_option("--train", train_file);

  auto* inf = app.add_subcommand("infer", "run the retrieval+generation pipeline");
  add_common(inf);
  inf->add_option("--corpus", corpus);
  inf->add_option("--input", input)->required();
  inf->add_option("--out", out)->required();
  inf->add_option("--checkpoint", ckpt_name);
  inf->add_flag("--no-sparse", no_sparse);
  inf->add_flag("--no-dense", no_dense);
  inf->add_flag("--no-rerank", no_rerank);

  auto* ev = app.add_subcommand("eval", "score predictions against gold instances");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--gold", gold)->required();
  ev->add_option("--out", out);

  auto* ab = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ab);
  ab->add_option("--corpus", corpus);
  ab->add_option("--input", input)->required();
  ab->add_option("--out", out)->required();
  ab->add_option("--variants", variants);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    if (seed_given || config_path.empty()) cfg.seed = seed;
    if (!corpus.empty()) cfg.corpus_path = corpus;
    if (!train_file.empty()) cfg.train_path = train_file;
    if (!run_dir.empty()) cfg.run_dir = run_dir;
    if (cfg.run_dir.empty()) cfg.run_dir = default_run_dir(cfg.seed);
    if (!mode.empty()) cfg.e2e.mode = parse_e2e_mode(mode);
    if (kd_temperature > 0) cfg.e2e.kd_temperature = kd_temperature;
    if (kd_lr_scale >= 0) cfg.e2e.kd_lr_scale = kd_lr_scale;
    if (epochs > 0) cfg.epochs = static_cast<size_t>(epochs);
    if (batch_size > 0) cfg.batch_size = static_cast<size_t>(batch_size);
    if (learn_rate > 0) cfg.learn_rate = learn_rate;

    if (*synth) return cmd_synth(seed, docs, instances, vocab, out);
    if (*ingest) return cmd_ingest(corpus, out);
    if (*ib) return cmd_index_bm25(cfg);
    if (*id) return cmd_index_dense(cfg, ckpt_name.empty() ? "ckpt-init" : ckpt_name);
    if (*tr) return cmd_train(cfg, phase);
    if (*inf)
      return cmd_infer(cfg, input, out, ckpt_name.empty() ? "ckpt-e2e" : ckpt_name,
                       no_sparse, no_dense, no_rerank);
    if (*ev) return cmd_eval(pred, gold, out);
    if (*ab) return cmd_ablate(cfg, input, variants, out);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
