#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "rrgen/models.hpp"
#include "rrgen/pipeline.hpp"
#include "rrgen/training.hpp"

namespace rrgen {

// Full run configuration with defaults; a JSON config file overrides the
// defaults and CLI flags override the file.
struct RunConfig {
  uint64_t seed = 42;

  // paths
  std::string corpus_path;
  std::string train_path, dev_path, test_path;
  std::string run_dir;

  ModelConfig model{.vocab = 0, .dim = 64, .heads = 2, .layers = 2,
                    .ff_dim = 128, .max_positions = 64};

  // retrieval
  size_t n_dense = 12;
  size_t n_sparse = 12;
  size_t top_k = 5;
  double bm25_k1 = 0.9;
  double bm25_b = 0.4;
  std::string dense_mode = "exact";  // exact | approximate
  HnswConfig hnsw;

  BeamConfig decode{.beam = 6, .min_len = 2, .max_len = 64, .length_penalty = 1.0};

  E2EConfig e2e;

  // training
  size_t epochs = 2;
  size_t batch_size = 16;
  double learn_rate = 5e-2;
  double max_grad_norm = 1.0;
  double weight_decay = 0.0;
  double warmup_frac = 0.1;
  std::string loss_form = "weighted";  // weighted | literal

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  PipelineConfig pipeline_config() const;
  TrainConfig train_config(Phase phase) const;
};

}  // namespace rrgen
