#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrgen/corpus.hpp"
#include "rrgen/models.hpp"
#include "rrgen/scored_list.hpp"

namespace rrgen {

struct HnswConfig {
  size_t m = 128;              // neighbors per node per layer
  size_t ef_construction = 200;
  size_t ef_search = 128;
  uint64_t seed = 0;
};

// Passage embeddings with exact inner-product search (default) and an
// optional navigable small-world graph for approximate search.
class VectorIndex {
 public:
  enum class Mode { kExact, kApproximate };

  static VectorIndex build(const std::vector<std::vector<double>>& embeddings,
                           std::vector<PassageId> ids, Mode mode,
                           const HnswConfig& hnsw = {});

  // Exact mode: true top-k by inner product, ties by ascending passage id.
  // Approximate mode: best-effort top-k via graph search.
  ScoredList search(const std::vector<double>& query, size_t k) const;
  ScoredList search_exact(const std::vector<double>& query, size_t k) const;

  size_t size() const { return ids_.size(); }
  size_t dim() const { return dim_; }
  Mode mode() const { return mode_; }
  const std::vector<double>& row(size_t ordinal) const { return matrix_[ordinal]; }
  const PassageId& id_of(size_t ordinal) const { return ids_[ordinal]; }
  long ordinal_of(const PassageId& id) const;
  size_t max_neighbors(size_t layer) const;
  const std::vector<uint32_t>& neighbors(size_t layer, size_t node) const;
  size_t layer_count() const { return layers_.size(); }

  // Persisted as manifest + float64 blob (checkpoint envelope); the graph is
  // rebuilt deterministically from the stored seed on load.
  void save(const std::string& prefix) const;
  static VectorIndex load(const std::string& prefix);

 private:
  double ip(const std::vector<double>& a, size_t ordinal) const;
  void build_graph();
  std::vector<uint32_t> search_layer(const std::vector<double>& q, uint32_t entry,
                                     size_t ef, size_t layer) const;

  Mode mode_ = Mode::kExact;
  size_t dim_ = 0;
  std::vector<std::vector<double>> matrix_;
  std::vector<PassageId> ids_;
  HnswConfig hnsw_;
  // layers_[l][node] = neighbor ordinals; layer 0 holds every node.
  std::vector<std::vector<std::vector<uint32_t>>> layers_;
  std::vector<uint32_t> node_levels_;
  uint32_t entry_point_ = 0;
};

// Embeds every passage with the bi-encoder (no gradients retained).
VectorIndex build_dense_index(const BiEncoder& enc, const Tokenizer& tok,
                              const Corpus& corpus, VectorIndex::Mode mode,
                              const HnswConfig& hnsw = {});

std::vector<double> embed_query(const BiEncoder& enc, const Tokenizer& tok,
                                const std::string& query);

}  // namespace rrgen
