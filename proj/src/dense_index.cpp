#include "rrgen/dense_index.hpp"

#include <algorithm>
#include <fstream>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_set>

#include "rrgen/checkpoint.hpp"
#include "rrgen/optim.hpp"

namespace rrgen {

namespace {

struct Scored {
  double score;
  uint32_t node;
};

}  // namespace

VectorIndex VectorIndex::build(const std::vector<std::vector<double>>& embeddings,
                               std::vector<PassageId> ids, Mode mode,
                               const HnswConfig& hnsw) {
  if (embeddings.empty()) throw std::invalid_argument("VectorIndex: no embeddings");
  if (embeddings.size() != ids.size())
    throw std::invalid_argument("VectorIndex: ids/embeddings size mismatch");
  VectorIndex idx;
  idx.dim_ = embeddings[0].size();
  for (const auto& e : embeddings)
    if (e.size() != idx.dim_)
      throw std::invalid_argument("VectorIndex: dimension mismatch: " +
                                  std::to_string(e.size()) + " vs " +
                                  std::to_string(idx.dim_));
  idx.matrix_ = embeddings;
  idx.ids_ = std::move(ids);
  idx.mode_ = mode;
  idx.hnsw_ = hnsw;
  if (mode == Mode::kApproximate) idx.build_graph();
  return idx;
}

double VectorIndex::ip(const std::vector<double>& a, size_t ordinal) const {
  const auto& r = matrix_[ordinal];
  double s = 0.0;
  for (size_t i = 0; i < dim_; ++i) s += a[i] * r[i];
  return s;
}

long VectorIndex::ordinal_of(const PassageId& id) const {
  for (size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return static_cast<long>(i);
  return -1;
}

size_t VectorIndex::max_neighbors(size_t layer) const {
  return layer == 0 ? 2 * hnsw_.m : hnsw_.m;
}

const std::vector<uint32_t>& VectorIndex::neighbors(size_t layer, size_t node) const {
  return layers_[layer][node];
}

ScoredList VectorIndex::search_exact(const std::vector<double>& query, size_t k) const {
  if (k < 1) throw std::invalid_argument("dense_search: k must be >= 1");
  if (query.size() != dim_)
    throw std::invalid_argument("dense_search: query dimension " +
                                std::to_string(query.size()) + " != index " +
                                std::to_string(dim_));
  std::vector<ScoredEntry> scored;
  scored.reserve(ids_.size());
  for (size_t i = 0; i < ids_.size(); ++i)
    scored.push_back({ids_[i], ip(query, i), ScoreSource::kDense});
  sort_scored(scored);
  if (scored.size() > k) scored.resize(k);
  return {std::move(scored)};
}

std::vector<uint32_t> VectorIndex::search_layer(const std::vector<double>& q,
                                                uint32_t entry, size_t ef,
                                                size_t layer) const {
  auto worse = [](const Scored& a, const Scored& b) { return a.score < b.score; };
  auto better = [](const Scored& a, const Scored& b) { return a.score > b.score; };
  std::priority_queue<Scored, std::vector<Scored>, decltype(worse)> candidates(worse);
  std::priority_queue<Scored, std::vector<Scored>, decltype(better)> result(better);
  std::unordered_set<uint32_t> visited;
  const double es = ip(q, entry);
  candidates.push({es, entry});
  result.push({es, entry});
  visited.insert(entry);
  while (!candidates.empty()) {
    Scored c = candidates.top();
    candidates.pop();
    if (result.size() >= ef && c.score < result.top().score) break;
    for (uint32_t nb : layers_[layer][c.node]) {
      if (!visited.insert(nb).second) continue;
      const double s = ip(q, nb);
      if (result.size() < ef || s > result.top().score) {
        candidates.push({s, nb});
        result.push({s, nb});
        if (result.size() > ef) result.pop();
      }
    }
  }
  std::vector<Scored> out;
  while (!result.empty()) { out.push_back(result.top()); result.pop(); }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  std::vector<uint32_t> nodes;
  for (const auto& s : out) nodes.push_back(s.node);
  return nodes;
}

void VectorIndex::build_graph() {
  Rng rng(hnsw_.seed + 1);
  const double ml = 1.0 / std::log(std::max<double>(2.0, double(hnsw_.m)));
  const size_t n = ids_.size();
  node_levels_.resize(n);
  size_t max_level = 0;
  for (size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    node_levels_[i] = static_cast<uint32_t>(-std::log(u) * ml);
    max_level = std::max<size_t>(max_level, node_levels_[i]);
  }
  layers_.assign(max_level + 1, {});
  for (auto& layer : layers_) layer.assign(n, {});
  entry_point_ = 0;
  size_t ep_level = node_levels_[0];

  auto link = [&](size_t layer, uint32_t a, uint32_t b) {
    auto& la = layers_[layer][a];
    if (std::find(la.begin(), la.end(), b) == la.end()) la.push_back(b);
    if (la.size() > max_neighbors(layer)) {
      // Keep the closest neighbors of a.
      std::sort(la.begin(), la.end(), [&](uint32_t x, uint32_t y) {
        const double sx = ip(matrix_[a], x), sy = ip(matrix_[a], y);
        if (sx != sy) return sx > sy;
        return x < y;
      });
      la.resize(max_neighbors(layer));
    }
  };

  for (uint32_t node = 1; node < n; ++node) {
    const auto& q = matrix_[node];
    const size_t level = node_levels_[node];
    uint32_t ep = entry_point_;
    for (size_t l = ep_level; l > level; --l) {
      // Greedy descent through upper layers.
      bool improved = true;
      while (improved) {
        improved = false;
        for (uint32_t nb : layers_[l][ep])
          if (ip(q, nb) > ip(q, ep)) { ep = nb; improved = true; }
      }
      if (l == 0) break;
    }
    for (size_t l = std::min(level, ep_level) + 1; l-- > 0;) {
      auto found = search_layer(q, ep, hnsw_.ef_construction, l);
      const size_t take = std::min(found.size(), hnsw_.m);
      for (size_t i = 0; i < take; ++i) {
        link(l, node, found[i]);
        link(l, found[i], node);
      }
      if (!found.empty()) ep = found[0];
    }
    if (level > ep_level) {
      entry_point_ = node;
      ep_level = level;
    }
  }
}

ScoredList VectorIndex::search(const std::vector<double>& query, size_t k) const {
  if (mode_ == Mode::kExact) return search_exact(query, k);
  if (k < 1) throw std::invalid_argument("dense_search: k must be >= 1");
  if (query.size() != dim_)
    throw std::invalid_argument("dense_search: query dimension mismatch");
  uint32_t ep = entry_point_;
  for (size_t l = layers_.size(); l-- > 1;) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (uint32_t nb : layers_[l][ep])
        if (ip(query, nb) > ip(query, ep)) { ep = nb; improved = true; }
    }
  }
  auto found = search_layer(query, ep, std::max(hnsw_.ef_search, k), 0);
  std::vector<ScoredEntry> scored;
  for (size_t i = 0; i < std::min(found.size(), k); ++i)
    scored.push_back({ids_[found[i]], ip(query, found[i]), ScoreSource::kDense});
  sort_scored(scored);
  return {std::move(scored)};
}

void VectorIndex::save(const std::string& prefix) const {
  std::vector<double> flat;
  flat.reserve(ids_.size() * dim_);
  for (const auto& r : matrix_) flat.insert(flat.end(), r.begin(), r.end());
  std::vector<Parameter> params = {
      {"embeddings", Tensor::from_values(ids_.size(), dim_, std::move(flat))}};
  nlohmann::json config;
  config["kind"] = "dense-index";
  config["mode"] = mode_ == Mode::kExact ? "exact" : "approximate";
  config["hnsw"] = {{"m", hnsw_.m},
                    {"ef_construction", hnsw_.ef_construction},
                    {"ef_search", hnsw_.ef_search},
                    {"seed", hnsw_.seed}};
  auto& idlist = config["ids"] = nlohmann::json::array();
  for (const auto& id : ids_) idlist.push_back(id.render());
  save_checkpoint(prefix, params, config);
}

VectorIndex VectorIndex::load(const std::string& prefix) {
  nlohmann::json config = read_checkpoint_config(prefix);
  if (config.value("kind", "") != "dense-index")
    throw std::runtime_error("VectorIndex::load: " + prefix + " is not a dense index");
  std::vector<PassageId> ids;
  for (const auto& s : config.at("ids")) ids.push_back(PassageId::parse(s));
  HnswConfig hc;
  hc.m = config["hnsw"]["m"];
  hc.ef_construction = config["hnsw"]["ef_construction"];
  hc.ef_search = config["hnsw"]["ef_search"];
  hc.seed = config["hnsw"]["seed"];
  // Dimension comes from the manifest shape.
  std::ifstream jf(prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(jf);
  const size_t rows = manifest["params"][0]["shape"][0];
  const size_t cols = manifest["params"][0]["shape"][1];
  std::vector<Parameter> params = {{"embeddings", Tensor::zeros(rows, cols)}};
  load_checkpoint(prefix, params);
  std::vector<std::vector<double>> embeddings(rows, std::vector<double>(cols));
  const auto& flat = params[0].tensor.value();
  for (size_t i = 0; i < rows; ++i)
    std::copy(flat.begin() + i * cols, flat.begin() + (i + 1) * cols,
              embeddings[i].begin());
  const Mode mode = config.value("mode", "exact") == "approximate"
                        ? Mode::kApproximate
                        : Mode::kExact;
  return build(embeddings, std::move(ids), mode, hc);
}

VectorIndex build_dense_index(const BiEncoder& enc, const Tokenizer& tok,
                              const Corpus& corpus, VectorIndex::Mode mode,
                              const HnswConfig& hnsw) {
  std::vector<std::vector<double>> embeddings;
  std::vector<PassageId> ids;
  for (const auto& p : corpus.passages()) {
    embeddings.push_back(enc.encode_passage(tok, p).value());
    ids.push_back(p.id);
  }
  return VectorIndex::build(embeddings, std::move(ids), mode, hnsw);
}

std::vector<double> embed_query(const BiEncoder& enc, const Tokenizer& tok,
                                const std::string& query) {
  return enc.encode_query(tok, query).value();
}

}  // namespace rrgen
