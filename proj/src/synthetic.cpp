#include "rrgen/synthetic.hpp"

#include <set>
#include <stdexcept>

#include "rrgen/optim.hpp"

namespace rrgen {

namespace {

std::string word(const char* prefix, size_t i) {
  std::string n = std::to_string(i);
  while (n.size() < 3) n = "0" + n;
  return prefix + n;
}

// Unique (a,b) pair with a != b, rejection-sampled against `used`.
std::pair<size_t, size_t> draw_pair(Rng& rng, size_t pool,
                                    std::set<std::pair<size_t, size_t>>& used) {
  for (int tries = 0; tries < 100000; ++tries) {
    size_t a = rng.uniform_int(pool);
    size_t b = rng.uniform_int(pool);
    if (a == b) continue;
    if (used.insert({a, b}).second) return {a, b};
  }
  throw std::invalid_argument("generate_synthetic_task: pair pool exhausted");
}

}  // namespace

SyntheticTask generate_synthetic_task(uint64_t seed, size_t n_docs,
                                      size_t n_instances, size_t vocab_size) {
  if (n_docs < 10)
    throw std::invalid_argument("generate_synthetic_task: n_docs must be >= 10");
  if (vocab_size < 30)
    throw std::invalid_argument("generate_synthetic_task: vocab_size must be >= 30");
  const size_t n_entity_words = (vocab_size - kSyntheticRelations) / 2;
  const size_t n_filler_words = vocab_size - kSyntheticRelations - n_entity_words;
  const size_t n_facts = n_docs * kSyntheticFactsPerDoc;
  if (n_instances > n_facts)
    throw std::invalid_argument(
        "generate_synthetic_task: n_instances exceeds available facts (" +
        std::to_string(n_facts) + "); answers would not be unique");
  // Keep rejection sampling cheap and answers guaranteed unique.
  if (n_docs * 2 > n_entity_words * (n_entity_words - 1) ||
      n_facts * 2 > n_filler_words * (n_filler_words - 1))
    throw std::invalid_argument(
        "generate_synthetic_task: vocab too small for unique entity/filler pairs");

  Rng rng(seed);
  SyntheticTask task;
  std::set<std::pair<size_t, size_t>> used_entity, used_filler;

  struct Fact {
    size_t doc;
    std::string query;
    std::string answer;
  };
  std::vector<Fact> facts;

  for (size_t d = 0; d < n_docs; ++d) {
    auto [ea, eb] = draw_pair(rng, n_entity_words, used_entity);
    const std::string entity = word("e", ea) + " " + word("e", eb);
    // Distinct relations within the document.
    std::vector<size_t> rels;
    while (rels.size() < kSyntheticFactsPerDoc) {
      size_t r = rng.uniform_int(kSyntheticRelations);
      bool dup = false;
      for (size_t x : rels) dup = dup || x == r;
      if (!dup) rels.push_back(r);
    }
    std::string text;
    for (size_t f = 0; f < kSyntheticFactsPerDoc; ++f) {
      auto [fc, fd] = draw_pair(rng, n_filler_words, used_filler);
      const std::string rel = word("rel", rels[f]);
      const std::string filler = word("f", fc) + " " + word("f", fd);
      if (!text.empty()) text += " ";
      text += entity + " " + rel + " " + filler;
      facts.push_back({d, entity + " " + rel, filler});
    }
    Passage p;
    p.id = {std::to_string(d), 0};
    p.title = entity;
    p.text = text;
    task.corpus.add(std::move(p));
  }

  std::vector<size_t> order(facts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<TaskInstance> instances;
  for (size_t i = 0; i < n_instances; ++i) {
    const Fact& f = facts[order[i]];
    TaskInstance inst;
    inst.id = "synth-" + std::to_string(i);
    inst.query = f.query;
    inst.target = f.answer;
    inst.provenance = {std::to_string(f.doc)};
    instances.push_back(std::move(inst));
  }

  const size_t n_dev = n_instances / 6;
  const size_t n_test = n_instances / 6;
  const size_t n_train = n_instances - n_dev - n_test;
  task.train.assign(instances.begin(), instances.begin() + n_train);
  task.dev.assign(instances.begin() + n_train, instances.begin() + n_train + n_dev);
  task.test.assign(instances.begin() + n_train + n_dev, instances.end());
  return task;
}

}  // namespace rrgen
