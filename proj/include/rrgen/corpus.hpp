#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace rrgen {

struct PassageId {
  std::string doc_id;
  size_t passage_index = 0;

  std::string render() const { return doc_id + "-" + std::to_string(passage_index); }
  static PassageId parse(const std::string& rendered);

  bool operator==(const PassageId& o) const = default;
  bool operator<(const PassageId& o) const {
    if (doc_id != o.doc_id) return doc_id < o.doc_id;
    return passage_index < o.passage_index;
  }
};

struct Passage {
  PassageId id;
  std::string title;
  std::string text;
};

struct TaskInstance {
  std::string id;
  std::string query;
  std::string target;
  std::set<std::string> provenance;  // doc_ids
  bool missing_provenance = false;   // loaded with no provenance records
};

class Corpus {
 public:
  void add(Passage p);  // throws on duplicate id

  const std::vector<Passage>& passages() const { return passages_; }
  size_t size() const { return passages_.size(); }
  const Passage& at(size_t ordinal) const { return passages_[ordinal]; }

  // Ordinals of all passages belonging to a document; empty if unknown.
  std::vector<size_t> doc_passages(const std::string& doc_id) const;
  const std::map<std::string, std::vector<size_t>>& doc_index() const {
    return doc_index_;
  }
  // Ordinal lookup by rendered passage id; -1 if absent.
  long ordinal_of(const PassageId& id) const;

 private:
  std::vector<Passage> passages_;
  std::map<std::string, std::vector<size_t>> doc_index_;
  std::map<std::string, size_t> by_id_;
};

// JSONL {id, title, text}. Errors name the offending line or id.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// KILT-shaped JSONL {id, input, output:[{answer, provenance:[{wikipedia_id}]}]}.
// Unknown fields ignored. Provenance flattened to a doc_id set.
std::vector<TaskInstance> load_instances(const std::string& path);
void save_instances(const std::vector<TaskInstance>& instances, const std::string& path);

}  // namespace rrgen
