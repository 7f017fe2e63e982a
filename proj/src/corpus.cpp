#include "rrgen/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rrgen {

using nlohmann::json;

PassageId PassageId::parse(const std::string& rendered) {
  const auto pos = rendered.rfind('-');
  if (pos == std::string::npos || pos == 0 || pos + 1 == rendered.size())
    throw std::invalid_argument("PassageId: cannot parse '" + rendered + "'");
  PassageId id;
  id.doc_id = rendered.substr(0, pos);
  id.passage_index = std::stoul(rendered.substr(pos + 1));
  return id;
}

void Corpus::add(Passage p) {
  const std::string rendered = p.id.render();
  if (by_id_.count(rendered))
    throw std::runtime_error("duplicate passage id '" + rendered + "'");
  if (p.text.empty())
    throw std::runtime_error("passage '" + rendered + "' has empty text");
  by_id_[rendered] = passages_.size();
  doc_index_[p.id.doc_id].push_back(passages_.size());
  passages_.push_back(std::move(p));
}

std::vector<size_t> Corpus::doc_passages(const std::string& doc_id) const {
  auto it = doc_index_.find(doc_id);
  return it == doc_index_.end() ? std::vector<size_t>{} : it->second;
}

long Corpus::ordinal_of(const PassageId& id) const {
  auto it = by_id_.find(id.render());
  return it == by_id_.end() ? -1 : static_cast<long>(it->second);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_corpus: malformed JSON on line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("text"))
      throw std::runtime_error("load_corpus: missing id or text on line " +
                               std::to_string(lineno));
    Passage p;
    try {
      p.id = PassageId::parse(j.at("id").get<std::string>());
    } catch (const std::exception& e) {
      throw std::runtime_error("load_corpus: bad id on line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    p.title = j.value("title", "");
    p.text = j.at("text").get<std::string>();
    try {
      corpus.add(std::move(p));
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("load_corpus: line ") +
                               std::to_string(lineno) + ": " + e.what());
    }
  }
  if (corpus.size() == 0) throw std::runtime_error("load_corpus: empty corpus");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_corpus: cannot write " + path);
  for (const auto& p : corpus.passages()) {
    json j = {{"id", p.id.render()}, {"title", p.title}, {"text", p.text}};
    out << j.dump() << "\n";
  }
}

std::vector<TaskInstance> load_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_instances: cannot open " + path);
  std::vector<TaskInstance> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_instances: malformed JSON on line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("input"))
      throw std::runtime_error("load_instances: missing input on line " +
                               std::to_string(lineno));
    TaskInstance inst;
    inst.id = j.contains("id") ? (j["id"].is_string()
                                      ? j["id"].get<std::string>()
                                      : j["id"].dump())
                               : std::to_string(lineno);
    inst.query = j.at("input").get<std::string>();
    if (!j.contains("output") || !j["output"].is_array() || j["output"].empty() ||
        !j["output"][0].contains("answer"))
      throw std::runtime_error("load_instances: missing output.answer on line " +
                               std::to_string(lineno));
    // First answer only; additional answers are out of scope.
    inst.target = j["output"][0].at("answer").get<std::string>();
    for (const auto& o : j["output"])
      if (o.contains("provenance"))
        for (const auto& pr : o["provenance"])
          if (pr.contains("wikipedia_id")) {
            const auto& w = pr["wikipedia_id"];
            inst.provenance.insert(w.is_string() ? w.get<std::string>() : w.dump());
          }
    inst.missing_provenance = inst.provenance.empty();
    out.push_back(std::move(inst));
  }
  return out;
}

void save_instances(const std::vector<TaskInstance>& instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instances: cannot write " + path);
  for (const auto& inst : instances) {
    json prov = json::array();
    for (const auto& d : inst.provenance) prov.push_back({{"wikipedia_id", d}});
    json j = {{"id", inst.id},
              {"input", inst.query},
              {"output", {{{"answer", inst.target}, {"provenance", prov}}}}};
    out << j.dump() << "\n";
  }
}

}  // namespace rrgen
