#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rrgen/bm25.hpp"
#include "rrgen/checkpoint.hpp"
#include "rrgen/corpus.hpp"
#include "rrgen/dense_index.hpp"
#include "rrgen/metrics.hpp"
#include "rrgen/pipeline.hpp"
#include "rrgen/synthetic.hpp"
#include "rrgen/tokenizer.hpp"
#include "rrgen/training.hpp"

namespace py = pybind11;
using namespace rrgen;

namespace {

// Owns every component needed to answer queries so Python sees one object.
class Runtime {
 public:
  Runtime(const std::string& corpus_path, const std::string& run_dir,
          const std::string& checkpoint)
      : corpus_(load_corpus(corpus_path)),
        sparse_(InvertedIndex::load(run_dir + "/bm25.idx")),
        dense_(VectorIndex::load(run_dir + "/dense")),
        models_(ModelSet::load(run_dir + "/" + checkpoint)) {}

  py::dict infer(const std::string& query, const PipelineConfig& cfg) const {
    PipelineComponents parts;
    parts.tokenizer = &models_.tokenizer;
    parts.corpus = &corpus_;
    parts.biencoder = models_.biencoder.get();
    parts.reranker = models_.reranker.get();
    parts.generator = models_.generator.get();
    parts.sparse = &sparse_;
    parts.dense = &dense_;
    auto res = run_pipeline(query, parts, cfg);
    py::list prov;
    for (const auto& e : res.provenance.entries) prov.append(e.id.doc_id);
    py::dict out;
    out["output"] = res.output.text;
    out["provenance"] = prov;
    out["sequence_scores"] = res.output.sequence_scores;
    return out;
  }

 private:
  Corpus corpus_;
  InvertedIndex sparse_;
  VectorIndex dense_;
  ModelSet models_;
};

py::list scored_to_list(const ScoredList& list) {
  py::list out;
  for (const auto& e : list.entries)
    out.append(py::make_tuple(e.id.render(), e.score));
  return out;
}

}  // namespace

PYBIND11_MODULE(_rrgen, m) {
  m.doc() = "retrieve-rerank-generate core";

  py::class_<Passage>(m, "Passage")
      .def_property_readonly("id", [](const Passage& p) { return p.id.render(); })
      .def_readonly("title", &Passage::title)
      .def_readonly("text", &Passage::text);

  py::class_<TaskInstance>(m, "TaskInstance")
      .def_readonly("id", &TaskInstance::id)
      .def_readonly("query", &TaskInstance::query)
      .def_readonly("target", &TaskInstance::target)
      .def_readonly("provenance", &TaskInstance::provenance);

  py::class_<Corpus>(m, "Corpus")
      .def("__len__", &Corpus::size)
      .def("passage", &Corpus::at, py::return_value_policy::reference_internal)
      .def_property_readonly("passages", &Corpus::passages);

  m.def("load_corpus", &load_corpus);
  m.def("load_instances", &load_instances);

  py::class_<SyntheticTask>(m, "SyntheticTask")
      .def_readonly("corpus", &SyntheticTask::corpus)
      .def_readonly("train", &SyntheticTask::train)
      .def_readonly("dev", &SyntheticTask::dev)
      .def_readonly("test", &SyntheticTask::test);

  m.def("generate_synthetic_task", &generate_synthetic_task, py::arg("seed"),
        py::arg("n_docs"), py::arg("n_instances"), py::arg("vocab_size"));

  py::class_<Tokenizer>(m, "Tokenizer")
      .def(py::init<>())
      .def_static("split", &Tokenizer::split)
      .def("add_text", &Tokenizer::add_text)
      .def("encode", &Tokenizer::encode)
      .def("decode", &Tokenizer::decode)
      .def_property_readonly("vocab_size", &Tokenizer::vocab_size);

  py::class_<InvertedIndex>(m, "InvertedIndex")
      .def_static("build", &InvertedIndex::build, py::arg("corpus"),
                  py::arg("k1") = 0.9, py::arg("b") = 0.4)
      .def("search",
           [](const InvertedIndex& idx, const std::string& q, size_t k) {
             return scored_to_list(idx.search(q, k));
           })
      .def("idf", &InvertedIndex::idf)
      .def("score_passage", &InvertedIndex::score_passage)
      .def_property_readonly("passage_count", &InvertedIndex::passage_count)
      .def("save", &InvertedIndex::save)
      .def_static("load", &InvertedIndex::load);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("n_dense", &PipelineConfig::n_dense)
      .def_readwrite("n_sparse", &PipelineConfig::n_sparse)
      .def_readwrite("top_k", &PipelineConfig::top_k)
      .def_readwrite("use_dense", &PipelineConfig::use_dense)
      .def_readwrite("use_sparse", &PipelineConfig::use_sparse)
      .def_readwrite("use_reranker", &PipelineConfig::use_reranker);

  py::class_<Runtime>(m, "Runtime")
      .def(py::init<const std::string&, const std::string&, const std::string&>(),
           py::arg("corpus_path"), py::arg("run_dir"),
           py::arg("checkpoint") = "ckpt-e2e")
      .def("infer", &Runtime::infer, py::arg("query"),
           py::arg("config") = PipelineConfig{});

  m.def("normalize_answer", &normalize_answer);
  m.def("exact_match", &exact_match);
  m.def("token_f1", &token_f1);
  m.def("rouge_l", &rouge_l);
  m.def("r_precision", &r_precision);
  m.def("recall_at_k", &recall_at_k, py::arg("ranked_doc_ids"),
        py::arg("provenance"), py::arg("k") = 5);
}
