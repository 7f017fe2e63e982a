#pragma once

#include <set>
#include <string>
#include <vector>

namespace rrgen {

// SQuAD-style answer normalization: lowercase, strip punctuation, drop
// articles, collapse whitespace. Returned as the token list.
std::vector<std::string> normalize_answer(const std::string& text);

// Ranked doc_ids are deduplicated (first occurrence wins) before scoring.
double r_precision(const std::vector<std::string>& ranked_doc_ids,
                   const std::set<std::string>& provenance);
double recall_at_k(const std::vector<std::string>& ranked_doc_ids,
                   const std::set<std::string>& provenance, size_t k = 5);

double exact_match(const std::string& pred, const std::vector<std::string>& golds);
double token_f1(const std::string& pred, const std::vector<std::string>& golds);
double rouge_l(const std::string& pred, const std::string& gold);  // beta^2 = 1.44

// Base metric gated on perfect retrieval: value iff r_precision == 1, else 0.
double kilt_metric(double base_value, double r_prec);

struct MetricsReport {
  double r_precision = 0.0;
  double recall_at_5 = 0.0;
  double accuracy = 0.0;
  double token_f1 = 0.0;
  double rouge_l = 0.0;
  double kilt_accuracy = 0.0;
  double kilt_f1 = 0.0;
  double kilt_rouge_l = 0.0;
  size_t n = 0;                    // instances included
  size_t excluded_no_provenance = 0;
  size_t excluded_no_gold = 0;
  // Standard errors for the text report (+-1.96*SE column).
  double se_accuracy = 0.0;
  double se_token_f1 = 0.0;
};

struct InstanceScore {
  std::string id;
  std::string prediction;
  std::vector<std::string> ranked_doc_ids;
  std::vector<std::string> golds;
  std::set<std::string> provenance;
};

MetricsReport aggregate_metrics(const std::vector<InstanceScore>& instances);

std::string report_to_json(const MetricsReport& r);
std::string report_to_table(const MetricsReport& r);

}  // namespace rrgen
