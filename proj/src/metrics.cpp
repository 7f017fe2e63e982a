#include "rrgen/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rrgen {

std::vector<std::string> normalize_answer(const std::string& text) {
  std::string cleaned;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    cleaned.push_back(std::isspace(c) ? ' ' : static_cast<char>(std::tolower(c)));
  }
  std::vector<std::string> toks;
  std::istringstream ss(cleaned);
  std::string t;
  while (ss >> t)
    if (t != "a" && t != "an" && t != "the") toks.push_back(t);
  return toks;
}

namespace {

std::vector<std::string> dedup_docs(const std::vector<std::string>& ranked) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& d : ranked)
    if (seen.insert(d).second) out.push_back(d);
  return out;
}

}  // namespace

double r_precision(const std::vector<std::string>& ranked_doc_ids,
                   const std::set<std::string>& provenance) {
  const size_t r = provenance.size();
  if (r == 0) return 0.0;  // callers exclude R=0 instances from aggregates
  auto ranked = dedup_docs(ranked_doc_ids);
  size_t hit = 0;
  for (size_t i = 0; i < std::min(ranked.size(), r); ++i)
    hit += provenance.count(ranked[i]);
  return static_cast<double>(hit) / static_cast<double>(r);
}

double recall_at_k(const std::vector<std::string>& ranked_doc_ids,
                   const std::set<std::string>& provenance, size_t k) {
  if (provenance.empty()) return 0.0;
  auto ranked = dedup_docs(ranked_doc_ids);
  size_t hit = 0;
  for (size_t i = 0; i < std::min(ranked.size(), k); ++i)
    hit += provenance.count(ranked[i]);
  return static_cast<double>(hit) / static_cast<double>(provenance.size());
}

double exact_match(const std::string& pred, const std::vector<std::string>& golds) {
  const auto p = normalize_answer(pred);
  for (const auto& g : golds)
    if (p == normalize_answer(g) && !p.empty()) return 1.0;
  // An empty normalized prediction matches an empty gold exactly.
  for (const auto& g : golds)
    if (p.empty() && normalize_answer(g).empty()) return 1.0;
  return 0.0;
}

double token_f1(const std::string& pred, const std::vector<std::string>& golds) {
  const auto p = normalize_answer(pred);
  double best = 0.0;
  for (const auto& gold : golds) {
    const auto g = normalize_answer(gold);
    if (p.empty() || g.empty()) {
      best = std::max(best, (p.empty() && g.empty()) ? 1.0 : 0.0);
      continue;
    }
    std::map<std::string, int> pc;
    for (const auto& t : p) ++pc[t];
    int overlap = 0;
    std::map<std::string, int> gc;
    for (const auto& t : g) ++gc[t];
    for (const auto& [t, c] : pc) overlap += std::min(c, gc.count(t) ? gc[t] : 0);
    if (overlap == 0) continue;
    const double precision = static_cast<double>(overlap) / p.size();
    const double recall = static_cast<double>(overlap) / g.size();
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

double rouge_l(const std::string& pred, const std::string& gold) {
  const auto p = normalize_answer(pred);
  const auto g = normalize_answer(gold);
  if (p.empty() || g.empty()) return 0.0;
  // LCS length by dynamic programming.
  std::vector<std::vector<int>> dp(p.size() + 1, std::vector<int>(g.size() + 1, 0));
  for (size_t i = 1; i <= p.size(); ++i)
    for (size_t j = 1; j <= g.size(); ++j)
      dp[i][j] = p[i - 1] == g[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  const double lcs = dp[p.size()][g.size()];
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(p.size());
  const double recall = lcs / static_cast<double>(g.size());
  constexpr double beta2 = 1.2 * 1.2;
  return (1.0 + beta2) * precision * recall / (recall + beta2 * precision);
}

double kilt_metric(double base_value, double r_prec) {
  return r_prec == 1.0 ? base_value : 0.0;
}

MetricsReport aggregate_metrics(const std::vector<InstanceScore>& instances) {
  MetricsReport rep;
  double sum_rp = 0, sum_r5 = 0, sum_acc = 0, sum_f1 = 0, sum_rl = 0;
  double sum_kacc = 0, sum_kf1 = 0, sum_krl = 0;
  double sum_acc2 = 0, sum_f12 = 0;
  for (const auto& inst : instances) {
    if (inst.provenance.empty()) {
      ++rep.excluded_no_provenance;
      continue;
    }
    if (inst.golds.empty()) {
      ++rep.excluded_no_gold;
      continue;
    }
    const double rp = r_precision(inst.ranked_doc_ids, inst.provenance);
    const double r5 = recall_at_k(inst.ranked_doc_ids, inst.provenance, 5);
    const double acc = exact_match(inst.prediction, inst.golds);
    const double f1 = token_f1(inst.prediction, inst.golds);
    double rl = 0.0;
    for (const auto& g : inst.golds) rl = std::max(rl, rouge_l(inst.prediction, g));
    sum_rp += rp;
    sum_r5 += r5;
    sum_acc += acc;
    sum_f1 += f1;
    sum_rl += rl;
    sum_kacc += kilt_metric(acc, rp);
    sum_kf1 += kilt_metric(f1, rp);
    sum_krl += kilt_metric(rl, rp);
    sum_acc2 += acc * acc;
    sum_f12 += f1 * f1;
    ++rep.n;
  }
  if (rep.n > 0) {
    const double n = static_cast<double>(rep.n);
    rep.r_precision = sum_rp / n;
    rep.recall_at_5 = sum_r5 / n;
    rep.accuracy = sum_acc / n;
    rep.token_f1 = sum_f1 / n;
    rep.rouge_l = sum_rl / n;
    rep.kilt_accuracy = sum_kacc / n;
    rep.kilt_f1 = sum_kf1 / n;
    rep.kilt_rouge_l = sum_krl / n;
    if (rep.n > 1) {
      rep.se_accuracy = std::sqrt(std::max(0.0, sum_acc2 / n - rep.accuracy * rep.accuracy) / (n - 1));
      rep.se_token_f1 = std::sqrt(std::max(0.0, sum_f12 / n - rep.token_f1 * rep.token_f1) / (n - 1));
    }
  }
  return rep;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j = {{"r_precision", r.r_precision},
                      {"recall_at_5", r.recall_at_5},
                      {"accuracy", r.accuracy},
                      {"token_f1", r.token_f1},
                      {"rouge_l", r.rouge_l},
                      {"kilt_accuracy", r.kilt_accuracy},
                      {"kilt_f1", r.kilt_f1},
                      {"kilt_rouge_l", r.kilt_rouge_l},
                      {"n", r.n},
                      {"excluded_no_provenance", r.excluded_no_provenance},
                      {"excluded_no_gold", r.excluded_no_gold}};
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& r) {
  char buf[512];
  std::ostringstream out;
  out << "metric          value    +-1.96*SE\n";
  auto line = [&](const char* name, double v, double se) {
    std::snprintf(buf, sizeof(buf), "%-14s %7.4f    %7.4f\n", name, v, 1.96 * se);
    out << buf;
  };
  line("R-Precision", r.r_precision, 0.0);
  line("Recall@5", r.recall_at_5, 0.0);
  line("Accuracy", r.accuracy, r.se_accuracy);
  line("Token-F1", r.token_f1, r.se_token_f1);
  line("Rouge-L", r.rouge_l, 0.0);
  line("KILT-AC", r.kilt_accuracy, 0.0);
  line("KILT-F1", r.kilt_f1, 0.0);
  line("KILT-RL", r.kilt_rouge_l, 0.0);
  out << "n=" << r.n << " excluded(no provenance)=" << r.excluded_no_provenance
      << " excluded(no gold)=" << r.excluded_no_gold << "\n";
  return out.str();
}

}  // namespace rrgen
