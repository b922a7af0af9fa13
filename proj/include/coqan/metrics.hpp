#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/error.hpp"
#include "coqan/fusion.hpp"

namespace coqan {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct MetricsReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // support-weighted over both classes
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // null for a single-class set
  Confusion confusion;

  nlohmann::json to_json() const {
    nlohmann::json j{{"samples", samples},   {"accuracy", accuracy}, {"precision", precision},
                     {"recall", recall},     {"f1", f1},
                     {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp},
                                    {"tn", confusion.tn}, {"fn", confusion.fn}}}};
    j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
    return j;
  }
};

// Mann-Whitney U / (n_pos n_neg) with midranks for ties.
inline std::optional<double> auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j + 1;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

inline MetricsReport compute_metrics(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size())
    throw ShapeError("metrics: probabilities and labels differ in length");
  if (probabilities.empty()) throw ValidationError("metrics: empty prediction set");
  MetricsReport r;
  r.samples = labels.size();
  auto& c = r.confusion;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("metrics: label outside {0,1}");
    const int pred = label_from_probability(probabilities[i]);
    if (labels[i] == 1) (pred == 1 ? c.tp : c.fn)++;
    else (pred == 1 ? c.fp : c.tn)++;
  }
  const double n = static_cast<double>(r.samples);
  r.accuracy = static_cast<double>(c.tp + c.tn) / n;
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  auto f1 = [](double p, double q) { return p + q == 0.0 ? 0.0 : 2.0 * p * q / (p + q); };
  // class 1 then class 0, each weighted by its support
  const double p1 = ratio(c.tp, c.tp + c.fp), r1 = ratio(c.tp, c.tp + c.fn);
  const double p0 = ratio(c.tn, c.tn + c.fn), r0 = ratio(c.tn, c.tn + c.fp);
  const double w1 = static_cast<double>(c.tp + c.fn) / n, w0 = static_cast<double>(c.tn + c.fp) / n;
  r.precision = w1 * p1 + w0 * p0;
  r.recall = w1 * r1 + w0 * r0;
  r.f1 = w1 * f1(p1, r1) + w0 * f1(p0, r0);
  r.auc = auc_rank(probabilities, labels);
  return r;
}

}  // namespace coqan
