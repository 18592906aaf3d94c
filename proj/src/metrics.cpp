#include "ktele/harness/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ktele::harness {

double rank_with_ties(const Vec& scores, Index truth, bool descending) {
  if (truth < 0 || truth >= scores.size()) throw std::invalid_argument("truth out of range");
  const double s = scores(truth);
  double better = 0, tied = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    if (i == truth) continue;
    const double v = scores(i);
    if ((descending && v > s) || (!descending && v < s)) ++better;
    else if (v == s) ++tied;
  }
  return better + 1.0 + tied / 2.0;
}

double mean_rank(const std::vector<double>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("no ranks");
  return std::accumulate(ranks.begin(), ranks.end(), 0.0) / double(ranks.size());
}

double hits_at_k(const std::vector<double>& ranks, double k) {
  if (ranks.empty()) throw std::invalid_argument("no ranks");
  double hits = 0;
  for (double r : ranks)
    if (r <= k) ++hits;
  return hits / double(ranks.size());
}

double mrr(const std::vector<double>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("no ranks");
  double total = 0;
  for (double r : ranks) total += 1.0 / r;
  return total / double(ranks.size());
}

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("prediction/label size mismatch");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], y = labels[i];
    if (p != 0 && p != 1) throw std::invalid_argument("predictions must be 0/1");
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0/1");
    if (p == 1 && y == 1) ++tp;
    else if (p == 1 && y == 0) ++fp;
    else if (p == 0 && y == 0) ++tn;
    else ++fn;
  }
  ClassificationMetrics m;
  m.accuracy = (tp + tn) / double(preds.size());
  if (tp + fp == 0) {
    m.precision = 0.0;
    m.no_positive_predictions = true;
  } else {
    m.precision = tp / (tp + fp);
  }
  m.recall = tp + fn == 0 ? 0.0 : tp / (tp + fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 3) throw std::invalid_argument("k must be >= 3");
  if (n < std::size_t(k)) throw std::invalid_argument("dataset smaller than k");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<std::vector<std::size_t>> folds(std::size_t(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % std::size_t(k)].push_back(idx[i]);
  return folds;
}

std::vector<FoldAssignment> kfold_assignments(std::size_t n, int k, std::uint64_t seed) {
  const auto folds = kfold_split(n, k, seed);
  std::vector<FoldAssignment> out;
  for (int i = 0; i < k; ++i) {
    FoldAssignment a;
    a.test = folds[std::size_t(i)];
    a.valid = folds[std::size_t((i + 1) % k)];
    for (int j = 0; j < k; ++j) {
      if (j == i || j == (i + 1) % k) continue;
      a.train.insert(a.train.end(), folds[std::size_t(j)].begin(), folds[std::size_t(j)].end());
    }
    out.push_back(std::move(a));
  }
  return out;
}

double MetricsReport::mean(const std::string& metric) const {
  const auto it = per_fold.find(metric);
  if (it == per_fold.end() || it->second.empty())
    throw std::out_of_range("no such metric: " + metric);
  return std::accumulate(it->second.begin(), it->second.end(), 0.0) /
         double(it->second.size());
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  nlohmann::json folds = nlohmann::json::object();
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [name, values] : per_fold) {
    folds[name] = values;
    means[name] = mean(name);
  }
  j["folds"] = folds;
  j["mean"] = means;
  if (!notes.empty()) j["notes"] = notes;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  os << "task: " << task << "\n";
  os << std::left << std::setw(18) << "metric" << std::setw(12) << "mean" << "folds\n";
  for (const auto& [name, values] : per_fold) {
    os << std::left << std::setw(18) << name << std::setw(12) << std::setprecision(4)
       << std::fixed << mean(name);
    os << std::setprecision(4);
    for (double v : values) os << v << " ";
    os << "\n";
  }
  return os.str();
}

}  // namespace ktele::harness
