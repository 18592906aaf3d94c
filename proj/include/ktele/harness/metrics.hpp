#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ktele/core/random.hpp"
#include "ktele/core/types.hpp"

namespace ktele::harness {

// Rank of `truth` among `scores` (descending = higher is better); tied blocks
// share their mean rank, so a two-way tie at the top ranks 1.5.
double rank_with_ties(const Vec& scores, Index truth, bool descending);

double mean_rank(const std::vector<double>& ranks);
double hits_at_k(const std::vector<double>& ranks, double k);
double mrr(const std::vector<double>& ranks);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool no_positive_predictions = false;  // precision reported as 0
};

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels);

// k disjoint folds covering 0..n-1, sizes differing by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k, std::uint64_t seed);

struct FoldAssignment {
  std::vector<std::size_t> train, valid, test;
};

// Rotation: fold i tests fold i, validates fold (i+1) % k, trains on the rest.
std::vector<FoldAssignment> kfold_assignments(std::size_t n, int k, std::uint64_t seed);

struct MetricsReport {
  std::string task;
  std::map<std::string, std::vector<double>> per_fold;
  std::map<std::string, std::string> notes;

  void add(const std::string& metric, double value) { per_fold[metric].push_back(value); }
  double mean(const std::string& metric) const;
  std::string to_json() const;
  std::string to_table() const;  // human-readable
};

}  // namespace ktele::harness
