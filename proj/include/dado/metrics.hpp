#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "datapool.hpp"
#include "error.hpp"
#include "strategies.hpp"

namespace dado {

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t train_size = 0;
  double intersections = 0.0;
  double mr_raw = 0.0;
  double mr_norm = 0.0;
  double srocc = 0.0;
  double best_mse = 0.0;
  double rnd_mse = 0.0;
};

/// Ranking of a draw by ground truth under the given strategy; position k
/// (0-based) holds the candidate of true rank k + 1.
inline std::vector<std::size_t> reference_order(std::span<const ObjectiveVector> truths, StrategyKind kind) {
  return preference_order(kind, truths);
}

/// Fraction of the selected set that is also in the truth-selected set.
inline double intersections(std::span<const std::size_t> selected, std::span<const std::size_t> true_top, std::size_t aq_size) {
  if (aq_size == 0) throw Error(ErrorKind::DegenerateInput, "aq_size must be positive");
  if (selected.size() != aq_size || true_top.size() != aq_size)
    throw Error(ErrorKind::SizeMismatch, "both sets must contain aq_size = " + std::to_string(aq_size) + " ids");
  const std::unordered_set<std::size_t> top(true_top.begin(), true_top.end());
  const std::unordered_set<std::size_t> sel(selected.begin(), selected.end());
  std::size_t hits = 0;
  for (auto id : sel) hits += top.count(id);
  return static_cast<double>(hits) / static_cast<double>(aq_size);
}

namespace detail {

inline std::unordered_map<std::size_t, std::size_t> rank_lookup(std::span<const std::size_t> true_order) {
  std::unordered_map<std::size_t, std::size_t> rank;
  rank.reserve(true_order.size());
  for (std::size_t k = 0; k < true_order.size(); ++k) rank.emplace(true_order[k], k + 1);
  return rank;
}

}  // namespace detail

/// Average 1-based true rank of the selected candidates.
inline double mean_rank(std::span<const std::size_t> selected, std::span<const std::size_t> true_order, std::size_t aq_size) {
  if (aq_size == 0 || selected.size() != aq_size)
    throw Error(ErrorKind::SizeMismatch, "expected " + std::to_string(aq_size) + " selected ids");
  const auto rank = detail::rank_lookup(true_order);
  double sum = 0.0;
  for (auto id : selected) {
    auto it = rank.find(id);
    if (it == rank.end()) throw Error(ErrorKind::UnknownId, "id " + std::to_string(id) + " is not in the reference order");
    sum += static_cast<double>(it->second);
  }
  return sum / static_cast<double>(aq_size);
}

inline double optimal_mean_rank(std::size_t aq_size) { return (static_cast<double>(aq_size) + 1.0) / 2.0; }

/// Maps raw MR onto [0,1] between the optimum (0) and the first iteration's value (1).
inline double normalize_mr(double raw, double mr_optimal, double mr_first) {
  if (mr_first <= mr_optimal) return 0.0;
  return std::clamp((raw - mr_optimal) / (mr_first - mr_optimal), 0.0, 1.0);
}

/// Spearman correlation between the predicted positions 1..m of the top-m
/// predicted candidates and their true ranks, re-ranked among those m.
/// Reference orders are strict, so there are no ties.
inline double srocc(std::span<const std::size_t> predicted_top, std::span<const std::size_t> true_order, std::size_t aq_size) {
  if (aq_size < 2) throw Error(ErrorKind::DegenerateInput, "SROCC needs at least two candidates");
  if (predicted_top.size() != aq_size)
    throw Error(ErrorKind::SizeMismatch, "expected " + std::to_string(aq_size) + " predicted ids");
  const auto rank = detail::rank_lookup(true_order);
  std::vector<std::size_t> true_rank(aq_size);
  for (std::size_t k = 0; k < aq_size; ++k) {
    auto it = rank.find(predicted_top[k]);
    if (it == rank.end()) throw Error(ErrorKind::UnknownId, "id " + std::to_string(predicted_top[k]) + " is not in the reference order");
    true_rank[k] = it->second;
  }
  std::vector<std::size_t> by_true(aq_size);
  for (std::size_t k = 0; k < aq_size; ++k) by_true[k] = k;
  std::sort(by_true.begin(), by_true.end(), [&](std::size_t a, std::size_t b) { return true_rank[a] < true_rank[b]; });
  double sum_d2 = 0.0;
  for (std::size_t r = 0; r < aq_size; ++r) {
    const double d = static_cast<double>(by_true[r]) - static_cast<double>(r);
    sum_d2 += d * d;
  }
  const double m = static_cast<double>(aq_size);
  return 1.0 - 6.0 * sum_d2 / (m * (m * m - 1.0));
}

/// Mean squared error over every candidate and objective.
inline double mse(std::span<const ObjectiveVector> pred, std::span<const ObjectiveVector> truth) {
  if (pred.size() != truth.size()) throw Error(ErrorKind::SizeMismatch, "prediction and truth counts differ");
  if (pred.empty()) throw Error(ErrorKind::DegenerateInput, "MSE of an empty set");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].size() != truth[n].size()) throw Error(ErrorKind::SizeMismatch, "objective widths differ at " + std::to_string(n));
    for (std::size_t j = 0; j < pred[n].size(); ++j) sum += (pred[n][j] - truth[n][j]) * (pred[n][j] - truth[n][j]);
    count += pred[n].size();
  }
  return sum / static_cast<double>(count);
}

/// Trapezoidal area under a unit-spaced curve. With `normalize` the area is
/// divided by the x-extent so that a constant curve c has AUC c.
inline double auc(std::span<const double> curve, bool normalize = true) {
  if (curve.size() < 2) throw Error(ErrorKind::DegenerateInput, "AUC needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) area += 0.5 * (curve[i - 1] + curve[i]);
  return normalize ? area / static_cast<double>(curve.size() - 1) : area;
}

}  // namespace dado
