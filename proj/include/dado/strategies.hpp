#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datapool.hpp"
#include "error.hpp"
#include "random.hpp"

namespace dado {

enum class StrategyKind { L2Select, L2Reject, Random };

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::L2Select: return "l2-select";
    case StrategyKind::L2Reject: return "l2-reject";
    case StrategyKind::Random: return "random";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view name) {
  if (name == "l2-select" || name == "L2S") return StrategyKind::L2Select;
  if (name == "l2-reject" || name == "L2R") return StrategyKind::L2Reject;
  if (name == "random") return StrategyKind::Random;
  throw Error(ErrorKind::InvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

/// Euclidean norm of the objective vector.
inline double score_l2s(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::sqrt(s);
}

/// Per-objective maximum over a draw; generally not itself a member of the draw.
inline ObjectiveVector component_max(std::span<const ObjectiveVector> ys) {
  if (ys.empty()) throw Error(ErrorKind::EmptyDraw, "component_max of an empty draw");
  ObjectiveVector out = ys.front();
  for (const auto& y : ys) {
    if (y.size() != out.size()) throw Error(ErrorKind::DimensionMismatch, "ragged objective vectors");
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = std::max(out[j], y[j]);
  }
  return out;
}

/// Euclidean distance from the draw's component-wise maximum.
inline double score_l2r(std::span<const double> y, std::span<const double> y_max) {
  if (y.size() != y_max.size())
    throw Error(ErrorKind::DimensionMismatch, "objective vector has " + std::to_string(y.size()) + " entries, y_max has " +
                                                  std::to_string(y_max.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) s += (y[j] - y_max[j]) * (y[j] - y_max[j]);
  return std::sqrt(s);
}

/// Indices sorted ascending by score; ties keep index order.
inline std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

inline std::vector<double> l2s_scores(std::span<const ObjectiveVector> ys) {
  std::vector<double> s(ys.size());
  for (std::size_t n = 0; n < ys.size(); ++n) s[n] = score_l2s(ys[n]);
  return s;
}

inline std::vector<double> l2r_scores(std::span<const ObjectiveVector> ys, const ObjectiveVector& y_max) {
  std::vector<double> s(ys.size());
  for (std::size_t n = 0; n < ys.size(); ++n) s[n] = score_l2r(ys[n], y_max);
  return s;
}

/// Preference order of a draw, best first.
///
/// L2-Select prefers the smallest norm. L2-Reject rejects from the front of
/// the ascending distance-to-max order and keeps the tail, so its preference
/// order is that ascending order reversed: any prefix of length aq is exactly
/// the set L2-Reject keeps. Random has no order of its own and is ranked by
/// the L2-Select score.
inline std::vector<std::size_t> preference_order(StrategyKind kind, std::span<const ObjectiveVector> ys) {
  if (ys.empty()) return {};
  if (kind == StrategyKind::L2Reject) {
    auto order = ascending_order(l2r_scores(ys, component_max(ys)));
    std::reverse(order.begin(), order.end());
    return order;
  }
  return ascending_order(l2s_scores(ys));
}

struct SelectionResult {
  /// Positions within the draw, in preference order (draw order for Random).
  std::vector<std::size_t> selected_indices;
  /// Strategy score per draw candidate; empty for Random.
  std::vector<double> scores;
  /// Component-wise maximum of the draw (L2-Reject only).
  std::optional<ObjectiveVector> y_max;
};

/// Chooses `aq_size` of the drawn candidates from their (scaled) predictions.
inline SelectionResult select(StrategyKind kind, std::span<const ObjectiveVector> predictions, std::size_t aq_size, Rng& rng) {
  const std::size_t draw = predictions.size();
  if (aq_size > draw)
    throw Error(ErrorKind::AcquisitionTooLarge, "aq_size " + std::to_string(aq_size) + " exceeds draw of " + std::to_string(draw));
  SelectionResult result;
  switch (kind) {
    case StrategyKind::L2Select: {
      result.scores = l2s_scores(predictions);
      const auto order = ascending_order(result.scores);
      result.selected_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(aq_size));
      break;
    }
    case StrategyKind::L2Reject: {
      if (draw == 0) break;
      result.y_max = component_max(predictions);
      result.scores = l2r_scores(predictions, *result.y_max);
      const auto order = ascending_order(result.scores);
      // reject the first draw - aq_size, keep the rest (farthest first)
      result.selected_indices.assign(order.rbegin(), order.rbegin() + static_cast<std::ptrdiff_t>(aq_size));
      break;
    }
    case StrategyKind::Random:
      result.selected_indices = sample_without_replacement(draw, aq_size, rng);
      break;
  }
  return result;
}

}  // namespace dado
