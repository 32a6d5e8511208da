#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace dado {

/// Objective values of one design; every objective is minimized.
using ObjectiveVector = std::vector<double>;

struct DesignCandidate {
  std::size_t id = 0;
  std::vector<double> params;
  /// Ground truth, present only for pooled candidates. Never read on the surrogate path.
  std::optional<ObjectiveVector> true_objectives;
};

struct FeatureBounds {
  double min = 0.0;
  double max = 0.0;
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace detail

/// Annotated store that serves both as the non-annotated pool and as the
/// backing data of the simulated expert. Ids are row positions.
class CandidatePool {
 public:
  CandidatePool() = default;

  CandidatePool(std::vector<DesignCandidate> candidates, std::size_t dim, std::size_t num_obj)
      : candidates_(std::move(candidates)), consumed_(candidates_.size(), false), dim_(dim), num_obj_(num_obj) {
    bounds_.assign(dim_, FeatureBounds{});
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
      const auto& c = candidates_[i];
      if (c.id != i) throw Error(ErrorKind::SchemaMismatch, "candidate ids must equal row positions");
      if (c.params.size() != dim_)
        throw Error(ErrorKind::SchemaMismatch, "candidate " + std::to_string(i) + " has wrong parameter count");
      if (!detail::all_finite(c.params))
        throw Error(ErrorKind::NonFiniteValue, "candidate " + std::to_string(i) + " has non-finite parameters");
      if (c.true_objectives) {
        if (c.true_objectives->size() != num_obj_)
          throw Error(ErrorKind::SchemaMismatch, "candidate " + std::to_string(i) + " has wrong objective count");
        if (!detail::all_finite(*c.true_objectives))
          throw Error(ErrorKind::NonFiniteValue, "candidate " + std::to_string(i) + " has non-finite objectives");
      }
      for (std::size_t j = 0; j < dim_; ++j) {
        if (i == 0 || c.params[j] < bounds_[j].min) bounds_[j].min = c.params[j];
        if (i == 0 || c.params[j] > bounds_[j].max) bounds_[j].max = c.params[j];
      }
    }
  }

  std::size_t size() const { return candidates_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t num_obj() const { return num_obj_; }
  std::size_t available() const { return candidates_.size() - consumed_count_; }
  std::size_t consumed_count() const { return consumed_count_; }
  bool is_consumed(std::size_t id) const { return consumed_.at(id); }
  const std::vector<FeatureBounds>& feature_bounds() const { return bounds_; }
  const DesignCandidate& at(std::size_t id) const { return candidates_.at(id); }
  const std::vector<DesignCandidate>& candidates() const { return candidates_; }

  /// Draws `initial_size` distinct candidates uniformly and marks them consumed.
  std::vector<DesignCandidate> initial_sample(std::size_t initial_size, Rng& rng) {
    auto picked = bootstrap_draw(initial_size, rng);
    std::vector<std::size_t> ids;
    ids.reserve(picked.size());
    for (const auto& c : picked) ids.push_back(c.id);
    consume(ids);
    return picked;
  }

  /// Uniform draw without replacement from the non-consumed candidates.
  /// Drawn candidates stay available until they are consumed.
  std::vector<DesignCandidate> bootstrap_draw(std::size_t draw_size, Rng& rng) const {
    if (draw_size > available())
      throw Error(ErrorKind::PoolExhausted, "requested " + std::to_string(draw_size) + " candidates but only " +
                                                std::to_string(available()) + " are available");
    std::vector<std::size_t> free_ids;
    free_ids.reserve(available());
    for (std::size_t i = 0; i < candidates_.size(); ++i)
      if (!consumed_[i]) free_ids.push_back(i);
    const auto picks = sample_without_replacement(free_ids.size(), draw_size, rng);
    std::vector<DesignCandidate> out;
    out.reserve(draw_size);
    for (std::size_t p : picks) out.push_back(candidates_[free_ids[p]]);
    return out;
  }

  /// All-or-nothing: validates every id before mutating.
  void consume(std::span<const std::size_t> ids) {
    std::vector<std::size_t> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const std::size_t id = sorted[k];
      if (id >= candidates_.size()) throw Error(ErrorKind::UnknownId, "id " + std::to_string(id));
      if (consumed_[id] || (k > 0 && sorted[k - 1] == id))
        throw Error(ErrorKind::AlreadyConsumed, "id " + std::to_string(id));
    }
    for (std::size_t id : sorted) consumed_[id] = true;
    consumed_count_ += sorted.size();
  }

 private:
  std::vector<DesignCandidate> candidates_;
  std::vector<bool> consumed_;
  std::vector<FeatureBounds> bounds_;
  std::size_t consumed_count_ = 0;
  std::size_t dim_ = 0;
  std::size_t num_obj_ = 0;
};

/// Reads a pool CSV: header row, then `dim` parameter columns followed by
/// `num_obj` objective columns per row.
inline CandidatePool load_pool(const std::string& path, std::size_t dim, std::size_t num_obj) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open pool file '" + path + "'");
  const std::size_t width = dim + num_obj;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (detail::split_csv_line(line).size() != width)
    throw Error(ErrorKind::SchemaMismatch, "header of '" + path + "' does not have " + std::to_string(width) + " columns");

  std::vector<DesignCandidate> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const std::size_t row = rows.size();
    auto cells = detail::split_csv_line(line);
    if (cells.size() != width)
      throw Error(ErrorKind::SchemaMismatch, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                                 " columns, expected " + std::to_string(width));
    std::vector<double> values(width);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string cell = detail::trim(cells[j]);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw Error(ErrorKind::SchemaMismatch, "row " + std::to_string(row) + " column " + std::to_string(j) +
                                                   ": '" + cell + "' is not a number");
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteValue, "row " + std::to_string(row) + " column " + std::to_string(j));
      values[j] = v;
    }
    DesignCandidate c;
    c.id = row;
    c.params.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(dim));
    c.true_objectives = ObjectiveVector(values.begin() + static_cast<std::ptrdiff_t>(dim), values.end());
    rows.push_back(std::move(c));
  }
  if (rows.empty()) throw Error(ErrorKind::SchemaMismatch, "'" + path + "' has no data rows");
  return CandidatePool(std::move(rows), dim, num_obj);
}

/// Per-dimension min-max map onto [0, 1] over the pool bounds; constant
/// dimensions map to 0.5.
class FeatureNormalizer {
 public:
  FeatureNormalizer() = default;
  explicit FeatureNormalizer(std::vector<FeatureBounds> bounds) : bounds_(std::move(bounds)) {}

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != bounds_.size())
      throw Error(ErrorKind::DimensionMismatch, "feature vector has " + std::to_string(x.size()) + " entries, expected " +
                                                    std::to_string(bounds_.size()));
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double span = bounds_[j].max - bounds_[j].min;
      out[j] = span > 0.0 ? (x[j] - bounds_[j].min) / span : 0.5;
    }
    return out;
  }

  std::size_t dim() const { return bounds_.size(); }
  const std::vector<FeatureBounds>& bounds() const { return bounds_; }

 private:
  std::vector<FeatureBounds> bounds_;
};

/// Per-objective z-score with population standard deviation.
class TargetNormalizer {
 public:
  static constexpr double kStdFloor = 1e-12;

  TargetNormalizer() = default;
  TargetNormalizer(std::vector<double> mean, std::vector<double> stddev)
      : mean_(std::move(mean)), std_(std::move(stddev)) {
    if (mean_.size() != std_.size()) throw Error(ErrorKind::DimensionMismatch, "mean/std length differ");
  }

  static TargetNormalizer fit(std::span<const ObjectiveVector> targets) {
    if (targets.empty()) throw Error(ErrorKind::DegenerateInput, "cannot fit a target normalizer on no data");
    const std::size_t m = targets.front().size();
    std::vector<double> mean(m, 0.0), var(m, 0.0);
    for (const auto& y : targets) {
      if (y.size() != m) throw Error(ErrorKind::DimensionMismatch, "ragged target vectors");
      for (std::size_t j = 0; j < m; ++j) mean[j] += y[j];
    }
    for (auto& v : mean) v /= static_cast<double>(targets.size());
    for (const auto& y : targets)
      for (std::size_t j = 0; j < m; ++j) var[j] += (y[j] - mean[j]) * (y[j] - mean[j]);
    std::vector<double> sd(m);
    for (std::size_t j = 0; j < m; ++j) sd[j] = std::max(std::sqrt(var[j] / static_cast<double>(targets.size())), kStdFloor);
    return TargetNormalizer(std::move(mean), std::move(sd));
  }

  ObjectiveVector apply(std::span<const double> y) const {
    check(y.size());
    ObjectiveVector out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = (y[j] - mean_[j]) / std_[j];
    return out;
  }

  ObjectiveVector invert(std::span<const double> z) const {
    check(z.size());
    ObjectiveVector out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * std_[j] + mean_[j];
    return out;
  }

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

 private:
  void check(std::size_t n) const {
    if (n != mean_.size())
      throw Error(ErrorKind::DimensionMismatch, "objective vector has " + std::to_string(n) + " entries, expected " +
                                                    std::to_string(mean_.size()));
  }

  std::vector<double> mean_;
  std::vector<double> std_;
};

struct Normalizers {
  FeatureNormalizer features;
  TargetNormalizer targets;
};

/// Feature scaling comes from the pool bounds; target scaling is refit on the
/// current training targets.
inline Normalizers fit_normalizers(const CandidatePool& pool, std::span<const ObjectiveVector> train_targets) {
  if (train_targets.empty()) throw Error(ErrorKind::DegenerateInput, "training set is empty");
  return {FeatureNormalizer(pool.feature_bounds()), TargetNormalizer::fit(train_targets)};
}

}  // namespace dado
