#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "datapool.hpp"
#include "error.hpp"
#include "random.hpp"

namespace dado {

/// Two conflicting squared-distance objectives, f1 = |x - a|^2, f2 = |x - b|^2.
/// The Pareto set is the segment between the anchors.
struct AnalyticBiobjective {
  std::vector<double> anchor_a;
  std::vector<double> anchor_b;

  ObjectiveVector operator()(std::span<const double> x) const {
    if (x.size() != anchor_a.size())
      throw Error(ErrorKind::DimensionMismatch, "analytic oracle expects " + std::to_string(anchor_a.size()) +
                                                    " parameters, got " + std::to_string(x.size()));
    double fa = 0.0, fb = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      fa += (x[j] - anchor_a[j]) * (x[j] - anchor_a[j]);
      fb += (x[j] - anchor_b[j]) * (x[j] - anchor_b[j]);
    }
    return {fa, fb};
  }
};

/// The simulated expert. Pool-backed lookup or a closed-form objective.
class ExpertOracle {
 public:
  struct PoolBacked {};

  static ExpertOracle pool_backed() { return ExpertOracle(PoolBacked{}); }
  static ExpertOracle analytic(AnalyticBiobjective f) { return ExpertOracle(std::move(f)); }

  bool is_pool_backed() const { return std::holds_alternative<PoolBacked>(kind_); }

  ObjectiveVector annotate(const DesignCandidate& c) const {
    if (const auto* f = std::get_if<AnalyticBiobjective>(&kind_)) return (*f)(c.params);
    if (!c.true_objectives)
      throw Error(ErrorKind::MissingAnnotation, "candidate " + std::to_string(c.id) + " has no stored objectives");
    return *c.true_objectives;
  }

  std::vector<ObjectiveVector> annotate(std::span<const DesignCandidate> cs) const {
    std::vector<ObjectiveVector> out;
    out.reserve(cs.size());
    for (const auto& c : cs) out.push_back(annotate(c));
    return out;
  }

 private:
  explicit ExpertOracle(std::variant<PoolBacked, AnalyticBiobjective> kind) : kind_(std::move(kind)) {}

  std::variant<PoolBacked, AnalyticBiobjective> kind_;
};

enum class SyntheticKind { GaussianObjectives, AnalyticBiobjective };

struct SyntheticPoolSpec {
  SyntheticKind kind = SyntheticKind::AnalyticBiobjective;
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  // gaussian-objectives
  std::vector<double> mean{0.0, 0.0};
  std::vector<std::vector<double>> covariance{{1.0, 0.0}, {0.0, 1.0}};
  // analytic-biobjective; empty means the default anchors 0.25 and 0.75 in every dimension
  std::vector<double> anchor_a;
  std::vector<double> anchor_b;

  AnalyticBiobjective analytic_objective() const {
    AnalyticBiobjective f{anchor_a, anchor_b};
    if (f.anchor_a.empty()) f.anchor_a.assign(d, 0.25);
    if (f.anchor_b.empty()) f.anchor_b.assign(d, 0.75);
    return f;
  }
};

/// Lower-triangular L with L L^T = cov; throws unless cov is symmetric positive-definite.
inline std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& cov) {
  const std::size_t m = cov.size();
  for (const auto& row : cov)
    if (row.size() != m) throw Error(ErrorKind::InvalidCovariance, "covariance is not square");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(cov[i][j]), std::abs(cov[j][i])});
      if (std::abs(cov[i][j] - cov[j][i]) > 1e-12 * scale)
        throw Error(ErrorKind::InvalidCovariance, "covariance is not symmetric");
    }
  std::vector<std::vector<double>> L(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (!(s > 0.0)) throw Error(ErrorKind::InvalidCovariance, "covariance is not positive-definite");
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  return L;
}

/// Parameters are uniform in [0,1]^d for both kinds. Gaussian objectives are
/// independent of the parameters; analytic objectives are computed from them.
inline CandidatePool gen_synthetic_pool(const SyntheticPoolSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw Error(ErrorKind::InvalidConfig, "synthetic pool needs n > 0 and d > 0");
  Rng params_rng(derive_seed(spec.seed, "pool-params"));
  Rng objective_rng(derive_seed(spec.seed, "pool-objectives"));

  std::vector<std::vector<double>> chol;
  AnalyticBiobjective f;
  std::size_t num_obj = 2;
  if (spec.kind == SyntheticKind::GaussianObjectives) {
    if (spec.mean.size() != spec.covariance.size())
      throw Error(ErrorKind::InvalidCovariance, "mean and covariance dimensions differ");
    chol = cholesky(spec.covariance);
    num_obj = spec.mean.size();
  } else {
    f = spec.analytic_objective();
    if (f.anchor_a.size() != spec.d || f.anchor_b.size() != spec.d)
      throw Error(ErrorKind::InvalidConfig, "anchor dimension must equal d");
    if (f.anchor_a == f.anchor_b) throw Error(ErrorKind::InvalidConfig, "anchors must differ");
  }

  std::vector<DesignCandidate> rows(spec.n);
  std::vector<double> z(num_obj);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto& c = rows[i];
    c.id = i;
    c.params.resize(spec.d);
    for (auto& p : c.params) p = uniform_unit(params_rng);
    if (spec.kind == SyntheticKind::GaussianObjectives) {
      for (auto& v : z) v = standard_normal(objective_rng);
      ObjectiveVector y(spec.mean);
      for (std::size_t r = 0; r < num_obj; ++r)
        for (std::size_t k = 0; k <= r; ++k) y[r] += chol[r][k] * z[k];
      c.true_objectives = std::move(y);
    } else {
      c.true_objectives = f(c.params);
    }
  }
  return CandidatePool(std::move(rows), spec.d, num_obj);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Serializes a pool (with its stored objectives) in the standard CSV layout.
inline std::string pool_to_csv(const CandidatePool& pool) {
  std::string out;
  for (std::size_t j = 0; j < pool.dim(); ++j) out += (j ? ",p" : "p") + std::to_string(j);
  for (std::size_t j = 0; j < pool.num_obj(); ++j) out += ",j" + std::to_string(j);
  out += '\n';
  for (const auto& c : pool.candidates()) {
    for (std::size_t j = 0; j < c.params.size(); ++j) {
      if (j) out += ',';
      out += format_real(c.params[j]);
    }
    if (!c.true_objectives) throw Error(ErrorKind::MissingAnnotation, "candidate " + std::to_string(c.id));
    for (double y : *c.true_objectives) out += ',' + format_real(y);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

}  // namespace dado
