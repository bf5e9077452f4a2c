#pragma once

// Empirical univariate marginals and the maps between data space and the
// copula's uniform space.
//
// Continuous columns use cdf(x) = max(1, #{x_i <= x}) / (n + 1), which keeps
// pseudo-observations strictly inside (0,1). The inverse is the
// left-continuous empirical quantile (smallest x_(k) with k/n >= u), so a
// uniform draw reproduces the observed sample with mass 1/n per point.
//
// Discrete columns are continuized: category k owns the interval
// [p_{k-1}, p_k) of cumulative proportions, pseudo-observations are uniform
// jitter inside that interval and the inverse snaps u back to the owning
// category.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/random.hpp"

namespace rctsynth {

class EmpiricalMarginal {
 public:
  EmpiricalMarginal() = default;

  const std::string& column() const { return column_; }
  ColumnKind kind() const { return kind_; }
  std::size_t n() const { return sorted_.size(); }
  const std::vector<double>& sorted_values() const { return sorted_; }
  // Cumulative category proportions p_1..p_K (discrete only; p_K = 1).
  const std::vector<double>& cumulative() const { return cumulative_; }

  double cdf(double x) const {
    if (kind_ == ColumnKind::discrete) {
      const auto k = static_cast<std::size_t>(x);
      return k < cumulative_.size() ? cumulative_[k] : 1.0;
    }
    const auto le = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin());
    return static_cast<double>(std::max<std::size_t>(le, 1)) / static_cast<double>(sorted_.size() + 1);
  }

  double inverse(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw ArgumentError("inverse empirical cdf requires u in (0,1), got " + std::to_string(u));
    if (kind_ == ColumnKind::discrete) {
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const auto k = static_cast<std::size_t>(it - cumulative_.begin());
      return static_cast<double>(std::min(k, cumulative_.size() - 1));
    }
    return empirical_quantile_sorted(sorted_, u);
  }

  // Uniform-space image of one observation; discrete cells draw jitter from rng.
  double to_uniform(double x, Rng& rng) const {
    if (kind_ == ColumnKind::continuous) return cdf(x);
    const auto k = static_cast<std::size_t>(x);
    const double lo = k == 0 ? 0.0 : cumulative_[k - 1];
    const double hi = cumulative_[k];
    return lo + rng.uniform() * (hi - lo);
  }

  static EmpiricalMarginal fit(std::vector<double> values, ColumnKind kind = ColumnKind::continuous,
                               std::size_t n_categories = 0, std::string column = {}) {
    if (values.size() < 2) {
      throw DegenerateInputError("marginal fit for '" + column + "' needs at least 2 values, got " +
                                 std::to_string(values.size()));
    }
    EmpiricalMarginal m;
    m.column_ = std::move(column);
    m.kind_ = kind;
    std::sort(values.begin(), values.end());
    m.sorted_ = std::move(values);
    if (kind == ColumnKind::discrete) {
      if (n_categories < 2) throw ArgumentError("discrete marginal needs the category count");
      std::vector<double> counts(n_categories, 0.0);
      for (double v : m.sorted_) counts.at(static_cast<std::size_t>(v)) += 1.0;
      m.cumulative_.resize(n_categories);
      double acc = 0.0;
      for (std::size_t k = 0; k < n_categories; ++k) {
        acc += counts[k];
        m.cumulative_[k] = acc / static_cast<double>(m.sorted_.size());
      }
      m.cumulative_.back() = 1.0;
    }
    return m;
  }

  // Rebuilds a marginal from its serialized parts.
  static EmpiricalMarginal from_parts(std::string column, ColumnKind kind, std::vector<double> sorted_values,
                                      std::vector<double> cumulative) {
    EmpiricalMarginal m;
    m.column_ = std::move(column);
    m.kind_ = kind;
    m.sorted_ = std::move(sorted_values);
    m.cumulative_ = std::move(cumulative);
    if (m.sorted_.size() < 2 || !std::is_sorted(m.sorted_.begin(), m.sorted_.end())) {
      throw ArgumentError("marginal '" + m.column_ + "' needs an ascending sample of size >= 2");
    }
    return m;
  }

 private:
  std::string column_;
  ColumnKind kind_ = ColumnKind::continuous;
  std::vector<double> sorted_;
  std::vector<double> cumulative_;
};

inline EmpiricalMarginal fit_marginal(const std::vector<double>& values) { return EmpiricalMarginal::fit(values); }

inline EmpiricalMarginal fit_marginal(const DataTable& table, std::size_t c) {
  const auto& cs = table.column_schema(c);
  return EmpiricalMarginal::fit(table.column(c).observed(), cs.kind, cs.categories.size(), cs.name);
}

inline double inverse_empirical_cdf(const EmpiricalMarginal& m, double u) { return m.inverse(u); }

// Row-major n x d grid of values in (0,1).
struct UniformGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  UniformGrid() = default;
  UniformGrid(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.5) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  friend bool operator==(const UniformGrid&, const UniformGrid&) = default;
};

// Pseudo-observations for the listed columns, using marginals fitted on the
// same table. Discrete jitter draws come from `seed`.
inline UniformGrid pseudo_observations(const DataTable& table, const std::vector<std::string>& columns, Seed seed,
                                       std::vector<EmpiricalMarginal>* fitted = nullptr) {
  UniformGrid grid(table.n_rows(), columns.size());
  Rng rng(seed);
  std::vector<EmpiricalMarginal> marginals;
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const std::size_t c = table.column_index(columns[j]);
    idx.push_back(c);
    if (table.column(c).missing_count() > 0) {
      throw ArgumentError("pseudo-observations: column '" + columns[j] + "' has missing cells; apply complete_cases first");
    }
    marginals.push_back(fit_marginal(table, c));
  }
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      grid(r, j) = marginals[j].to_uniform(table.at(r, idx[j]), rng);
    }
  }
  if (fitted) *fitted = std::move(marginals);
  return grid;
}

}  // namespace rctsynth
