#pragma once

// Execution models for the post-baseline variables: the treatment
// randomizer, linear and logistic regressions fitted on complete cases, and
// the three ways of adding randomness to a regression prediction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/special.hpp"

namespace rctsynth {

// ---------------------------------------------------------------------------
// Design matrices: intercept, continuous predictors as-is, discrete
// predictors as indicators against their first category.

struct DesignTerm {
  std::string name;
  std::string column;
  std::optional<std::size_t> category;  // set for indicator terms
};

inline std::vector<DesignTerm> design_terms(const Schema& schema, const std::vector<std::string>& predictors) {
  std::vector<DesignTerm> terms{{"(intercept)", "", std::nullopt}};
  for (const auto& p : predictors) {
    const auto it = std::find_if(schema.begin(), schema.end(), [&](const ColumnSchema& c) { return c.name == p; });
    if (it == schema.end()) throw ArgumentError("unknown predictor '" + p + "'");
    if (it->is_discrete()) {
      for (std::size_t k = 1; k < it->categories.size(); ++k) {
        terms.push_back({p + "=" + it->categories[k], p, k});
      }
    } else {
      terms.push_back({p, p, std::nullopt});
    }
  }
  return terms;
}

// Rows must have no missing predictor cell.
inline Eigen::MatrixXd design_matrix(const DataTable& table, const std::vector<DesignTerm>& terms,
                                     const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()));
  std::vector<std::optional<std::size_t>> cols;
  for (const auto& t : terms) cols.push_back(t.column.empty() ? std::nullopt : std::optional(table.column_index(t.column)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    for (std::size_t j = 0; j < terms.size(); ++j) {
      double x = 1.0;
      if (cols[j]) {
        if (table.missing(r, *cols[j])) {
          throw ArgumentError("missing value in predictor '" + terms[j].column + "' at row " + std::to_string(r));
        }
        const double v = table.at(r, *cols[j]);
        x = terms[j].category ? (v == static_cast<double>(*terms[j].category) ? 1.0 : 0.0) : v;
      }
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return X;
}

inline std::vector<std::size_t> all_rows(const DataTable& t) {
  std::vector<std::size_t> r(t.n_rows());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// ---------------------------------------------------------------------------
// Linear model

struct LinearModel {
  std::string response;
  std::vector<std::string> predictors;
  std::vector<DesignTerm> terms;
  std::vector<double> coefficients;  // one per term; aliased terms hold 0
  std::vector<char> aliased;
  std::vector<double> residuals;     // training residual pool
  double sigma_resid = 0.0;
  std::size_t rank = 0;
  std::vector<std::string> warnings;

  std::vector<double> predict(const DataTable& rows) const {
    const Eigen::MatrixXd X = design_matrix(rows, terms, all_rows(rows));
    const Eigen::Map<const Eigen::VectorXd> beta(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
    const Eigen::VectorXd yhat = X * beta;
    return {yhat.data(), yhat.data() + yhat.size()};
  }
};

namespace regression_detail {

inline void check_predictors(const DataTable& table, const std::string& response,
                             const std::vector<std::string>& predictors) {
  table.column_index(response);
  for (const auto& p : predictors) {
    table.column_index(p);
    if (p == response) throw ArgumentError("response '" + response + "' cannot also be a predictor");
  }
}

inline std::vector<std::string> model_columns(const std::string& response, const std::vector<std::string>& predictors) {
  std::vector<std::string> cols = predictors;
  cols.push_back(response);
  return cols;
}

// Weighted least squares with aliased-column dropping. `w` may be empty (OLS).
inline LinearModel least_squares(const DataTable& table, const std::string& response,
                                 const std::vector<std::string>& predictors, const std::vector<std::size_t>& rows,
                                 const std::vector<double>& w) {
  LinearModel m;
  m.response = response;
  m.predictors = predictors;
  m.terms = design_terms(table.schema(), predictors);
  const std::size_t p = m.terms.size();
  if (rows.size() <= p) {
    throw DegenerateInputError("linear model for '" + response + "' has " + std::to_string(rows.size()) +
                               " complete rows but " + std::to_string(p) + " coefficients");
  }
  const Eigen::MatrixXd X = design_matrix(table, m.terms, rows);
  const std::size_t yc = table.column_index(response);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = table.at(rows[i], yc);

  Eigen::MatrixXd Xw = X;
  Eigen::VectorXd yw = y;
  if (!w.empty()) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double s = std::sqrt(w[static_cast<std::size_t>(i)]);
      Xw.row(i) *= s;
      yw(i) *= s;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  const auto rank = static_cast<std::size_t>(qr.rank());
  m.aliased.assign(p, 0);
  if (rank < p) {
    const auto& perm = qr.colsPermutation().indices();
    for (std::size_t k = rank; k < p; ++k) {
      const auto j = static_cast<std::size_t>(perm(static_cast<Eigen::Index>(k)));
      m.aliased[j] = 1;
      m.warnings.push_back("term '" + m.terms[j].name + "' is aliased and was dropped");
    }
  }
  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < p; ++j) {
    if (!m.aliased[j]) keep.push_back(static_cast<Eigen::Index>(j));
  }
  Eigen::MatrixXd Xk(Xw.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) Xk.col(static_cast<Eigen::Index>(k)) = Xw.col(keep[k]);
  const Eigen::VectorXd beta_k = Xk.colPivHouseholderQr().solve(yw);

  m.coefficients.assign(p, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    m.coefficients[static_cast<std::size_t>(keep[k])] = beta_k(static_cast<Eigen::Index>(k));
  }
  m.rank = keep.size();
  const Eigen::Map<const Eigen::VectorXd> beta(m.coefficients.data(), static_cast<Eigen::Index>(p));
  const Eigen::VectorXd r = y - X * beta;
  m.residuals.assign(r.data(), r.data() + r.size());
  double ss = 0.0;
  for (double e : m.residuals) ss += e * e;
  m.sigma_resid = std::sqrt(ss / static_cast<double>(rows.size() - m.rank));
  return m;
}

}  // namespace regression_detail

// Ordinary least squares on the complete cases of response + predictors.
inline LinearModel fit_linear(const DataTable& table, const std::string& response,
                              const std::vector<std::string>& predictors) {
  regression_detail::check_predictors(table, response, predictors);
  if (table.column_schema(table.column_index(response)).is_discrete()) {
    throw ArgumentError("linear response '" + response + "' must be continuous");
  }
  const auto rows = complete_case_rows(table, regression_detail::model_columns(response, predictors));
  return regression_detail::least_squares(table, response, predictors, rows, {});
}

// Weighted least squares; `weights` align with the complete-case rows.
inline LinearModel fit_weighted_linear(const DataTable& table, const std::string& response,
                                       const std::vector<std::string>& predictors, const std::vector<double>& weights) {
  regression_detail::check_predictors(table, response, predictors);
  if (table.column_schema(table.column_index(response)).is_discrete()) {
    throw ArgumentError("linear response '" + response + "' must be continuous");
  }
  const auto rows = complete_case_rows(table, regression_detail::model_columns(response, predictors));
  if (weights.size() != rows.size()) {
    throw ArgumentError("expected " + std::to_string(rows.size()) + " weights (one per complete case), got " +
                        std::to_string(weights.size()));
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ArgumentError("weights must be positive and finite");
  }
  return regression_detail::least_squares(table, response, predictors, rows, weights);
}

// ---------------------------------------------------------------------------
// Logistic model

struct LogisticModel {
  std::string response;
  std::vector<std::string> predictors;
  std::vector<DesignTerm> terms;
  std::vector<double> coefficients;
  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
  std::vector<std::string> warnings;

  std::vector<double> predict_probability(const DataTable& rows) const {
    const Eigen::MatrixXd X = design_matrix(rows, terms, all_rows(rows));
    const Eigen::Map<const Eigen::VectorXd> beta(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
    const Eigen::VectorXd eta = X * beta;
    std::vector<double> p(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[static_cast<std::size_t>(i)] = logistic(eta(i));
    return p;
  }
};

namespace regression_detail {

inline double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + e^eta) computed stably
    const double e = eta(i);
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y(i) * e - softplus;
  }
  return ll;
}

inline LogisticModel irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::string response,
                          std::vector<std::string> predictors, std::vector<DesignTerm> terms) {
  constexpr int max_iterations = 50;
  constexpr double score_tolerance = 1e-8;
  LogisticModel m;
  m.response = std::move(response);
  m.predictors = std::move(predictors);
  m.terms = std::move(terms);
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = X * beta;
  double ll = log_likelihood(y, eta);
  for (int it = 0; it <= max_iterations; ++it) {
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = logistic(eta(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    const Eigen::VectorXd score = X.transpose() * (y - mu);
    m.max_abs_score = score.cwiseAbs().maxCoeff();
    m.iterations = it;
    if (m.max_abs_score < score_tolerance) {
      m.converged = true;
      break;
    }
    if (it == max_iterations) break;
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd step = info.colPivHouseholderQr().solve(score);
    // Step halving guards against overshooting.
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd cand_eta = X * candidate;
    double cand_ll = log_likelihood(y, cand_eta);
    for (int h = 0; h < 30 && cand_ll < ll - 1e-12 * std::fabs(ll); ++h) {
      scale *= 0.5;
      candidate = beta + scale * step;
      cand_eta = X * candidate;
      cand_ll = log_likelihood(y, cand_eta);
    }
    beta = candidate;
    eta = cand_eta;
    ll = cand_ll;
  }
  m.coefficients.assign(beta.data(), beta.data() + beta.size());
  // Under separation the score vanishes only because the coefficients run off
  // towards infinity; fitted probabilities of numerically 0 or 1 give it away.
  const double max_eta = n > 0 ? eta.cwiseAbs().maxCoeff() : 0.0;
  if (max_eta > 30.0) {
    m.converged = false;
    m.warnings.push_back("perfect separation: fitted probabilities numerically 0 or 1");
  } else if (!m.converged) {
    m.warnings.push_back("IRLS reached the iteration cap without converging");
  }
  return m;
}

}  // namespace regression_detail

// Maximum likelihood by IRLS. The response must be a two-category discrete
// column; its second category is the positive class.
inline LogisticModel fit_logistic(const DataTable& table, const std::string& response,
                                  const std::vector<std::string>& predictors) {
  regression_detail::check_predictors(table, response, predictors);
  const std::size_t yc = table.column_index(response);
  const auto& ys = table.column_schema(yc);
  if (!ys.is_discrete() || ys.categories.size() != 2) {
    throw ArgumentError("logistic response '" + response + "' must be a binary discrete column");
  }
  const auto rows = complete_case_rows(table, regression_detail::model_columns(response, predictors));
  auto terms = design_terms(table.schema(), predictors);
  const Eigen::MatrixXd X = design_matrix(table, terms, rows);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  double positives = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = table.at(rows[i], yc);
    positives += table.at(rows[i], yc);
  }
  if (positives == 0.0 || positives == static_cast<double>(rows.size())) {
    throw DegenerateInputError("logistic response '" + response + "' has a single class among complete cases");
  }
  return regression_detail::irls(X, y, response, predictors, std::move(terms));
}

// Logistic model for the indicator that `target` is observed.
inline LogisticModel fit_missingness_model(const DataTable& table, const std::string& target,
                                           const std::vector<std::string>& predictors) {
  const std::size_t tc = table.column_index(target);
  const std::size_t n_missing = table.column(tc).missing_count();
  if (n_missing == 0) throw DegenerateInputError("target '" + target + "' has no missing values");
  if (n_missing == table.n_rows()) throw DegenerateInputError("target '" + target + "' is never observed");
  const std::string indicator = "observed(" + target + ")";
  std::vector<std::string> names = predictors;
  DataTable sub = table.select_columns(names);
  Schema schema = sub.schema();
  std::vector<Column> cols = sub.columns();
  ColumnSchema r;
  r.name = indicator;
  r.kind = ColumnKind::discrete;
  r.categories = {"missing", "observed"};
  schema.push_back(r);
  std::vector<double> rv(table.n_rows());
  for (std::size_t i = 0; i < table.n_rows(); ++i) rv[i] = table.missing(i, tc) ? 0.0 : 1.0;
  cols.emplace_back(std::move(rv));
  return fit_logistic(DataTable(std::move(schema), std::move(cols)), indicator, predictors);
}

// ---------------------------------------------------------------------------
// Randomness strategies and generation

enum class RandomnessVariant { normal_noise, residual_draw, admissible_rejection };

inline std::string to_string(RandomnessVariant v) {
  switch (v) {
    case RandomnessVariant::normal_noise: return "normal_noise";
    case RandomnessVariant::residual_draw: return "residual_draw";
    case RandomnessVariant::admissible_rejection: return "admissible_rejection";
  }
  return "?";
}

// Accepts the long names and the short forms a, b, c.
inline RandomnessVariant randomness_variant_from_string(const std::string& s) {
  if (s == "normal_noise" || s == "a") return RandomnessVariant::normal_noise;
  if (s == "residual_draw" || s == "b") return RandomnessVariant::residual_draw;
  if (s == "admissible_rejection" || s == "c") return RandomnessVariant::admissible_rejection;
  throw ArgumentError("unknown randomness strategy '" + s + "'");
}

struct RandomnessStrategy {
  RandomnessVariant variant = RandomnessVariant::admissible_rejection;
  std::optional<double> bound;
  std::size_t max_rejections = 10000;

  void validate() const {
    if (variant == RandomnessVariant::admissible_rejection && !bound) {
      throw ArgumentError("admissible_rejection needs a bound");
    }
    if (max_rejections == 0) throw ArgumentError("max_rejections must be positive");
  }
};

inline std::vector<double> generate_continuous(const LinearModel& model, const DataTable& rows,
                                               const RandomnessStrategy& strategy, Seed seed) {
  strategy.validate();
  const std::vector<double> pred = model.predict(rows);
  std::vector<double> out(pred.size());
  Rng rng(seed);
  const bool needs_pool = strategy.variant != RandomnessVariant::normal_noise;
  if (needs_pool && model.residuals.empty()) throw ArgumentError("model has an empty residual pool");
  for (std::size_t r = 0; r < pred.size(); ++r) {
    switch (strategy.variant) {
      case RandomnessVariant::normal_noise:
        out[r] = model.sigma_resid > 0.0 ? pred[r] + model.sigma_resid * rng.normal() : pred[r];
        break;
      case RandomnessVariant::residual_draw:
        out[r] = pred[r] + model.residuals[rng.index(model.residuals.size())];
        break;
      case RandomnessVariant::admissible_rejection: {
        bool accepted = false;
        for (std::size_t k = 0; k < strategy.max_rejections; ++k) {
          const double v = pred[r] + model.residuals[rng.index(model.residuals.size())];
          if (v >= *strategy.bound) {
            out[r] = v;
            accepted = true;
            break;
          }
        }
        if (!accepted) {
          throw AdmissibilityError("row " + std::to_string(r) + " of '" + model.response + "': no admissible value >= " +
                                   detail::format_double(*strategy.bound) + " after " +
                                   std::to_string(strategy.max_rejections) + " residual draws (prediction " +
                                   detail::format_double(pred[r]) + ")");
        }
        break;
      }
    }
  }
  return out;
}

// Bernoulli(p_hat) per row; 1 is the positive (second) category.
inline std::vector<int> generate_binary(const LogisticModel& model, const DataTable& rows, Seed seed) {
  const std::vector<double> p = model.predict_probability(rows);
  std::vector<int> out(p.size());
  Rng rng(seed);
  for (std::size_t r = 0; r < p.size(); ++r) out[r] = rng.uniform() < p[r] ? 1 : 0;
  return out;
}

// n independent categorical draws; returns category indices into `labels`.
inline std::vector<std::size_t> sample_treatment(std::size_t n, const std::vector<double>& probabilities,
                                                 const std::vector<std::string>& labels, Seed seed) {
  if (probabilities.size() != labels.size() || probabilities.empty()) {
    throw ArgumentError("treatment probabilities and labels must be non-empty and of equal length");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("treatment probabilities must be non-negative");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ArgumentError("treatment probabilities must sum to 1");
  std::vector<double> cum(probabilities.size());
  std::partial_sum(probabilities.begin(), probabilities.end(), cum.begin());
  Rng rng(seed);
  std::vector<std::size_t> out(n);
  for (auto& x : out) {
    const double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < cum.size() && !(u < cum[k] && probabilities[k] > 0.0)) ++k;
    while (probabilities[k] == 0.0 && k > 0) --k;
    x = k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const RandomnessStrategy& s) {
  nlohmann::json j = {{"variant", to_string(s.variant)}, {"max_rejections", s.max_rejections}};
  j["bound"] = s.bound ? nlohmann::json(*s.bound) : nlohmann::json(nullptr);
  return j;
}

// FNV-1a over the residual bit patterns; identifies a pool without storing it.
inline std::string residual_digest(const std::vector<double>& residuals) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double r : residuals) {
    std::uint64_t bits;
    std::memcpy(&bits, &r, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json to_json(const LinearModel& m) {
  nlohmann::json coef = nlohmann::json::object();
  for (std::size_t j = 0; j < m.terms.size(); ++j) coef[m.terms[j].name] = m.aliased[j] ? nlohmann::json(nullptr) : nlohmann::json(m.coefficients[j]);
  const auto [mn, mx] = std::minmax_element(m.residuals.begin(), m.residuals.end());
  return {{"type", "linear"},
          {"response", m.response},
          {"predictors", m.predictors},
          {"coefficients", coef},
          {"sigma_resid", m.sigma_resid},
          {"residuals", {{"count", m.residuals.size()},
                         {"min", m.residuals.empty() ? 0.0 : *mn},
                         {"max", m.residuals.empty() ? 0.0 : *mx},
                         {"fnv1a64", residual_digest(m.residuals)}}},
          {"warnings", m.warnings}};
}

inline nlohmann::json to_json(const LogisticModel& m) {
  nlohmann::json coef = nlohmann::json::object();
  for (std::size_t j = 0; j < m.terms.size(); ++j) coef[m.terms[j].name] = m.coefficients[j];
  return {{"type", "logistic"},
          {"response", m.response},
          {"predictors", m.predictors},
          {"coefficients", coef},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"warnings", m.warnings}};
}

}  // namespace rctsynth
