#pragma once

// Fidelity metrics between a real and a synthetic table: univariate
// (1 - KS, 1 - TVD), bivariate (correlation and contingency similarity) and
// machine-learning efficacy, plus aggregation over simulation runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/regression.hpp"
#include "rctsynth/stats.hpp"

namespace rctsynth {

// ---------------------------------------------------------------------------
// Univariate

// Two-sample KS statistic, evaluated at every pooled sample point.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("KS statistic needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) x = a[i];
    else x = b[j];
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double ks_complement(const std::vector<double>& real, const std::vector<double>& synth) {
  return 1.0 - ks_statistic(real, synth);
}

template <typename Key>
std::map<Key, double> proportions(const std::vector<Key>& v) {
  std::map<Key, double> p;
  for (const auto& x : v) p[x] += 1.0;
  for (auto& [k, c] : p) c /= static_cast<double>(v.size());
  return p;
}

// 1 - half the L1 distance between two proportion tables over the union of keys.
template <typename Key>
double l1_complement(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  double l1 = 0.0;
  auto i = p.begin();
  auto j = q.begin();
  while (i != p.end() || j != q.end()) {
    if (j == q.end() || (i != p.end() && i->first < j->first)) {
      l1 += i->second;
      ++i;
    } else if (i == p.end() || j->first < i->first) {
      l1 += j->second;
      ++j;
    } else {
      l1 += std::fabs(i->second - j->second);
      ++i;
      ++j;
    }
  }
  return std::clamp(1.0 - 0.5 * l1, 0.0, 1.0);
}

inline double tvd_complement(const std::vector<int>& real, const std::vector<int>& synth) {
  if (real.empty() || synth.empty()) throw ArgumentError("TVD needs two non-empty samples");
  return l1_complement(proportions(real), proportions(synth));
}

// ---------------------------------------------------------------------------
// Bivariate

inline double correlation_similarity_from(double rho_real, double rho_synth) {
  return std::clamp(1.0 - 0.5 * std::fabs(rho_real - rho_synth), 0.0, 1.0);
}

// Spearman-based similarity; std::nullopt when either correlation is undefined.
inline std::optional<double> correlation_similarity(const std::vector<double>& real_x, const std::vector<double>& real_y,
                                                    const std::vector<double>& synth_x,
                                                    const std::vector<double>& synth_y) {
  const Correlation r = spearman(real_x, real_y);
  const Correlation s = spearman(synth_x, synth_y);
  if (r.degenerate || s.degenerate) return std::nullopt;
  return correlation_similarity_from(r.value, s.value);
}

inline double contingency_similarity(const std::vector<int>& real_a, const std::vector<int>& real_b,
                                     const std::vector<int>& synth_a, const std::vector<int>& synth_b) {
  if (real_a.size() != real_b.size() || synth_a.size() != synth_b.size()) {
    throw ArgumentError("contingency similarity: paired lists must have equal length");
  }
  if (real_a.empty() || synth_a.empty()) throw ArgumentError("contingency similarity needs non-empty tables");
  std::vector<std::pair<int, int>> r(real_a.size()), s(synth_a.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = {real_a[i], real_b[i]};
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = {synth_a[i], synth_b[i]};
  return l1_complement(proportions(r), proportions(s));
}

// ---------------------------------------------------------------------------
// Classifiers

struct ClassificationScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

inline ClassificationScores prf1(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("prf1: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    else if (predicted[i] == 1) ++fp;
    else if (truth[i] == 1) ++fn;
  }
  ClassificationScores s;
  if (tp + fp > 0) s.precision = tp / (tp + fp);
  else s.precision_degenerate = true;
  if (tp + fn > 0) s.recall = tp / (tp + fn);
  else s.recall_degenerate = true;
  if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  else s.f1_degenerate = true;
  return s;
}

// Feature encoding fitted on a training table: mean/mode imputation, z-scored
// continuous columns, indicator columns for discrete ones.
class FeatureEncoder {
 public:
  FeatureEncoder(const DataTable& train, const std::string& label, bool drop_reference_category) {
    label_ = train.column_index(label);
    drop_first_ = drop_reference_category;
    for (std::size_t c = 0; c < train.n_cols(); ++c) {
      if (c == label_) continue;
      Feature f;
      f.column = c;
      const auto& cs = train.column_schema(c);
      const auto obs = train.column(c).observed();
      if (cs.is_discrete()) {
        f.discrete = true;
        f.n_categories = cs.categories.size();
        std::vector<std::size_t> counts(f.n_categories, 0);
        for (double v : obs) ++counts[static_cast<std::size_t>(v)];
        f.fill = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      } else {
        f.fill = obs.empty() ? 0.0 : mean(obs);
        f.center = f.fill;
        const double sd = population_sd(obs);
        f.scale = sd > 0.0 ? sd : 1.0;
      }
      features_.push_back(f);
    }
  }

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& f : features_) w += f.discrete ? f.n_categories - (drop_first_ ? 1 : 0) : 1;
    return w;
  }

  // Row-major matrix, one row per table row.
  std::vector<double> encode(const DataTable& t) const {
    const std::size_t w = width();
    std::vector<double> out(t.n_rows() * w, 0.0);
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      std::size_t o = r * w;
      for (const auto& f : features_) {
        const double v = t.missing(r, f.column) ? f.fill : t.at(r, f.column);
        if (f.discrete) {
          const auto k = static_cast<std::size_t>(v);
          const std::size_t first = drop_first_ ? 1 : 0;
          if (k >= first) out[o + k - first] = 1.0;
          o += f.n_categories - first;
        } else {
          out[o++] = (v - f.center) / f.scale;
        }
      }
    }
    return out;
  }

 private:
  struct Feature {
    std::size_t column = 0;
    bool discrete = false;
    std::size_t n_categories = 0;
    double fill = 0.0;
    double center = 0.0;
    double scale = 1.0;
  };
  std::size_t label_ = 0;
  bool drop_first_ = false;
  std::vector<Feature> features_;
};

namespace metrics_detail {

inline std::vector<int> labels_of(const DataTable& t, std::size_t label) {
  std::vector<int> y(t.n_rows());
  for (std::size_t r = 0; r < t.n_rows(); ++r) y[r] = static_cast<int>(t.at(r, label));
  return y;
}

inline void require_binary_label(const DataTable& t, const std::string& label) {
  const auto& cs = t.column_schema(t.column_index(label));
  if (!cs.is_discrete() || cs.categories.size() != 2) {
    throw ArgumentError("label '" + label + "' must be a binary discrete column");
  }
}

inline void require_both_classes(const std::vector<int>& y, const std::string& what) {
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (!has_pos || !has_neg) throw DegenerateInputError(what + " contains a single class");
}

}  // namespace metrics_detail

// k-nearest-neighbour majority vote on standardized, imputed, one-hot
// features. Distance ties resolve to the lower training row; vote ties to 0.
inline std::vector<int> knn_classify(const DataTable& train, const DataTable& test, const std::string& label,
                                     std::size_t k = 5) {
  metrics_detail::require_binary_label(train, label);
  const DataTable tr = complete_cases(train, {label});
  if (k == 0 || k > tr.n_rows()) throw ArgumentError("k must lie in [1, training rows]");
  const auto y = metrics_detail::labels_of(tr, tr.column_index(label));
  metrics_detail::require_both_classes(y, "KNN training set");
  const FeatureEncoder enc(tr, label, false);
  const std::size_t w = enc.width();
  const auto xtr = enc.encode(tr);
  const auto xte = enc.encode(test);
  std::vector<int> out(test.n_rows());
  std::vector<std::pair<double, std::size_t>> dist(tr.n_rows());
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    const double* q = &xte[i * w];
    for (std::size_t j = 0; j < tr.n_rows(); ++j) {
      const double* p = &xtr[j * w];
      double s = 0.0;
      for (std::size_t f = 0; f < w; ++f) s += (q[f] - p[f]) * (q[f] - p[f]);
      dist[j] = {s, j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t pos = 0;
    for (std::size_t m = 0; m < k; ++m) pos += static_cast<std::size_t>(y[dist[m].second]);
    out[i] = 2 * pos > k ? 1 : 0;
  }
  return out;
}

// Logistic regression on the encoded features, threshold 0.5.
inline std::vector<int> logistic_classify(const DataTable& train, const DataTable& test, const std::string& label) {
  metrics_detail::require_binary_label(train, label);
  const DataTable tr = complete_cases(train, {label});
  const auto y = metrics_detail::labels_of(tr, tr.column_index(label));
  metrics_detail::require_both_classes(y, "logistic training set");
  const FeatureEncoder enc(tr, label, true);
  const std::size_t w = enc.width();
  const auto xtr = enc.encode(tr);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(tr.n_rows()), static_cast<Eigen::Index>(w + 1));
  Eigen::VectorXd yy(static_cast<Eigen::Index>(tr.n_rows()));
  for (std::size_t r = 0; r < tr.n_rows(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    X(ri, 0) = 1.0;
    for (std::size_t f = 0; f < w; ++f) X(ri, static_cast<Eigen::Index>(f + 1)) = xtr[r * w + f];
    yy(ri) = y[r];
  }
  const LogisticModel m = regression_detail::irls(X, yy, label, {}, {});
  const auto xte = enc.encode(test);
  std::vector<int> out(test.n_rows());
  for (std::size_t r = 0; r < test.n_rows(); ++r) {
    double eta = m.coefficients[0];
    for (std::size_t f = 0; f < w; ++f) eta += m.coefficients[f + 1] * xte[r * w + f];
    out[r] = logistic(eta) >= 0.5 ? 1 : 0;
  }
  return out;
}

enum class ClassifierKind { knn, logistic };

inline std::string to_string(ClassifierKind k) { return k == ClassifierKind::knn ? "knn" : "logistic"; }

inline ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "knn") return ClassifierKind::knn;
  if (s == "logistic") return ClassifierKind::logistic;
  throw ArgumentError("unknown classifier '" + s + "'");
}

struct EfficacyRecord {
  ClassifierKind classifier = ClassifierKind::knn;
  ClassificationScores real;
  ClassificationScores synth;

  double diff_precision() const { return real.precision - synth.precision; }
  double diff_recall() const { return real.recall - synth.recall; }
  double diff_f1() const { return real.f1 - synth.f1; }

  static std::optional<double> relative(double r, double s) {
    if (r == 0.0) return std::nullopt;
    return (r - s) / r;
  }
};

struct EfficacyOptions {
  std::vector<ClassifierKind> classifiers{ClassifierKind::knn, ClassifierKind::logistic};
  std::size_t k = 5;
  double test_fraction = 0.3;
};

// Splits both tables with the same seed, trains one classifier per table and
// scores both on the real held-out rows.
inline std::vector<EfficacyRecord> ml_efficacy(const DataTable& real, const DataTable& synth, const std::string& label,
                                               Seed seed, const EfficacyOptions& opt = {}) {
  metrics_detail::require_binary_label(real, label);
  metrics_detail::require_binary_label(synth, label);
  const Seed split_seed = derive_seed(seed, 0xEFF1CAC7ULL);
  auto [real_train, real_test_all] = train_test_split(real, opt.test_fraction, split_seed);
  auto [synth_train, synth_test] = train_test_split(synth, opt.test_fraction, split_seed);
  (void)synth_test;
  const DataTable real_test = complete_cases(real_test_all, {label});
  const auto truth = metrics_detail::labels_of(real_test, real_test.column_index(label));

  std::vector<EfficacyRecord> out;
  for (ClassifierKind kind : opt.classifiers) {
    EfficacyRecord rec;
    rec.classifier = kind;
    auto run = [&](const DataTable& train) {
      return kind == ClassifierKind::knn ? knn_classify(train, real_test, label, opt.k)
                                         : logistic_classify(train, real_test, label);
    };
    rec.real = prf1(run(real_train), truth);
    rec.synth = prf1(run(synth_train), truth);
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricValue {
  std::string metric;
  std::string target;
  std::optional<double> value;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct MetricsReport {
  std::size_t run_id = 0;
  std::vector<MetricValue> univariate;
  std::vector<MetricValue> bivariate;
  std::vector<EfficacyRecord> efficacy;
  double seconds = 0.0;

  // All metric values in a fixed order: univariate, bivariate, efficacy.
  std::vector<MetricValue> flatten() const {
    std::vector<MetricValue> out = univariate;
    out.insert(out.end(), bivariate.begin(), bivariate.end());
    for (const auto& e : efficacy) {
      const std::string m = "efficacy_" + to_string(e.classifier);
      auto add = [&](const std::string& name, double r, double s) {
        out.push_back({m, name + "_real", r});
        out.push_back({m, name + "_synth", s});
        out.push_back({m, name + "_diff", r - s});
        out.push_back({m, name + "_reldiff", EfficacyRecord::relative(r, s)});
      };
      add("precision", e.real.precision, e.synth.precision);
      add("recall", e.real.recall, e.synth.recall);
      add("f1", e.real.f1, e.synth.f1);
    }
    return out;
  }

  std::optional<double> find(const std::string& metric, const std::string& target) const {
    for (const auto& v : flatten()) {
      if (v.metric == metric && v.target == target) return v.value;
    }
    return std::nullopt;
  }
};

struct MetricConfig {
  std::string label;  // empty: no efficacy metrics
  EfficacyOptions efficacy;
  bool univariate = true;
  bool bivariate = true;
};

namespace metrics_detail {

inline bool same_schema(const Schema& a, const Schema& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].kind != b[i].kind || a[i].categories != b[i].categories) return false;
  }
  return true;
}

inline std::vector<int> as_ints(const std::vector<double>& v) {
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<int>(v[i]);
  return out;
}

// Values of columns a and b on rows where both are observed.
inline std::pair<std::vector<double>, std::vector<double>> paired(const DataTable& t, std::size_t a, std::size_t b) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    if (t.missing(r, a) || t.missing(r, b)) continue;
    out.first.push_back(t.at(r, a));
    out.second.push_back(t.at(r, b));
  }
  return out;
}

}  // namespace metrics_detail

inline MetricsReport score_tables(const DataTable& real, const DataTable& synth, const MetricConfig& config,
                                  Seed seed = 0) {
  if (!metrics_detail::same_schema(real.schema(), synth.schema())) {
    throw ArgumentError("real and synthetic tables have different schemas");
  }
  MetricsReport rep;
  const auto& schema = real.schema();
  const std::size_t d = schema.size();

  if (config.univariate) {
    for (std::size_t c = 0; c < d; ++c) {
      const auto r = real.column(c).observed();
      const auto s = synth.column(c).observed();
      std::optional<double> v;
      if (!r.empty() && !s.empty()) {
        v = schema[c].is_discrete() ? tvd_complement(metrics_detail::as_ints(r), metrics_detail::as_ints(s))
                                    : ks_complement(r, s);
      }
      rep.univariate.push_back({schema[c].is_discrete() ? "tvd_complement" : "ks_complement", schema[c].name, v});
    }
  }

  if (config.bivariate) {
    // Quartile cut points from the real data, shared by both tables.
    std::vector<std::optional<std::array<double, 3>>> cuts(d);
    for (std::size_t c = 0; c < d; ++c) {
      if (schema[c].is_discrete()) continue;
      const auto obs = real.column(c).observed();
      if (obs.size() >= 4) cuts[c] = quartile_boundaries(obs);
    }
    auto discretize = [&](const std::vector<double>& v, std::size_t c) {
      if (schema[c].is_discrete()) return metrics_detail::as_ints(v);
      std::vector<int> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = quartile_bin_of(v[i], *cuts[c]);
      return out;
    };
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a + 1; b < d; ++b) {
        const std::string target = schema[a].name + ":" + schema[b].name;
        const auto [rx, ry] = metrics_detail::paired(real, a, b);
        const auto [sx, sy] = metrics_detail::paired(synth, a, b);
        const bool both_cont = !schema[a].is_discrete() && !schema[b].is_discrete();
        std::optional<double> v;
        if (both_cont) {
          if (rx.size() >= 3 && sx.size() >= 3) v = correlation_similarity(rx, ry, sx, sy);
          rep.bivariate.push_back({"correlation_similarity", target, v});
        } else {
          const bool binnable = (schema[a].is_discrete() || cuts[a]) && (schema[b].is_discrete() || cuts[b]);
          if (binnable && !rx.empty() && !sx.empty()) {
            v = contingency_similarity(discretize(rx, a), discretize(ry, b), discretize(sx, a), discretize(sy, b));
          }
          rep.bivariate.push_back({"contingency_similarity", target, v});
        }
      }
    }
  }

  if (!config.label.empty()) rep.efficacy = ml_efficacy(real, synth, config.label, seed, config.efficacy);
  return rep;
}

// ---------------------------------------------------------------------------
// Aggregation

struct MetricSummary {
  std::string metric;
  std::string target;
  std::size_t count = 0;    // runs with a defined value
  std::size_t missing = 0;  // runs where the value was undefined
  double mean = 0.0;
  double sd = 0.0;  // population
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

struct RunSummary {
  std::size_t runs = 0;
  std::vector<MetricSummary> metrics;
  MetricSummary timing;
};

// Linear-interpolation quantile (the usual box-plot convention).
inline double interpolated_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline MetricSummary summarize(std::string metric, std::string target, const std::vector<std::optional<double>>& vals) {
  MetricSummary s;
  s.metric = std::move(metric);
  s.target = std::move(target);
  std::vector<double> v;
  for (const auto& x : vals) {
    if (x) v.push_back(*x);
    else ++s.missing;
  }
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.mean = mean(v);
  s.sd = population_sd(v);
  s.min = v.front();
  s.max = v.back();
  s.q1 = interpolated_quantile(v, 0.25);
  s.median = interpolated_quantile(v, 0.5);
  s.q3 = interpolated_quantile(v, 0.75);
  return s;
}

inline RunSummary aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("aggregate_runs needs at least one report");
  const auto first = reports.front().flatten();
  std::vector<std::vector<std::optional<double>>> columns(first.size());
  std::vector<std::optional<double>> times;
  for (const auto& rep : reports) {
    const auto flat = rep.flatten();
    if (flat.size() != first.size()) throw ArgumentError("reports have different metric keys");
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (flat[i].metric != first[i].metric || flat[i].target != first[i].target) {
        throw ArgumentError("reports have different metric keys");
      }
      columns[i].push_back(flat[i].value);
    }
    times.push_back(rep.seconds);
  }
  RunSummary out;
  out.runs = reports.size();
  for (std::size_t i = 0; i < first.size(); ++i) {
    out.metrics.push_back(summarize(first[i].metric, first[i].target, columns[i]));
  }
  out.timing = summarize("timing", "seconds", times);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const MetricSummary& s) {
  return {{"metric", s.metric}, {"target", s.target}, {"count", s.count}, {"missing", s.missing},
          {"mean", s.mean},     {"sd", s.sd},         {"min", s.min},     {"q1", s.q1},
          {"median", s.median}, {"q3", s.q3},         {"max", s.max}};
}

inline nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : s.metrics) metrics.push_back(to_json(m));
  return {{"runs", s.runs}, {"metrics", metrics}, {"timing", to_json(s.timing)}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["run_id"] = r.run_id;
  j["seconds"] = r.seconds;
  auto values = [](const std::vector<MetricValue>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& m : v) {
      a.push_back({{"metric", m.metric}, {"target", m.target},
                   {"value", m.value ? nlohmann::json(*m.value) : nlohmann::json(nullptr)}});
    }
    return a;
  };
  j["univariate"] = values(r.univariate);
  j["bivariate"] = values(r.bivariate);
  nlohmann::json eff = nlohmann::json::array();
  for (const auto& e : r.efficacy) {
    auto scores = [](const ClassificationScores& s) {
      return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    };
    eff.push_back({{"classifier", to_string(e.classifier)}, {"real", scores(e.real)}, {"synthetic", scores(e.synth)}});
  }
  j["efficacy"] = eff;
  return j;
}

// Long format: run_id,metric,target,value (NA when undefined). Timing is
// deliberately absent so identical seeds give byte-identical files.
inline void write_runs_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "run_id,metric,target,value\n";
  for (const auto& rep : reports) {
    for (const auto& v : rep.flatten()) {
      out << rep.run_id << ',' << v.metric << ',' << detail::quote_if_needed(v.target) << ','
          << (v.value ? detail::format_double(*v.value) : std::string("NA")) << '\n';
    }
  }
}

// Reads runs.csv back into per-run flat metric lists (run order preserved).
inline std::vector<std::pair<std::size_t, std::vector<MetricValue>>> read_runs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "run_id,metric,target,value") {
    throw ParseError("runs.csv: missing or unexpected header");
  }
  std::vector<std::pair<std::size_t, std::vector<MetricValue>>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw ParseError("runs.csv line " + std::to_string(line_no) + ": expected 4 fields");
    const auto id = detail::parse_double(f[0]);
    if (!id) throw ParseError("runs.csv line " + std::to_string(line_no) + ": bad run_id");
    const auto run = static_cast<std::size_t>(*id);
    std::optional<double> value;
    const auto vf = detail::trim(f[3]);
    if (vf != "NA") {
      value = detail::parse_double(vf);
      if (!value) throw ParseError("runs.csv line " + std::to_string(line_no) + ": bad value");
    }
    if (out.empty() || out.back().first != run) out.push_back({run, {}});
    out.back().second.push_back({f[1], f[2], value});
  }
  return out;
}

}  // namespace rctsynth
