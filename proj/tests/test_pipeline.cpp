#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rctsynth/pipeline.hpp"
#include "rctsynth/reference.hpp"
#include "rctsynth/stats.hpp"

using namespace rctsynth;

namespace {

const DataTable& real_small() {
  static const DataTable t = generate_reference_dataset(11, 600);
  return t;
}

const DataTable& real_full() {
  static const DataTable t = generate_reference_dataset(7);
  return t;
}

bool same_values(const DataTable& a, const DataTable& b) {
  if (a.schema() != b.schema() || a.n_rows() != b.n_rows()) return false;
  for (std::size_t c = 0; c < a.n_cols(); ++c) {
    if (a.column(c).values != b.column(c).values || a.column(c).missing != b.column(c).missing) return false;
  }
  return true;
}

std::vector<MetricValue> values_of(const MetricsReport& r) { return r.flatten(); }

}  // namespace

TEST(Pipeline, NSynthDefaultsToNReal) {
  const auto cfg = reference_config();
  const DataTable s = run_pipeline(cfg, real_small(), 1);
  EXPECT_EQ(s.n_rows(), real_small().n_rows());
  auto c2 = cfg;
  c2.n_synth = 250;
  EXPECT_EQ(run_pipeline(c2, real_small(), 1).n_rows(), 250u);
}

TEST(Pipeline, TreatmentArmsNearQuarter) {
  const DataTable s = run_pipeline(reference_config(), real_full(), 3);
  const auto& t = s.column("treatment").values;
  const double n = static_cast<double>(t.size());
  const double band = 3.0 * std::sqrt(0.25 * 0.75 / n);
  for (int k = 0; k < 4; ++k) {
    const double p = static_cast<double>(std::count(t.begin(), t.end(), static_cast<double>(k))) / n;
    EXPECT_NEAR(p, 0.25, band) << "arm " << k;
  }
}

TEST(Pipeline, StrategyCLeavesNoNegativeCd4) {
  const DataTable s = run_pipeline(reference_config(), real_full(), 5);
  for (const char* name : {"cd4_20", "cd4_96"}) {
    const auto v = s.column(name).observed();
    EXPECT_EQ(std::count_if(v.begin(), v.end(), [](double x) { return x < 0.0; }), 0) << name;
  }
}

TEST(Pipeline, SchemaBoundsAndCategoriesMatchReal) {
  const auto cfg = reference_config();
  for (Seed seed : {1u, 2u, 3u}) {
    const DataTable s = run_pipeline(cfg, real_small(), seed);
    ASSERT_EQ(s.schema(), real_small().schema());
    for (std::size_t c = 0; c < s.n_cols(); ++c) {
      const auto& cs = s.column_schema(c);
      EXPECT_EQ(s.column(c).missing_count(), 0u) << cs.name;
      EXPECT_EQ(count_bound_violations(s, c), 0u) << cs.name;
      if (cs.is_discrete()) {
        for (double v : s.column(c).values) {
          EXPECT_TRUE(v >= 0.0 && v < static_cast<double>(cs.categories.size()) && v == std::floor(v)) << cs.name;
        }
      } else {
        for (double v : s.column(c).values) EXPECT_TRUE(std::isfinite(v)) << cs.name;
      }
    }
  }
}

TEST(Pipeline, DeterministicForSeed) {
  const auto cfg = reference_config();
  const DataTable a = run_pipeline(cfg, real_small(), 42);
  const DataTable b = run_pipeline(cfg, real_small(), 42);
  const DataTable c = run_pipeline(cfg, real_small(), 43);
  EXPECT_TRUE(same_values(a, b));
  EXPECT_FALSE(same_values(a, c));
}

TEST(Pipeline, AccessAuditRespectsStageOrder) {
  const auto cfg = reference_config();
  std::vector<StageAccess> access;
  run_pipeline(cfg, real_small(), 9, &access);
  ASSERT_EQ(access.size(), cfg.stages.size());
  std::set<std::string> produced;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    for (const auto& c : access[i].synthetic_columns) {
      EXPECT_TRUE(produced.count(c)) << "stage " << i << " read synthetic '" << c << "' before it existed";
    }
    std::set<std::string> allowed = produced;
    for (const auto& t : cfg.stages[i].targets) allowed.insert(t);
    for (const auto& c : access[i].real_columns) {
      EXPECT_TRUE(allowed.count(c)) << "stage " << i << " read real '" << c << "' from a later stage";
    }
    for (const auto& t : cfg.stages[i].targets) produced.insert(t);
  }
  EXPECT_TRUE(access[1].real_columns.empty());
  EXPECT_EQ(access[4].synthetic_columns.size(), 17u);
}

TEST(Pipeline, StageFailureCarriesContext) {
  const auto& real = real_small();
  std::vector<Column> cols = real.columns();
  auto& c20 = cols[real.column_index("cd4_20")];
  std::fill(c20.missing.begin(), c20.missing.end(), std::uint8_t{1});
  const DataTable broken(real.schema(), std::move(cols));
  try {
    run_pipeline(reference_config(), broken, 1);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), 2u);
    EXPECT_NE(std::string(e.what()).find("stage 2 (regression_continuous -> cd4_20)"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, RealSchemaMismatchRejected) {
  auto cfg = reference_config();
  cfg.schema[0].lower_bound = 13.0;
  cfg.stages[0].targets = reference_config().stages[0].targets;
  EXPECT_THROW(run_pipeline(cfg, real_small(), 1), SchemaError);
}

TEST(Pipeline, LogPreprocessingKeepsOutputPositiveAndOnOriginalScale) {
  auto cfg = reference_config();
  cfg.preprocess_log = true;
  const DataTable s = run_pipeline(cfg, real_small(), 4);
  for (const char* name : {"cd4_baseline", "cd4_20", "cd4_96"}) {
    const auto v = s.column(name).observed();
    EXPECT_GT(*std::min_element(v.begin(), v.end()), 0.0) << name;
    const auto r = real_small().column(name).observed();
    const double mr = mean(r), ms = mean(v);
    EXPECT_NEAR(ms / mr, 1.0, 0.2) << name;
  }
}

TEST(Pipeline, MissingnessExtensionEmitsMissingCd4_96) {
  auto cfg = reference_config();
  cfg.model_missingness = true;
  cfg.emit_missingness = true;
  const DataTable s = run_pipeline(cfg, real_full(), 8);
  const double frac = static_cast<double>(s.column("cd4_96").missing_count()) / static_cast<double>(s.n_rows());
  EXPECT_NEAR(frac, 0.37, 0.04);
  EXPECT_EQ(s.column("cd4_20").missing_count(), 0u);
  cfg.emit_missingness = false;
  EXPECT_EQ(run_pipeline(cfg, real_full(), 8).column("cd4_96").missing_count(), 0u);
}

TEST(Pipeline, IndependenceBaselineKeepsMarginalsBreaksDependence) {
  const DataTable& real = real_full();
  const DataTable ind = independence_baseline(real, 5);
  for (std::size_t c = 0; c < real.n_cols(); ++c) {
    auto a = real.column(c).observed(), b = ind.column(c).observed();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b) << real.column_schema(c).name;
  }
  const auto x = real.column("cd4_baseline").values, y = real.column("cd4_20").values;
  EXPECT_GT(kendall_tau(x, y).value, 0.3);
  EXPECT_LT(std::fabs(kendall_tau(ind.column("cd4_baseline").values, ind.column("cd4_20").values).value), 0.05);
}

TEST(Simulate, RunsAreReproducibleAndWorkerCountInvariant) {
  auto cfg = reference_config();
  cfg.runs = 3;
  cfg.workers = 1;
  const auto a = simulate(cfg, real_small());
  cfg.workers = 3;
  const auto b = simulate(cfg, real_small());
  ASSERT_EQ(a.reports.size(), 3u);
  ASSERT_EQ(b.reports.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.reports[i].run_id, i);
    EXPECT_EQ(values_of(a.reports[i]), values_of(b.reports[i]));
  }
  EXPECT_NE(values_of(a.reports[0]), values_of(a.reports[1]));
  const auto [r0, s0] = simulate_run(cfg, real_small(), 0);
  EXPECT_EQ(values_of(r0), values_of(a.reports[0]));
}

TEST(Simulate, SummaryCoversEveryMetricKey) {
  auto cfg = reference_config();
  cfg.runs = 2;
  SimulationOptions opt;
  opt.plot_run = 1;
  const auto res = simulate(cfg, real_small(), opt);
  const auto flat = res.reports.front().flatten();
  EXPECT_EQ(res.summary.runs, 2u);
  EXPECT_EQ(res.summary.metrics.size(), flat.size());
  for (const auto& m : res.summary.metrics) {
    if (m.count == 0) continue;
    EXPECT_LE(m.min, m.q1);
    EXPECT_LE(m.q1, m.median);
    EXPECT_LE(m.median, m.q3);
    EXPECT_LE(m.q3, m.max);
  }
  ASSERT_TRUE(res.plot_table.has_value());
  EXPECT_EQ(res.plot_run, 1u);
  EXPECT_TRUE(same_values(*res.plot_table, simulate_run(cfg, real_small(), 1).second));
}

TEST(Simulate, FailurePolicy) {
  const auto& real = real_small();
  std::vector<Column> cols = real.columns();
  auto& c20 = cols[real.column_index("cd4_20")];
  std::fill(c20.missing.begin(), c20.missing.end(), std::uint8_t{1});
  const DataTable broken(real.schema(), std::move(cols));
  auto cfg = reference_config();
  cfg.runs = 3;
  try {
    simulate(cfg, broken);
    FAIL() << "expected abort";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("simulation aborted"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("cd4_20"), std::string::npos);
  }
}
