#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rctsynth/marginals.hpp"
#include "rctsynth/metrics.hpp"
#include "rctsynth/random.hpp"

using namespace rctsynth;

namespace {

DataTable one_column(std::vector<double> v, ColumnKind kind = ColumnKind::continuous, std::size_t k = 0) {
  ColumnSchema c;
  c.name = "x";
  c.kind = kind;
  for (std::size_t i = 0; i < k; ++i) c.categories.push_back("c" + std::to_string(i));
  Column col;
  col.missing.assign(v.size(), 0);
  col.values = std::move(v);
  return DataTable({c}, {col});
}

}  // namespace

TEST(Marginal, RankConventionCdf) {
  const auto m = fit_marginal({30.0, 10.0, 20.0});
  EXPECT_DOUBLE_EQ(m.cdf(20.0), 0.5);
  EXPECT_DOUBLE_EQ(m.cdf(5.0), 0.25);  // below the minimum: 1/(n+1)
  EXPECT_DOUBLE_EQ(m.cdf(30.0), 0.75);
  EXPECT_GT(m.cdf(-1e300), 0.0);
  EXPECT_LE(m.cdf(1e300), 1.0);
}

TEST(Marginal, LeftContinuousInverse) {
  const auto m = fit_marginal({10.0, 20.0, 30.0});
  EXPECT_EQ(inverse_empirical_cdf(m, 0.5), 20.0);
  EXPECT_EQ(inverse_empirical_cdf(m, std::nextafter(1.0, 0.0)), 30.0);
  EXPECT_EQ(inverse_empirical_cdf(m, 1e-12), 10.0);
  EXPECT_EQ(inverse_empirical_cdf(m, 1.0 / 3.0), 10.0);
  EXPECT_THROW(inverse_empirical_cdf(m, 0.0), ArgumentError);
  EXPECT_THROW(inverse_empirical_cdf(m, 1.0), ArgumentError);
}

TEST(Marginal, InverseOfCdfRecoversObservations) {
  Rng rng(3);
  std::vector<double> v;
  for (int i = 0; i < 200; ++i) v.push_back(std::round(rng.normal() * 5.0));  // with ties
  const auto m = fit_marginal(v);
  for (double x : v) EXPECT_EQ(m.inverse(m.cdf(x)), x);
}

TEST(Marginal, TooFewValuesRejected) {
  EXPECT_THROW(fit_marginal({1.0}), DegenerateInputError);
  EXPECT_THROW(fit_marginal(std::vector<double>{}), DegenerateInputError);
}

TEST(Marginal, MonotoneInverseAndSupport) {
  Rng rng(5);
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(rng.normal());
  v.push_back(v.front() + 1e-15);
  const auto m = fit_marginal(v);
  EXPECT_TRUE(std::is_sorted(m.sorted_values().begin(), m.sorted_values().end()));
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  double prev = -1e300;
  for (int i = 1; i < 1000; ++i) {
    const double x = m.inverse(i / 1000.0);
    EXPECT_GE(x, prev);
    EXPECT_GE(x, lo);
    EXPECT_LE(x, hi);
    EXPECT_NE(std::find(v.begin(), v.end(), x), v.end());
    prev = x;
  }
}

TEST(Marginal, CdfOfInverseSampleIsUniform) {
  Rng data_rng(7);
  std::vector<double> v;
  for (int i = 0; i < 5000; ++i) v.push_back(data_rng.normal());
  const auto m = fit_marginal(v);
  Rng rng(8);
  std::vector<double> u, ref;
  for (int i = 0; i < 2000; ++i) u.push_back(m.cdf(m.inverse(rng.uniform())));
  for (int i = 0; i < 2000; ++i) ref.push_back(rng.uniform());
  // Two-sample KS 1% critical value: 1.628 * sqrt(2/n).
  EXPECT_LT(ks_statistic(u, ref), 1.628 * std::sqrt(2.0 / 2000.0));
}

TEST(PseudoObservations, RanksOverNPlusOne) {
  const auto g = pseudo_observations(one_column({1.0, 2.0, 3.0}), {"x"}, 1);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(g(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(g(2, 0), 0.75);
}

TEST(PseudoObservations, StrictlyInsideAndDeterministic) {
  Rng rng(2);
  std::vector<double> c, d;
  for (int i = 0; i < 300; ++i) {
    c.push_back(rng.normal());
    d.push_back(static_cast<double>(rng.index(3)));
  }
  ColumnSchema cs{"c", ColumnKind::continuous, {}, {}, false, TemporalStage::baseline, 0};
  ColumnSchema ds{"d", ColumnKind::discrete, {"a", "b", "c"}, {}, false, TemporalStage::baseline, 0};
  Column cc{c, std::vector<std::uint8_t>(c.size(), 0)};
  Column dc{d, std::vector<std::uint8_t>(d.size(), 0)};
  const DataTable t({cs, ds}, {cc, dc});
  const auto g1 = pseudo_observations(t, {"c", "d"}, 99);
  const auto g2 = pseudo_observations(t, {"c", "d"}, 99);
  EXPECT_TRUE(g1 == g2);
  for (double u : g1.data) {
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(PseudoObservations, DiscreteJitterStaysInCategoryInterval) {
  std::vector<double> d;
  for (int i = 0; i < 100; ++i) d.push_back(i < 20 ? 0.0 : (i < 70 ? 1.0 : 2.0));
  std::vector<EmpiricalMarginal> ms;
  const auto g = pseudo_observations(one_column(d, ColumnKind::discrete, 3), {"x"}, 4, &ms);
  for (std::size_t r = 0; r < d.size(); ++r) {
    const double lo = d[r] == 0.0 ? 0.0 : (d[r] == 1.0 ? 0.2 : 0.7);
    const double hi = d[r] == 0.0 ? 0.2 : (d[r] == 1.0 ? 0.7 : 1.0);
    EXPECT_GT(g(r, 0), lo);
    EXPECT_LT(g(r, 0), hi);
    EXPECT_EQ(ms[0].inverse(g(r, 0)), d[r]);  // snaps back to its category
  }
}

TEST(PseudoObservations, MissingCellRejected) {
  DataTable t = one_column({1.0, 2.0, 3.0});
  Column c = t.column(0);
  c.missing[1] = 1;
  t = t.with_column(0, c);
  EXPECT_THROW(pseudo_observations(t, {"x"}, 1), ArgumentError);
}
