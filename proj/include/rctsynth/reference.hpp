#pragma once

// Simulated stand-in for a four-arm HIV trial table with known dependencies:
// 14 baseline covariates, randomized treatment, CD4 counts at weeks 20 and 96
// (37% of week-96 values missing completely at random) and a binary event.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rctsynth/config.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/special.hpp"

namespace rctsynth {

inline constexpr double reference_missing_fraction = 0.37;

inline Schema reference_schema() {
  auto cont = [](std::string name, std::optional<double> lb, bool log, TemporalStage st, int order) {
    ColumnSchema c;
    c.name = std::move(name);
    c.kind = ColumnKind::continuous;
    c.lower_bound = lb;
    c.log_transform = log;
    c.stage = st;
    c.order = order;
    return c;
  };
  auto disc = [](std::string name, std::vector<std::string> cats, TemporalStage st, int order) {
    ColumnSchema c;
    c.name = std::move(name);
    c.kind = ColumnKind::discrete;
    c.categories = std::move(cats);
    c.stage = st;
    c.order = order;
    return c;
  };
  const auto B = TemporalStage::baseline;
  const std::vector<std::string> yn{"no", "yes"};
  return {
      cont("age", 12.0, false, B, 0),
      cont("weight", 0.0, false, B, 0),
      disc("sex", {"female", "male"}, B, 0),
      disc("race", {"white", "nonwhite"}, B, 0),
      disc("hemophilia", yn, B, 0),
      disc("homosexual", yn, B, 0),
      disc("drug_use", yn, B, 0),
      cont("karnofsky", 0.0, false, B, 0),
      disc("prior_nonzdv_art", yn, B, 0),
      disc("zdv_30days", yn, B, 0),
      cont("prior_art_days", 0.0, false, B, 0),
      disc("art_history", {"naive", "experienced_1_52wk", "experienced_over_52wk"}, B, 0),
      disc("symptomatic", yn, B, 0),
      cont("cd4_baseline", 0.0, true, B, 0),
      disc("treatment", {"zdv", "zdv_ddi", "zdv_ddc", "ddi"}, TemporalStage::treatment, 0),
      cont("cd4_20", 0.0, true, TemporalStage::post_randomization, 1),
      cont("cd4_96", 0.0, true, TemporalStage::post_randomization, 2),
      disc("outcome", {"no_event", "event"}, TemporalStage::outcome, 0),
  };
}

// Five stages: baseline vine, uniform treatment, cd4_20, cd4_96, outcome
// (main effects only, strategy c with floor 0).
inline PipelineConfig reference_config() {
  PipelineConfig c;
  c.schema = reference_schema();
  std::vector<std::string> baseline;
  for (const auto& cs : c.schema) {
    if (cs.stage == TemporalStage::baseline) baseline.push_back(cs.name);
  }
  StageSpec vine;
  vine.kind = StageKind::baseline_vine;
  vine.targets = baseline;
  StageSpec treat;
  treat.kind = StageKind::treatment_multinomial;
  treat.targets = {"treatment"};
  treat.probabilities = {0.25, 0.25, 0.25, 0.25};
  std::vector<std::string> preds = baseline;
  preds.push_back("treatment");
  StageSpec cd20;
  cd20.kind = StageKind::regression_continuous;
  cd20.targets = {"cd4_20"};
  cd20.predictors = preds;
  cd20.strategy.variant = RandomnessVariant::admissible_rejection;
  cd20.strategy.bound = 0.0;
  preds.push_back("cd4_20");
  StageSpec cd96 = cd20;
  cd96.targets = {"cd4_96"};
  cd96.predictors = preds;
  preds.push_back("cd4_96");
  StageSpec out;
  out.kind = StageKind::regression_binary;
  out.targets = {"outcome"};
  out.predictors = preds;
  c.stages = {vine, treat, cd20, cd96, out};
  c.runs = 500;
  c.base_seed = 20240515;
  c.metrics.label = "outcome";
  validate_config(c);
  return c;
}

// Ground-truth generator. Every draw comes from one stream seeded by `seed`.
inline DataTable generate_reference_dataset(Seed seed, std::size_t n = 2139) {
  if (n < 50) throw ArgumentError("reference dataset needs n >= 50");
  const Schema schema = reference_schema();
  Rng rng(seed);
  std::vector<std::vector<double>> v(schema.size(), std::vector<double>(n, 0.0));
  enum {
    age, weight, sex, race, hemophilia, homosexual, drug_use, karnofsky, prior_nonzdv_art, zdv_30days,
    prior_art_days, art_history, symptomatic, cd4_baseline, treatment, cd4_20, cd4_96, outcome
  };
  const double arm_20[4] = {0.0, 45.0, 35.0, 40.0};
  const double arm_96[4] = {0.0, 30.0, 20.0, 25.0};
  const double round10 = 10.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double z1 = rng.normal(), z2 = rng.normal(), z3 = rng.normal(), z4 = rng.normal();
    const double e_age = rng.normal();
    // Age and weight share z1; CD4 and symptoms share z4.
    v[age][r] = std::max(12.0, std::round(35.0 + 8.5 * (0.6 * z1 + 0.8 * e_age)));
    v[weight][r] = std::max(35.0, std::round(round10 * (75.0 + 13.0 * (0.35 * z1 + 0.94 * z2))) / round10);
    v[sex][r] = rng.uniform() < logistic(1.6 + 0.9 * z2) ? 1.0 : 0.0;
    v[race][r] = rng.uniform() < 0.29 ? 1.0 : 0.0;
    v[hemophilia][r] = rng.uniform() < 0.08 ? 1.0 : 0.0;
    v[homosexual][r] = v[sex][r] == 1.0 && v[hemophilia][r] == 0.0 && rng.uniform() < 0.8 ? 1.0 : 0.0;
    v[drug_use][r] = rng.uniform() < logistic(-1.9 - 0.8 * v[homosexual][r] + 0.3 * z3) ? 1.0 : 0.0;
    // Two-component mixture: a low mode near 80 and a high mode near 96.
    const double k = rng.uniform() < 0.35 ? 80.0 + 3.0 * rng.normal() : 96.0 + 2.5 * rng.normal();
    v[karnofsky][r] = std::clamp(std::round(k), 70.0, 100.0);
    const bool experienced = rng.uniform() < 0.58;
    const double days = experienced ? std::round(std::exp(5.6 + 0.75 * z3)) : 0.0;
    v[prior_art_days][r] = days;
    v[art_history][r] = !experienced ? 0.0 : (days <= 364.0 ? 1.0 : 2.0);
    v[zdv_30days][r] = experienced && rng.uniform() < 0.9 ? 1.0 : 0.0;
    v[prior_nonzdv_art][r] = experienced && rng.uniform() < 0.07 ? 1.0 : 0.0;
    v[symptomatic][r] = rng.uniform() < logistic(-1.4 - 0.7 * z4 + 0.2 * experienced) ? 1.0 : 0.0;
    v[cd4_baseline][r] = std::round(std::exp(5.83 + 0.3 * z4 - 0.05 * v[symptomatic][r]));
  }
  for (std::size_t r = 0; r < n; ++r) v[treatment][r] = static_cast<double>(rng.index(4));
  for (std::size_t r = 0; r < n; ++r) {
    const auto arm = static_cast<std::size_t>(v[treatment][r]);
    const double c20 = 80.0 + 0.78 * v[cd4_baseline][r] + arm_20[arm] - 25.0 * v[symptomatic][r] -
                       0.4 * (v[age][r] - 35.0) + 65.0 * rng.normal();
    v[cd4_20][r] = std::max(1.0, std::round(c20));
    const double c96 = 30.0 + 0.8 * v[cd4_20][r] + arm_96[arm] - 20.0 * v[symptomatic][r] + 85.0 * rng.normal();
    v[cd4_96][r] = std::max(1.0, std::round(c96));
    const double eta = -1.3 - 0.012 * (v[cd4_20][r] - 370.0) + 0.9 * v[symptomatic][r] + 0.03 * (v[age][r] - 35.0) -
                       0.35 * (arm == 0 ? 0.0 : 1.0);
    v[outcome][r] = rng.uniform() < logistic(eta) ? 1.0 : 0.0;
  }
  // Exactly round(0.37 n) week-96 values missing, chosen uniformly.
  std::vector<std::size_t> perm(n);
  for (std::size_t r = 0; r < n; ++r) perm[r] = r;
  shuffle(perm, rng);
  const auto n_missing = static_cast<std::size_t>(std::llround(reference_missing_fraction * static_cast<double>(n)));
  std::vector<Column> cols(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    cols[c].values = std::move(v[c]);
    cols[c].missing.assign(n, 0);
  }
  for (std::size_t i = 0; i < n_missing; ++i) {
    cols[cd4_96].missing[perm[i]] = 1;
    cols[cd4_96].values[perm[i]] = 0.0;
  }
  return DataTable(schema, std::move(cols));
}

}  // namespace rctsynth
