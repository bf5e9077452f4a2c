#pragma once

// Sequential generation: a vine copula for the baseline block, a multinomial
// treatment draw, then one regression execution model per later column.
// simulate() repeats fit-generate-score over independently seeded runs.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rctsynth/config.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/metrics.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/regression.hpp"
#include "rctsynth/vine.hpp"

namespace rctsynth {

// A stage failure; what() starts with the stage label.
class StageError : public Error {
 public:
  StageError(std::size_t stage, const std::string& msg) : Error(msg), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

// Columns each stage read, for auditing temporal order.
struct StageAccess {
  std::vector<std::string> real_columns;
  std::vector<std::string> synthetic_columns;
};

namespace pipeline_detail {

// Synthetic columns built so far, in production order.
struct PartialTable {
  Schema schema;
  std::vector<Column> columns;

  void add(const ColumnSchema& cs, Column col) {
    schema.push_back(cs);
    columns.push_back(std::move(col));
  }

  DataTable view(const std::vector<std::string>& names) const {
    Schema s;
    std::vector<Column> c;
    for (const auto& n : names) {
      bool found = false;
      for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].name == n) {
          s.push_back(schema[i]);
          c.push_back(columns[i]);
          found = true;
        }
      }
      if (!found) throw ArgumentError("synthetic column '" + n + "' has not been generated yet");
    }
    return DataTable(std::move(s), std::move(c));
  }
};

inline Column full_column(std::vector<double> v) {
  Column c;
  c.missing.assign(v.size(), 0);
  c.values = std::move(v);
  return c;
}

// Floor on the modelling scale: log-transformed columns map b > 0 to ln b and
// drop the floor otherwise (exp is always positive).
inline RandomnessStrategy modelling_strategy(RandomnessStrategy s, const ColumnSchema& cs, bool log_scale) {
  if (log_scale && cs.log_transform && s.bound) {
    s.bound = *s.bound > 0.0 ? std::log(*s.bound) : -std::numeric_limits<double>::infinity();
  }
  return s;
}

inline std::vector<std::string> with_target(std::vector<std::string> predictors, const std::string& target) {
  predictors.push_back(target);
  return predictors;
}

}  // namespace pipeline_detail

// One synthetic table. `access`, when given, receives per-stage column reads.
inline DataTable run_pipeline(const PipelineConfig& config, const DataTable& real, Seed seed,
                              std::vector<StageAccess>* access = nullptr) {
  using namespace pipeline_detail;
  validate_config(config);
  if (real.schema() != config.schema) {
    for (std::size_t c = 0; c < std::min(real.n_cols(), config.schema.size()); ++c) {
      if (!(real.column_schema(c) == config.schema[c])) {
        throw SchemaError("real table column " + std::to_string(c) + " ('" + real.column_schema(c).name +
                          "') does not match the config schema ('" + config.schema[c].name + "')");
      }
    }
    throw SchemaError("real table has " + std::to_string(real.n_cols()) + " columns, config schema has " +
                      std::to_string(config.schema.size()));
  }
  const DataTable work = config.preprocess_log ? apply_transform(real, TransformDirection::forward) : real;
  const std::size_t n = config.n_synth.value_or(real.n_rows());
  PartialTable synth;
  std::map<std::string, std::vector<std::uint8_t>> masks;
  if (access) access->assign(config.stages.size(), {});

  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageSpec& st = config.stages[i];
    const Seed fit_seed = derive_seed(seed, 2 * i);
    const Seed gen_seed = derive_seed(seed, 2 * i + 1);
    // Each stage sees only its own columns of the real table.
    const std::vector<std::string> real_names =
        st.kind == StageKind::baseline_vine ? st.targets : with_target(st.predictors, st.target());
    if (access) {
      (*access)[i].real_columns = st.kind == StageKind::treatment_multinomial ? std::vector<std::string>{} : real_names;
      (*access)[i].synthetic_columns = st.predictors;
    }
    try {
      switch (st.kind) {
        case StageKind::baseline_vine: {
          const VineModel model = fit_vine(work.select_columns(st.targets), st.targets, fit_seed, config.families,
                                           config.pair_fit);
          const DataTable base = generate_baseline(model, n, gen_seed);
          for (std::size_t c = 0; c < base.n_cols(); ++c) synth.add(base.column_schema(c), base.column(c));
          break;
        }
        case StageKind::treatment_multinomial: {
          const ColumnSchema& cs = work.column_schema(work.column_index(st.target()));
          std::vector<double> p = st.probabilities;
          if (p.empty()) p.assign(cs.categories.size(), 1.0 / static_cast<double>(cs.categories.size()));
          const auto draws = sample_treatment(n, p, cs.categories, gen_seed);
          std::vector<double> v(draws.begin(), draws.end());
          synth.add(cs, full_column(std::move(v)));
          break;
        }
        case StageKind::regression_continuous: {
          const DataTable sub = work.select_columns(real_names);
          const ColumnSchema& cs = sub.column_schema(sub.column_index(st.target()));
          const bool weighted = config.model_missingness && sub.column(st.target()).missing_count() > 0;
          LinearModel model;
          if (weighted) {
            const LogisticModel r = fit_missingness_model(sub, st.target(), st.predictors);
            const auto rows = complete_case_rows(sub, real_names);
            const auto p = r.predict_probability(sub.select_rows(rows));
            std::vector<double> w(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) w[k] = 1.0 / p[k];
            model = fit_weighted_linear(sub, st.target(), st.predictors, w);
            if (config.emit_missingness) {
              const auto observed = generate_binary(r, synth.view(st.predictors), derive_seed(gen_seed, 1));
              auto& m = masks[st.target()];
              m.resize(n);
              for (std::size_t k = 0; k < n; ++k) m[k] = observed[k] ? 0 : 1;
            }
          } else {
            model = fit_linear(sub, st.target(), st.predictors);
          }
          const auto strategy = modelling_strategy(st.strategy, cs, config.preprocess_log);
          synth.add(cs, full_column(generate_continuous(model, synth.view(st.predictors), strategy, gen_seed)));
          break;
        }
        case StageKind::regression_binary: {
          const DataTable sub = work.select_columns(real_names);
          const ColumnSchema& cs = sub.column_schema(sub.column_index(st.target()));
          const LogisticModel model = fit_logistic(sub, st.target(), st.predictors);
          const auto draws = generate_binary(model, synth.view(st.predictors), gen_seed);
          std::vector<double> v(draws.begin(), draws.end());
          synth.add(cs, full_column(std::move(v)));
          break;
        }
      }
    } catch (const Error& e) {
      throw StageError(i, st.label(i) + ": " + e.what());
    }
  }

  std::vector<std::string> order;
  for (const auto& cs : config.schema) order.push_back(cs.name);
  DataTable out = synth.view(order);
  if (config.preprocess_log) out = apply_transform(out, TransformDirection::inverse);
  if (!masks.empty()) {
    std::vector<Column> cols = out.columns();
    for (const auto& [name, m] : masks) {
      auto& col = cols[out.column_index(name)];
      for (std::size_t r = 0; r < n; ++r) {
        if (m[r]) {
          col.missing[r] = 1;
          col.values[r] = 0.0;
        }
      }
    }
    out = DataTable(out.schema(), std::move(cols));
  }
  return out;
}

// Comparator generator: every real column permuted independently, keeping
// each marginal exactly and breaking all dependence.
inline DataTable independence_baseline(const DataTable& real, Seed seed) {
  std::vector<Column> cols = real.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<std::size_t> perm(real.n_rows());
    for (std::size_t r = 0; r < perm.size(); ++r) perm[r] = r;
    Rng rng(derive_seed(seed, c));
    shuffle(perm, rng);
    Column shuffled;
    shuffled.values.resize(perm.size());
    shuffled.missing.resize(perm.size());
    for (std::size_t r = 0; r < perm.size(); ++r) {
      shuffled.values[r] = cols[c].values[perm[r]];
      shuffled.missing[r] = cols[c].missing[perm[r]];
    }
    cols[c] = std::move(shuffled);
  }
  return DataTable(real.schema(), std::move(cols));
}

// ---------------------------------------------------------------------------
// Simulation

struct RunFailure {
  std::size_t run_id = 0;
  std::string message;
};

struct SimulationOptions {
  std::optional<std::size_t> plot_run;  // keep this run's synthetic table
  double max_failure_fraction = 0.10;
};

struct SimulationResult {
  std::vector<MetricsReport> reports;  // successful runs, ascending run_id
  std::vector<RunFailure> failures;
  RunSummary summary;
  std::optional<DataTable> plot_table;
  std::size_t plot_run = 0;
  double total_seconds = 0.0;
};

inline Seed run_seed(Seed base, std::size_t run) { return derive_seed(base, run); }

// One run: fit, generate and score with seed derived from (base_seed, run).
inline std::pair<MetricsReport, DataTable> simulate_run(const PipelineConfig& config, const DataTable& real,
                                                        std::size_t run) {
  const auto t0 = std::chrono::steady_clock::now();
  const Seed seed = run_seed(config.base_seed, run);
  DataTable synth = run_pipeline(config, real, seed);
  MetricsReport rep = score_tables(real, synth, config.metrics, derive_seed(seed, 0x5C0BEULL));
  rep.run_id = run;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(rep), std::move(synth)};
}

inline SimulationResult simulate(const PipelineConfig& config, const DataTable& real, const SimulationOptions& opt = {}) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t runs = config.runs;
  const auto max_failures = static_cast<std::size_t>(std::floor(opt.max_failure_fraction * static_cast<double>(runs)));
  std::vector<std::optional<MetricsReport>> slots(runs);
  std::vector<std::optional<std::string>> errors(runs);
  std::optional<DataTable> plot_table;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::mutex plot_mutex;

  auto worker = [&] {
    for (;;) {
      if (failed.load() > max_failures) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= runs) return;
      try {
        auto [rep, synth] = simulate_run(config, real, i);
        if (opt.plot_run && *opt.plot_run == i) {
          std::lock_guard<std::mutex> lock(plot_mutex);
          plot_table = std::move(synth);
        }
        slots[i] = std::move(rep);
      } catch (const Error& e) {
        errors[i] = e.what();
        failed.fetch_add(1);
      }
    }
  };
  const std::size_t n_workers = std::min(config.workers, runs);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimulationResult out;
  for (std::size_t i = 0; i < runs; ++i) {
    if (slots[i]) out.reports.push_back(std::move(*slots[i]));
    else if (errors[i]) out.failures.push_back({i, *errors[i]});
  }
  if (out.failures.size() > max_failures) {
    const auto& f = out.failures.front();
    throw NumericError("simulation aborted: " + std::to_string(out.failures.size()) + " failed runs exceed " +
                       std::to_string(max_failures) + " allowed of " + std::to_string(runs) + "; first failure (run " +
                       std::to_string(f.run_id) + "): " + f.message);
  }
  out.summary = aggregate_runs(out.reports);
  out.plot_table = std::move(plot_table);
  out.plot_run = opt.plot_run.value_or(0);
  out.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace rctsynth
