// rctsynth command line: generate, evaluate, simulate, reference, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rctsynth/rctsynth.hpp"

using namespace rctsynth;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> strategy;
  bool log_preprocess = false;
  std::optional<Seed> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> workers;
};

// Command-line flags take precedence over the config file.
PipelineConfig load_config(const std::string& path, const Overrides& o) {
  PipelineConfig c = parse_config(path);
  if (o.strategy) {
    const RandomnessVariant v = randomness_variant_from_string(*o.strategy);
    for (auto& s : c.stages) {
      if (s.kind != StageKind::regression_continuous) continue;
      s.strategy.variant = v;
      if (v == RandomnessVariant::admissible_rejection && !s.strategy.bound) {
        for (const auto& cs : c.schema) {
          if (cs.name == s.target()) s.strategy.bound = cs.lower_bound;
        }
      }
    }
  }
  if (o.log_preprocess) c.preprocess_log = true;
  if (o.seed) c.base_seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.workers) c.workers = *o.workers;
  validate_config(c);
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

void add_strategy_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--strategy", o.strategy, "Randomness strategy for continuous regressions")
      ->check(CLI::IsMember({"a", "b", "c"}));
  cmd->add_flag("--log-preprocess", o.log_preprocess, "Fit log-flagged columns on the log scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential synthetic data generation for randomized trials"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path, real_path, synth_path, out_path, runs_path;
  Seed seed_value = 0;
  std::size_t n_rows = 2139;
  std::optional<std::size_t> plot_run;

  auto* gen = app.add_subcommand("generate", "Fit the pipeline to a real table and write one synthetic table");
  gen->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--real", real_path, "Real data CSV")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Synthetic CSV to write")->required();
  gen->add_option("--seed", ov.seed, "Seed (default: config base_seed)");
  add_strategy_flags(gen, ov);

  auto* eval = app.add_subcommand("evaluate", "Score a synthetic table against a real one");
  eval->add_option("--real", real_path, "Real data CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--synth", synth_path, "Synthetic data CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config_path, "Config providing the schema and metric settings")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", out_path, "Report JSON to write")->required();
  eval->add_option("--seed", ov.seed, "Seed for the efficacy split (default: config base_seed)");

  auto* sim = app.add_subcommand("simulate", "Repeat fit, generate and score; write summary and per-run metrics");
  sim->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--real", real_path, "Real data CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "Output directory")->required();
  sim->add_option("--runs", ov.runs, "Number of runs")->check(CLI::PositiveNumber);
  sim->add_option("--workers", ov.workers, "Concurrent runs")->check(CLI::PositiveNumber);
  sim->add_option("--seed", ov.seed, "Base seed");
  sim->add_option("--plot-run", plot_run, "Run whose synthetic table feeds the plot data (default 0)");
  add_strategy_flags(sim, ov);

  auto* ref = app.add_subcommand("reference", "Write the simulated reference trial table");
  ref->add_option("--out", out_path, "CSV to write")->required();
  ref->add_option("--seed", seed_value, "Seed")->default_val(20240515);
  ref->add_option("--n", n_rows, "Rows")->default_val(2139);

  auto* rep = app.add_subcommand("report", "Summarize a stored runs.csv and optionally re-render plot data");
  rep->add_option("--runs", runs_path, "runs.csv from simulate")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", out_path, "Output directory")->required();
  rep->add_option("--real", real_path, "Real data CSV for plot data")->check(CLI::ExistingFile);
  rep->add_option("--synth", synth_path, "Synthetic data CSV for plot data")->check(CLI::ExistingFile);
  rep->add_option("--config", config_path, "Config providing the schema")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const PipelineConfig c = load_config(config_path, ov);
      const DataTable real = load_csv(real_path, c.schema);
      save_csv(out_path, run_pipeline(c, real, c.base_seed));
      std::cerr << "wrote " << out_path << '\n';
    } else if (eval->parsed()) {
      const PipelineConfig c = load_config(config_path, ov);
      const DataTable real = load_csv(real_path, c.schema);
      const DataTable synth = load_csv(synth_path, c.schema, false);
      const MetricsReport r = score_tables(real, synth, c.metrics, c.base_seed);
      write_text(out_path, to_json(r).dump(2) + "\n");
      std::cerr << "wrote " << out_path << '\n';
    } else if (sim->parsed()) {
      const PipelineConfig c = load_config(config_path, ov);
      const DataTable real = load_csv(real_path, c.schema);
      SimulationOptions opt;
      opt.plot_run = plot_run.value_or(0);
      if (*opt.plot_run >= c.runs) throw ArgumentError("--plot-run must be below the number of runs");
      const SimulationResult res = simulate(c, real, opt);
      emit_report(res, real, out_path);
      std::cerr << res.reports.size() << " runs (" << res.failures.size() << " failed) in " << res.total_seconds
                << " s; wrote " << out_path << '\n';
    } else if (ref->parsed()) {
      save_csv(out_path, generate_reference_dataset(seed_value, n_rows));
      std::cerr << "wrote " << out_path << '\n';
    } else if (rep->parsed()) {
      const auto reports = reports_from_runs_csv(runs_path);
      if (reports.empty()) throw ParseError(runs_path + ": no runs");
      fs::create_directories(out_path);
      write_text(fs::path(out_path) / "summary.json", to_json(aggregate_runs(reports)).dump(2) + "\n");
      std::ostringstream csv;
      write_summary_csv(csv, aggregate_runs(reports));
      write_text(fs::path(out_path) / "summary.csv", csv.str());
      const bool plots = !real_path.empty() || !synth_path.empty();
      if (plots) {
        if (real_path.empty() || synth_path.empty() || config_path.empty()) {
          throw ArgumentError("plot data needs --real, --synth and --config together");
        }
        const PipelineConfig c = parse_config(config_path);
        write_plot_data(load_csv(real_path, c.schema), load_csv(synth_path, c.schema, false),
                        fs::path(out_path) / "plot");
      }
      std::cerr << "summarized " << reports.size() << " runs into " << out_path << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
