// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance --cli <path to rctsynth_cli> --work <scratch dir> [--only N]
//
// The lines are also written to <scratch dir>/results.txt.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "CLI11.hpp"
#include "rctsynth/rctsynth.hpp"

using namespace rctsynth;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

const DataTable& reference_table() {
  static const DataTable t = generate_reference_dataset(20240515);
  return t;
}

// ---------------------------------------------------------------------------
// 1. Copula engine oracle

Outcome copula_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  UniformGrid g(2000, 2);
  for (std::size_t r = 0; r < g.rows; ++r) {
    const double z1 = rng.normal(), z2 = rng.normal();
    g(r, 0) = normal_cdf(z1);
    g(r, 1) = normal_cdf(0.7 * z1 + std::sqrt(1.0 - 0.49) * z2);
  }
  const VineModel m = fit_vine(g);
  const BivariateCopula& c = m.pair_copulas[0][0];
  const UniformGrid s = sample_vine(m, 2000, 202);
  const double tau = kendall_tau(s.column(0), s.column(1)).value;
  const double target = 2.0 * std::asin(0.7) / std::numbers::pi;
  const double secs = seconds_since(t0);
  const bool gaussian = c.family() == CopulaFamily::gaussian;
  const double rho = c.parameter();
  Outcome o;
  o.pass = gaussian && rho >= 0.65 && rho <= 0.75 && std::fabs(tau - target) <= 0.03 && secs < 5.0;
  o.detail = "family " + c.name() + ", rho " + fmt(rho) + " in [0.65,0.75], resampled tau " + fmt(tau) + " vs " +
             fmt(target) + " +-0.03, " + fmt(secs, 3) + " s < 5 s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. h-inverse round trip

Outcome h_round_trip() {
  struct Case {
    CopulaFamily family;
    int rotation;
    double parameter;
  };
  std::vector<Case> cases;
  for (double r : {-0.9, -0.5, 0.1, 0.5, 0.9}) cases.push_back({CopulaFamily::gaussian, 0, r});
  for (double t : {-15.0, -3.0, 0.5, 5.0, 20.0}) cases.push_back({CopulaFamily::frank, 0, t});
  for (int rot : {0, 90, 180, 270}) {
    for (double t : {0.2, 1.0, 2.5, 6.0, 12.0}) cases.push_back({CopulaFamily::clayton, rot, t});
    for (double t : {1.1, 1.5, 2.5, 4.0, 8.0}) cases.push_back({CopulaFamily::gumbel, rot, t});
  }
  cases.push_back({CopulaFamily::independence, 0, 0.0});
  double worst_u = 0.0, worst_p = 0.0;
  std::string where;
  std::size_t points = 0;
  for (const auto& cs : cases) {
    const BivariateCopula c = cs.family == CopulaFamily::independence
                                  ? BivariateCopula::independence()
                                  : BivariateCopula(cs.family, cs.parameter, cs.rotation);
    for (int i = 1; i <= 20; ++i) {
      for (int j = 1; j <= 20; ++j) {
        const double p = (i - 0.5) / 20.0, v = (j - 0.5) / 20.0;
        const double u = h_inverse(c, p, v);
        const double back = h_inverse(c, h_function(c, u, v), v);
        const double eu = std::fabs(back - u);
        const double ep = std::fabs(h_function(c, u, v) - p);
        if (eu > worst_u) {
          worst_u = eu;
          where = c.name() + " par " + fmt(cs.parameter) + " p " + fmt(p) + " v " + fmt(v);
        }
        worst_p = std::max(worst_p, ep);
        ++points;
      }
    }
  }
  Outcome o;
  o.pass = worst_u < 1e-8 && worst_p < 1e-8;
  o.detail = std::to_string(cases.size()) + " copulas x 400 (p,v) points (" + std::to_string(points) +
             "): max |hinv(h(u|v)|v) - u| " + fmt(worst_u, 3) + ", max |h(hinv(p|v)|v) - p| " + fmt(worst_p, 3) +
             " < 1e-8" + (worst_u > 0 ? " (worst at " + where + ")" : "");
  return o;
}

// ---------------------------------------------------------------------------
// 3 and 4 share one 50-run simulation on the reference table.

struct FidelityRuns {
  SimulationResult result;
  double seconds = 0.0;
};

const FidelityRuns& fidelity_runs() {
  static const FidelityRuns runs = [] {
    PipelineConfig c = reference_config();
    c.runs = 50;
    c.workers = worker_count();
    const auto t0 = Clock::now();
    FidelityRuns f;
    f.result = simulate(c, reference_table());
    f.seconds = seconds_since(t0);
    return f;
  }();
  return runs;
}

std::optional<double> value_of(const MetricsReport& r, const std::string& metric, const std::string& target) {
  for (const auto& v : r.flatten()) {
    if (v.metric == metric && v.target == target) return v.value;
  }
  return std::nullopt;
}

Outcome marginal_fidelity() {
  const DataTable& real = reference_table();
  const MetricsReport self = score_tables(real, real, {});
  bool self_ok = true;
  for (const auto& v : self.univariate) self_ok = self_ok && v.value && *v.value == 1.0;

  const auto& f = fidelity_runs();
  std::vector<std::string> cont_baseline, discrete;
  for (const auto& cs : real.schema()) {
    if (cs.is_discrete()) discrete.push_back(cs.name);
    else if (cs.stage == TemporalStage::baseline) cont_baseline.push_back(cs.name);
  }
  auto grand_mean = [&](const std::string& metric, const std::vector<std::string>& cols) {
    double s = 0.0;
    std::size_t k = 0;
    for (const auto& rep : f.result.reports) {
      for (const auto& c : cols) {
        const auto v = value_of(rep, metric, c);
        if (v) {
          s += *v;
          ++k;
        }
      }
    }
    return k ? s / static_cast<double>(k) : 0.0;
  };
  const double ks = grand_mean("ks_complement", cont_baseline);
  const double tvd = grand_mean("tvd_complement", discrete);
  Outcome o;
  o.pass = self_ok && f.result.reports.size() == 50 && ks >= 0.97 && tvd >= 0.97 && f.seconds < 600.0;
  o.detail = std::string("copy-of-real self-test ") + (self_ok ? "1.0 exactly" : "NOT 1.0") + "; " +
             std::to_string(f.result.reports.size()) + " runs, mean ks_complement (continuous baseline) " + fmt(ks) +
             " >= 0.97, mean tvd_complement (discrete) " + fmt(tvd) + " >= 0.97, " + fmt(f.seconds, 4) +
             " s < 600 s";
  return o;
}

Outcome dependence_fidelity() {
  const DataTable& real = reference_table();
  const auto& f = fidelity_runs();
  const std::string pair = "cd4_baseline:cd4_20";
  const PipelineConfig cfg = reference_config();
  MetricConfig bivariate_only;
  bivariate_only.univariate = false;
  double sum = 0.0;
  std::size_t lower = 0, n = 0;
  for (const auto& rep : f.result.reports) {
    const auto s = value_of(rep, "correlation_similarity", pair);
    if (!s) continue;
    const Seed seed = run_seed(cfg.base_seed, rep.run_id);
    const DataTable ind = independence_baseline(real, derive_seed(seed, 0x1DEULL));
    const auto b = value_of(score_tables(real, ind, bivariate_only), "correlation_similarity", pair);
    sum += *s;
    ++n;
    if (b && *b < *s) ++lower;
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  const double share = f.result.reports.empty() ? 0.0 : static_cast<double>(lower) / f.result.reports.size();
  Outcome o;
  o.pass = n == 50 && mean >= 0.95 && share >= 0.95;
  o.detail = "mean correlation_similarity(" + pair + ") " + fmt(mean) + " >= 0.95 over " + std::to_string(n) +
             " runs; independence baseline strictly lower in " + std::to_string(lower) + "/" +
             std::to_string(f.result.reports.size()) + " runs (need >= 95%)";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Treatment randomization

Outcome treatment_randomization() {
  const PipelineConfig cfg = reference_config();
  const DataTable& real = reference_table();
  const auto& arms = cfg.schema[real.column_index("treatment")].categories;
  const std::size_t n = real.n_rows();
  const double band = 3.0 * std::sqrt(0.25 * 0.75 / static_cast<double>(n));
  // The treatment stage (index 1) draws with derive_seed(run seed, 3).
  auto draws_for = [&](std::size_t run) {
    return sample_treatment(n, cfg.stages[1].probabilities, arms, derive_seed(run_seed(cfg.base_seed, run), 3));
  };
  const DataTable full = run_pipeline(cfg, real, run_seed(cfg.base_seed, 0));
  const auto d0 = draws_for(0);
  bool matches_pipeline = true;
  for (std::size_t r = 0; r < n; ++r) {
    matches_pipeline = matches_pipeline && full.column("treatment").values[r] == static_cast<double>(d0[r]);
  }
  std::size_t inside = 0;
  for (std::size_t run = 0; run < 100; ++run) {
    const auto d = draws_for(run);
    std::vector<double> count(4, 0.0);
    for (auto k : d) count[k] += 1.0;
    bool ok = true;
    for (double c : count) ok = ok && std::fabs(c / static_cast<double>(n) - 0.25) <= band;
    inside += ok;
  }
  Outcome o;
  o.pass = matches_pipeline && inside >= 99;
  o.detail = "all four arms within 0.25 +- " + fmt(band, 3) + " (3 sigma, n=" + std::to_string(n) + ") in " +
             std::to_string(inside) + "/100 runs (need >= 99); stage draws " +
             (matches_pipeline ? "match" : "DO NOT match") + " the pipeline's treatment column";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Admissibility

Outcome admissibility() {
  PipelineConfig cfg = reference_config();
  cfg.n_synth = 50000;
  const DataTable s = run_pipeline(cfg, reference_table(), 606);
  std::size_t generated = 0, below = 0;
  for (const char* name : {"cd4_20", "cd4_96"}) {
    const auto& cs = cfg.schema[s.column_index(name)];
    const double floor = *cs.lower_bound;
    for (double v : s.column(name).values) {
      ++generated;
      below += v < floor;
    }
  }

  // Predictions close to the floor with a wide residual pool.
  ColumnSchema x_schema, y_schema;
  x_schema.name = "x";
  y_schema.name = "y";
  y_schema.lower_bound = 0.0;
  Rng rng(607);
  const std::size_t n = 2000;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform() * 100.0;
    y[i] = std::max(0.0, 10.0 + 0.5 * x[i] + 60.0 * rng.normal());
  }
  const DataTable train({x_schema, y_schema}, {Column(x), Column(y)});
  const LinearModel m = fit_linear(train, "y", {"x"});
  const DataTable rows = train.select_columns({"x"});
  auto count_below = [&](RandomnessVariant v) {
    const auto out = generate_continuous(m, rows, {v, 0.0, 10000}, 608);
    return static_cast<std::size_t>(std::count_if(out.begin(), out.end(), [](double z) { return z < 0.0; }));
  };
  const std::size_t a = count_below(RandomnessVariant::normal_noise);
  const std::size_t b = count_below(RandomnessVariant::residual_draw);
  const std::size_t c = count_below(RandomnessVariant::admissible_rejection);
  Outcome o;
  o.pass = generated >= 100000 && below == 0 && a >= 1 && b >= 1 && c == 0;
  o.detail = "strategy c: " + std::to_string(below) + " of " + std::to_string(generated) +
             " synthetic CD4 values below floor 0; near-floor construction: a " + std::to_string(a) + ", b " +
             std::to_string(b) + ", c " + std::to_string(c) + " sub-floor values of " + std::to_string(n);
  return o;
}

// ---------------------------------------------------------------------------
// 7. ML efficacy sanity

Outcome efficacy_sanity() {
  const DataTable& real = reference_table();
  const std::string label = "outcome";
  const std::size_t runs = 20;
  std::map<std::string, std::array<double, 3>> copy_diff;
  std::map<std::string, std::vector<double>> shuffled_f1;
  for (std::size_t i = 0; i < runs; ++i) {
    const Seed seed = derive_seed(707, i);
    for (const auto& rec : ml_efficacy(real, real, label, seed)) {
      auto& d = copy_diff[to_string(rec.classifier)];
      d[0] += std::fabs(rec.diff_precision()) / runs;
      d[1] += std::fabs(rec.diff_recall()) / runs;
      d[2] += std::fabs(rec.diff_f1()) / runs;
    }
    // Shuffle the label column only.
    std::vector<Column> cols = real.columns();
    auto& lab = cols[real.column_index(label)];
    std::vector<std::size_t> perm(real.n_rows());
    for (std::size_t r = 0; r < perm.size(); ++r) perm[r] = r;
    Rng rng(derive_seed(seed, 1));
    shuffle(perm, rng);
    Column shuffled = lab;
    for (std::size_t r = 0; r < perm.size(); ++r) {
      shuffled.values[r] = lab.values[perm[r]];
      shuffled.missing[r] = lab.missing[perm[r]];
    }
    lab = shuffled;
    const DataTable noisy(real.schema(), std::move(cols));
    for (const auto& rec : ml_efficacy(real, noisy, label, seed)) shuffled_f1[to_string(rec.classifier)].push_back(rec.diff_f1());
  }
  const boost::math::students_t dist(static_cast<double>(runs - 1));
  const double crit = boost::math::quantile(dist, 0.99);
  bool pass = true;
  std::string detail;
  for (const auto& [name, d] : copy_diff) {
    const bool ok = d[0] < 0.05 && d[1] < 0.05 && d[2] < 0.05;
    pass = pass && ok;
    detail += name + " copy |dP| " + fmt(d[0], 3) + " |dR| " + fmt(d[1], 3) + " |dF1| " + fmt(d[2], 3) + "; ";
  }
  for (const auto& [name, v] : shuffled_f1) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    const double t = se > 0.0 ? m / se : (m > 0.0 ? INFINITY : 0.0);
    const bool ok = t > crit;
    pass = pass && ok;
    detail += name + " shuffled mean dF1 " + fmt(m, 3) + ", t " + fmt(t, 3) + " > " + fmt(crit, 4) + "; ";
  }
  Outcome o;
  o.pass = pass && copy_diff.size() == 2;
  o.detail = detail + "20 seeds, one-sided alpha 0.01";
  return o;
}

// ---------------------------------------------------------------------------
// 8. Metric oracles (brute force, written independently of the library)

double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  double best = 0.0;
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  for (double t : pts) {
    double fa = 0.0, fb = 0.0;
    for (double x : a) fa += x <= t ? 1.0 : 0.0;
    for (double x : b) fb += x <= t ? 1.0 : 0.0;
    best = std::max(best, std::fabs(fa / a.size() - fb / b.size()));
  }
  return 1.0 - best;
}

double brute_tvd(const std::vector<int>& a, const std::vector<int>& b, int strata) {
  double l1 = 0.0;
  for (int k = 0; k < strata; ++k) {
    const double pa = static_cast<double>(std::count(a.begin(), a.end(), k)) / a.size();
    const double pb = static_cast<double>(std::count(b.begin(), b.end(), k)) / b.size();
    l1 += std::fabs(pa - pb);
  }
  return 1.0 - 0.5 * l1;
}

double brute_contingency(const std::vector<int>& a1, const std::vector<int>& b1, const std::vector<int>& a2,
                         const std::vector<int>& b2, int sa, int sb) {
  double l1 = 0.0;
  for (int i = 0; i < sa; ++i) {
    for (int j = 0; j < sb; ++j) {
      double c1 = 0.0, c2 = 0.0;
      for (std::size_t r = 0; r < a1.size(); ++r) c1 += (a1[r] == i && b1[r] == j) ? 1.0 : 0.0;
      for (std::size_t r = 0; r < a2.size(); ++r) c2 += (a2[r] == i && b2[r] == j) ? 1.0 : 0.0;
      l1 += std::fabs(c1 / a1.size() - c2 / a2.size());
    }
  }
  return 1.0 - 0.5 * l1;
}

Outcome metric_oracles() {
  Rng rng(808);
  double worst_ks = 0.0, worst_tvd = 0.0, worst_ct = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n1 = 1 + rng.index(20), n2 = 1 + rng.index(20);
    const int sa = 1 + static_cast<int>(rng.index(4)), sb = 1 + static_cast<int>(rng.index(4));
    // Coarse grid so ties are common.
    auto cont = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& x : v) x = static_cast<double>(rng.index(8)) * 0.25 - 1.0;
      return v;
    };
    auto disc = [&](std::size_t n, int s) {
      std::vector<int> v(n);
      for (auto& x : v) x = static_cast<int>(rng.index(static_cast<std::size_t>(s)));
      return v;
    };
    const auto x1 = cont(n1), x2 = cont(n2);
    worst_ks = std::max(worst_ks, std::fabs(ks_complement(x1, x2) - brute_ks(x1, x2)));
    const auto a1 = disc(n1, sa), a2 = disc(n2, sa), b1 = disc(n1, sb), b2 = disc(n2, sb);
    worst_tvd = std::max(worst_tvd, std::fabs(tvd_complement(a1, a2) - brute_tvd(a1, a2, sa)));
    worst_ct = std::max(worst_ct,
                        std::fabs(contingency_similarity(a1, b1, a2, b2) - brute_contingency(a1, b1, a2, b2, sa, sb)));
  }
  Outcome o;
  o.pass = worst_ks <= 1e-12 && worst_tvd <= 1e-12 && worst_ct <= 1e-12;
  o.detail = "1000 instances (n <= 20, <= 4 strata): max error ks " + fmt(worst_ks, 3) + ", tvd " + fmt(worst_tvd, 3) +
             ", contingency " + fmt(worst_ct, 3) + " <= 1e-12";
  return o;
}

// ---------------------------------------------------------------------------
// 9 and 10 go through the command-line tool.

struct Cli {
  std::string exe;
  fs::path work;

  int run(const std::string& args, const fs::path& log) const {
    const std::string cmd = "\"" + exe + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
  }

  fs::path reference_csv() const {
    const fs::path p = work / "reference.csv";
    if (!fs::exists(p)) run("reference --out \"" + p.string() + "\" --seed 20240515 --n 2139", work / "reference.log");
    return p;
  }

  fs::path config() const { return fs::path(RCTSYNTH_SOURCE_DIR) / "configs" / "actg_reference.json"; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(const Cli& cli) {
  const fs::path real = cli.reference_csv();
  std::vector<std::string> contents;
  for (const char* name : {"det_a", "det_b"}) {
    const fs::path out = cli.work / name;
    fs::remove_all(out);
    const int rc = cli.run("simulate --config \"" + cli.config().string() + "\" --real \"" + real.string() +
                               "\" --out \"" + out.string() + "\" --runs 4 --seed 99",
                           cli.work / (std::string(name) + ".log"));
    if (rc != 0) return {false, std::string("simulate exited with ") + std::to_string(rc) + ", see " + name + ".log"};
    contents.push_back(slurp(out / "runs.csv"));
  }
  Outcome o;
  o.pass = !contents[0].empty() && contents[0] == contents[1];
  o.detail = "two simulate invocations (4 runs, seed 99): runs.csv " + std::to_string(contents[0].size()) + " and " +
             std::to_string(contents[1].size()) + " bytes, " + (o.pass ? "byte-identical" : "DIFFERENT");
  return o;
}

Outcome end_to_end_timing(const Cli& cli) {
  const fs::path real = cli.reference_csv();
  const fs::path out = cli.work / "full_500";
  fs::remove_all(out);
  const auto t0 = Clock::now();
  const int rc = cli.run("simulate --config \"" + cli.config().string() + "\" --real \"" + real.string() +
                             "\" --out \"" + out.string() + "\" --runs 500 --workers " +
                             std::to_string(worker_count()),
                         cli.work / "full_500.log");
  const double secs = seconds_since(t0);
  std::size_t failures = 0, runs = 0;
  if (rc == 0) {
    std::ifstream in(out / "summary.json");
    const auto j = nlohmann::json::parse(in);
    failures = j["failures"].size();
    runs = j["runs"].get<std::size_t>();
  }
  Outcome o;
  o.pass = rc == 0 && runs == 500 && secs < 7200.0;
  o.detail = "simulate 500 runs on n=2139 with " + std::to_string(worker_count()) + " worker(s): exit " +
             std::to_string(rc) + ", " + std::to_string(runs) + " runs aggregated (" + std::to_string(failures) +
             " failed), " + fmt(secs, 5) + " s < 7200 s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Cli cli;
  std::vector<int> only;
  app.add_option("--cli", cli.exe, "rctsynth_cli executable")->required()->check(CLI::ExistingFile);
  app.add_option("--work", cli.work, "Scratch directory")->required();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(cli.work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"copula engine oracle", copula_oracle},
      {"h-inverse round trip", h_round_trip},
      {"marginal fidelity", marginal_fidelity},
      {"dependence fidelity", dependence_fidelity},
      {"treatment randomization", treatment_randomization},
      {"admissibility", admissibility},
      {"ML efficacy sanity", efficacy_sanity},
      {"metric oracles", metric_oracles},
      {"CLI determinism", [&] { return cli_determinism(cli); }},
      {"end-to-end timing", [&] { return end_to_end_timing(cli); }},
  };
  std::ofstream results(cli.work / "results.txt");
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail;
    std::cout << line.str() << std::endl;
    results << line.str() << std::endl;
  }
  return failed ? 1 : 0;
}
