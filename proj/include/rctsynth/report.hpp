#pragma once

// Output files for a simulation: summary.json, runs.csv, timing.csv and
// per-column real-vs-synthetic plot data (ECDF and histogram coordinates).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/metrics.hpp"
#include "rctsynth/pipeline.hpp"

namespace rctsynth {

namespace report_detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline double ecdf_sorted(const std::vector<double>& sorted, double x) {
  const auto k = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
  return static_cast<double>(k) / static_cast<double>(sorted.size());
}

}  // namespace report_detail

inline constexpr std::size_t histogram_bins = 20;

// ECDF of both samples at every distinct pooled value: x,real,synthetic.
inline void write_ecdf_csv(std::ostream& out, std::vector<double> real, std::vector<double> synth) {
  std::sort(real.begin(), real.end());
  std::sort(synth.begin(), synth.end());
  std::vector<double> xs = real;
  xs.insert(xs.end(), synth.begin(), synth.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  out << "x,real,synthetic\n";
  for (double x : xs) {
    out << detail::format_double(x) << ',' << detail::format_double(report_detail::ecdf_sorted(real, x)) << ','
        << detail::format_double(report_detail::ecdf_sorted(synth, x)) << '\n';
  }
}

// Equal-width bins over the pooled range; columns hold bin proportions.
inline void write_histogram_csv(std::ostream& out, const std::vector<double>& real, const std::vector<double>& synth,
                                std::size_t bins = histogram_bins) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&real, &synth}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (hi == lo) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  auto counts = [&](const std::vector<double>& v) {
    std::vector<double> c(bins, 0.0);
    for (double x : v) {
      auto b = static_cast<std::size_t>((x - lo) / width);
      c[std::min(b, bins - 1)] += 1.0;
    }
    for (auto& x : c) x /= static_cast<double>(v.size());
    return c;
  };
  const auto cr = counts(real), cs = counts(synth);
  out << "bin_lower,bin_upper,real,synthetic\n";
  for (std::size_t b = 0; b < bins; ++b) {
    out << detail::format_double(lo + width * static_cast<double>(b)) << ','
        << detail::format_double(b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1)) << ','
        << detail::format_double(cr[b]) << ',' << detail::format_double(cs[b]) << '\n';
  }
}

// Category proportions: category,real,synthetic.
inline void write_frequency_csv(std::ostream& out, const ColumnSchema& cs, const std::vector<double>& real,
                                const std::vector<double>& synth) {
  auto props = [&](const std::vector<double>& v) {
    std::vector<double> p(cs.categories.size(), 0.0);
    for (double x : v) p[static_cast<std::size_t>(x)] += 1.0;
    for (auto& x : p) x /= static_cast<double>(v.size());
    return p;
  };
  const auto pr = props(real), ps = props(synth);
  out << "category,real,synthetic\n";
  for (std::size_t k = 0; k < cs.categories.size(); ++k) {
    out << detail::quote_if_needed(cs.categories[k]) << ',' << detail::format_double(pr[k]) << ','
        << detail::format_double(ps[k]) << '\n';
  }
}

// Plot data for every column of one real/synthetic pair; returns file paths.
inline std::vector<std::filesystem::path> write_plot_data(const DataTable& real, const DataTable& synth,
                                                          const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t c = 0; c < real.n_cols(); ++c) {
    const auto& cs = real.column_schema(c);
    const auto r = real.column(c).observed();
    const auto s = synth.column(c).observed();
    if (r.empty() || s.empty()) continue;
    auto emit = [&](const std::string& suffix, auto&& body) {
      const auto p = dir / (cs.name + suffix);
      auto out = report_detail::open_out(p);
      body(out);
      report_detail::finish(out, p);
      written.push_back(p);
    };
    if (cs.is_discrete()) {
      emit("_freq.csv", [&](std::ostream& o) { write_frequency_csv(o, cs, r, s); });
    } else {
      emit("_ecdf.csv", [&](std::ostream& o) { write_ecdf_csv(o, r, s); });
      emit("_hist.csv", [&](std::ostream& o) { write_histogram_csv(o, r, s); });
    }
  }
  return written;
}

inline nlohmann::json summary_json(const SimulationResult& res) {
  nlohmann::json j = to_json(res.summary);
  j["failures"] = nlohmann::json::array();
  for (const auto& f : res.failures) j["failures"].push_back({{"run_id", f.run_id}, {"message", f.message}});
  j["total_seconds"] = res.total_seconds;
  j["plot_run"] = res.plot_table ? nlohmann::json(res.plot_run) : nlohmann::json(nullptr);
  return j;
}

// Writes summary.json, runs.csv, timing.csv and plot/ into out_dir.
inline void emit_report(const SimulationResult& res, const DataTable& real, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());

  const auto summary_path = out_dir / "summary.json";
  auto summary = report_detail::open_out(summary_path);
  summary << summary_json(res).dump(2) << '\n';
  report_detail::finish(summary, summary_path);

  const auto runs_path = out_dir / "runs.csv";
  auto runs = report_detail::open_out(runs_path);
  write_runs_csv(runs, res.reports);
  report_detail::finish(runs, runs_path);

  const auto timing_path = out_dir / "timing.csv";
  auto timing = report_detail::open_out(timing_path);
  timing << "run_id,seconds\n";
  for (const auto& r : res.reports) timing << r.run_id << ',' << detail::format_double(r.seconds) << '\n';
  report_detail::finish(timing, timing_path);

  if (res.plot_table) write_plot_data(real, *res.plot_table, out_dir / "plot");
}

// Rebuilds per-run reports (values only) from a stored runs.csv.
inline std::vector<MetricsReport> reports_from_runs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<MetricsReport> out;
  for (auto& [id, values] : read_runs_csv(in)) {
    MetricsReport r;
    r.run_id = id;
    r.univariate = std::move(values);  // flatten() returns these in stored order
    out.push_back(std::move(r));
  }
  return out;
}

// Box-plot statistics, one row per metric key.
inline void write_summary_csv(std::ostream& out, const RunSummary& s) {
  out << "metric,target,count,missing,mean,sd,min,q1,median,q3,max\n";
  for (const auto& m : s.metrics) {
    out << m.metric << ',' << detail::quote_if_needed(m.target) << ',' << m.count << ',' << m.missing << ','
        << detail::format_double(m.mean) << ',' << detail::format_double(m.sd) << ',' << detail::format_double(m.min)
        << ',' << detail::format_double(m.q1) << ',' << detail::format_double(m.median) << ','
        << detail::format_double(m.q3) << ',' << detail::format_double(m.max) << '\n';
  }
}

}  // namespace rctsynth
