#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rctsynth/reference.hpp"
#include "rctsynth/report.hpp"

using namespace rctsynth;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  DataTable real = generate_reference_dataset(5, 400);
  SimulationResult res;
  fs::path dir;

  Fixture() {
    auto cfg = reference_config();
    cfg.runs = 3;
    SimulationOptions opt;
    opt.plot_run = 0;
    res = simulate(cfg, real, opt);
    dir = fs::path(::testing::TempDir()) / "rctsynth_report";
    fs::remove_all(dir);
    emit_report(res, real, dir);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(detail::split_csv_line(line));
  return rows;
}

}  // namespace

TEST(Report, RunsCsvIsLongFormat) {
  const auto& f = fixture();
  const auto rows = read_rows(f.dir / "runs.csv");
  const std::size_t per_run = f.res.reports.front().flatten().size();
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.size() - 1, 3 * per_run);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].size(), 4u);
}

TEST(Report, RunsCsvRoundTrips) {
  const auto& f = fixture();
  const auto back = reports_from_runs_csv(f.dir / "runs.csv");
  ASSERT_EQ(back.size(), f.res.reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].run_id, f.res.reports[i].run_id);
    EXPECT_EQ(back[i].flatten(), f.res.reports[i].flatten());
  }
  std::ostringstream a, b;
  write_runs_csv(a, f.res.reports);
  write_runs_csv(b, back);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Report, SummaryJsonParsesAndRoundTrips) {
  const auto& f = fixture();
  std::ifstream in(f.dir / "summary.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j, summary_json(f.res));
  EXPECT_EQ(nlohmann::json::parse(j.dump()), j);
  EXPECT_EQ(j["runs"], 3);
  EXPECT_EQ(j["metrics"].size(), f.res.summary.metrics.size());
  EXPECT_EQ(j["plot_run"], 0);
  EXPECT_TRUE(j["failures"].empty());
}

TEST(Report, TimingHasOneRowPerRun) {
  const auto rows = read_rows(fixture().dir / "timing.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"run_id", "seconds"}));
}

TEST(Report, PlotDataPerColumn) {
  const auto& f = fixture();
  for (const auto& cs : f.real.schema()) {
    const auto base = f.dir / "plot" / cs.name;
    if (cs.is_discrete()) {
      const auto rows = read_rows(base.string() + "_freq.csv");
      EXPECT_EQ(rows.size(), cs.categories.size() + 1) << cs.name;
    } else {
      EXPECT_TRUE(fs::exists(base.string() + "_hist.csv")) << cs.name;
      const auto rows = read_rows(base.string() + "_ecdf.csv");
      ASSERT_GT(rows.size(), 2u) << cs.name;
      for (std::size_t col : {1u, 2u}) {
        double prev = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
          const double y = std::stod(rows[i][col]);
          EXPECT_GE(y, prev) << cs.name;
          EXPECT_LE(y, 1.0);
          prev = y;
        }
        EXPECT_EQ(prev, 1.0) << cs.name;
      }
    }
  }
}

TEST(Report, HistogramProportionsSumToOne) {
  std::ostringstream out;
  write_histogram_csv(out, {0.0, 1.0, 2.0, 10.0}, {5.0, 5.0}, 5);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  double sr = 0.0, ss = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto f = detail::split_csv_line(line);
    sr += std::stod(f[2]);
    ss += std::stod(f[3]);
    ++rows;
  }
  EXPECT_EQ(rows, 5);
  EXPECT_NEAR(sr, 1.0, 1e-12);
  EXPECT_NEAR(ss, 1.0, 1e-12);
}

TEST(Report, UnwritableDirectorySurfacesPath) {
  const auto& f = fixture();
  const fs::path blocker = fs::path(::testing::TempDir()) / "rctsynth_blocker";
  { std::ofstream(blocker) << "x"; }
  try {
    emit_report(f.res, f.real, blocker / "sub");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("rctsynth_blocker"), std::string::npos);
  }
}

TEST(Report, MalformedRunsCsvRejected) {
  std::istringstream bad_header("run,metric\n");
  EXPECT_THROW(read_runs_csv(bad_header), ParseError);
  std::istringstream bad_value("run_id,metric,target,value\n0,ks_complement,age,abc\n");
  EXPECT_THROW(read_runs_csv(bad_value), ParseError);
}
