#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cubatlas/pipeline.hpp"

using namespace cubatlas;
namespace fs = std::filesystem;

namespace {

PipelineConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cubatlas_pipeline_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

PipelineConfig small_run(const fs::path& dir, int threads) {
  PipelineConfig c = config_from(R"(
    groups = 195, 221-223
    n = 8
    rho = uniform 0.2 0.5
    count = 3
    seed = 11
  )");
  c.threads = threads;
  c.out = dir / "a.cma";
  return c;
}

} // namespace

TEST(Config, ParsesKeysAndComments) {
  const PipelineConfig c = config_from(R"(
    # comment line
    groups = 200-202, 221   # trailing comment
    n = 16
    rho = 0.1:0.3:0.1
    count = 2
    seed = 18446744073709551615
    erosion = post-hoc
    E = 70000
    nu = 0.33
    preconditioner = jacobi
    isotropic_omega = 0.02
  )");
  EXPECT_EQ(c.groups, (std::vector<int>{200, 201, 202, 221}));
  EXPECT_EQ(c.n, 16);
  EXPECT_EQ(c.rho.values().size(), 3u);
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.erosion, ErosionMode::PostHoc);
  EXPECT_EQ(c.material.E_s, 70000);
  EXPECT_EQ(c.solver.preconditioner, Preconditioner::Jacobi);
  EXPECT_EQ(c.thresholds.isotropic_omega, 0.02);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from("colour = red"), ConfigError);
  EXPECT_THROW(config_from("groups = 194"), ConfigError);
  EXPECT_THROW(config_from("groups = 220-231"), ConfigError);
  EXPECT_THROW(config_from("n = 30"), ConfigError);
  EXPECT_THROW(config_from("n = 8x"), ConfigError);
  EXPECT_THROW(config_from("rho = 0.01"), ConfigError);
  EXPECT_THROW(config_from("nu = 0.5"), ConfigError);
  EXPECT_THROW(config_from("erosion = random"), ConfigError);
  EXPECT_THROW(config_from("just words"), ConfigError);
  EXPECT_THROW(config_from("anisotropic_z_high = 0.01"), ConfigError);
}

TEST(Config, GroupsAndDensities) {
  EXPECT_EQ(parse_groups("all").size(), 36u);
  EXPECT_EQ(parse_groups("230, 195, 230"), (std::vector<int>{230, 195}));
  EXPECT_THROW(parse_groups("200-199"), ConfigError);
  EXPECT_THROW(parse_groups(""), ConfigError);

  const DensitySchedule grid = parse_density("0.05:0.5:0.05");
  ASSERT_EQ(grid.values().size(), 10u);
  EXPECT_NEAR(grid.values().back(), 0.5, 1e-12);
  const DensitySchedule u = parse_density("uniform 0.05 0.5");
  EXPECT_EQ(u.kind, DensitySchedule::Kind::Uniform);
  EXPECT_EQ(u.to_string(), "uniform 0.05 0.5");
  EXPECT_THROW(parse_density("uniform 0.5"), ConfigError);
  EXPECT_THROW(parse_density("0.1:0.2:0"), ConfigError);
  EXPECT_THROW(parse_density("0.6:0.2:0.1"), ConfigError);
}

TEST(Config, ThresholdFile) {
  std::istringstream in("isotropic_omega = 0.1\nauxetic_nu = -0.05\n");
  const Thresholds t = parse_thresholds(in);
  EXPECT_EQ(t.isotropic_omega, 0.1);
  EXPECT_EQ(t.auxetic_nu, -0.05);
  std::istringstream bad("n = 8\n");
  EXPECT_THROW(parse_thresholds(bad), ConfigError);
}

TEST(Plan, DeterministicAndInRange) {
  const PipelineConfig c = config_from("groups = all\nrho = uniform 0.05 0.5\ncount = 50\nseed = 4");
  const auto a = make_plan(c), b = make_plan(c);
  ASSERT_EQ(a.size(), 1800u);
  std::set<std::pair<int, std::uint64_t>> keys;
  for (std::size_t i = 0; i != a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].rho, b[i].rho);
    EXPECT_GE(a[i].rho, 0.05);
    EXPECT_LT(a[i].rho, 0.5);
    keys.insert(record_key(a[i].group, a[i].seed));
  }
  EXPECT_EQ(keys.size(), a.size());
  // adding groups leaves the existing items alone
  PipelineConfig wider = c;
  wider.groups = parse_groups("195");
  EXPECT_EQ(make_plan(wider)[7].seed, a[7].seed);
}

TEST(Pipeline, OutputDoesNotDependOnThreads) {
  const fs::path d1 = scratch("t1"), d3 = scratch("t3");
  const PipelineSummary s1 = run_pipeline(small_run(d1, 1));
  const PipelineSummary s3 = run_pipeline(small_run(d3, 3));
  EXPECT_EQ(s1.planned, 12u);
  EXPECT_EQ(s1.processed, 12u);
  EXPECT_EQ(impl::slurp(d1 / "a.cma"), impl::slurp(d3 / "a.cma"));
  EXPECT_EQ(impl::slurp(d1 / "a.cma.csv"), impl::slurp(d3 / "a.cma.csv"));
  EXPECT_EQ(impl::slurp(d1 / "a.cma.report.txt"), impl::slurp(d3 / "a.cma.report.txt"));
  EXPECT_EQ(s1.isotropic, s3.isotropic);

  const Dataset ds = read_dataset(d1 / "a.cma");
  EXPECT_EQ(ds.metadata, pipeline_metadata(small_run(d1, 1)));
  const auto plan = make_plan(small_run(d1, 1));
  ASSERT_EQ(ds.records.size(), plan.size());
  for (std::size_t i = 0; i != plan.size(); ++i) {
    EXPECT_EQ(ds.records[i].group_number, plan[i].group);
    EXPECT_EQ(ds.records[i].seed, plan[i].seed);
    if (ds.records[i].has(Valid)) {
      EXPECT_TRUE(ds.records[i].has(HasProperties));
      EXPECT_TRUE(is_invariant(ds.records[i].grid(), group(plan[i].group)));
    }
  }
  fs::remove_all(d1);
  fs::remove_all(d3);
}

TEST(Pipeline, ResumesAndRefusesForeignFiles) {
  const fs::path d = scratch("resume");
  PipelineConfig c = small_run(d, 2);
  run_pipeline(c);
  const auto full = impl::slurp(c.out);

  // a half-finished file is completed to the same bytes
  Dataset part = read_dataset(c.out);
  part.records.resize(5);
  write_dataset(c.out, part);
  const PipelineSummary s = run_pipeline(c);
  EXPECT_EQ(s.resumed, 5u);
  EXPECT_EQ(s.processed, 7u);
  EXPECT_EQ(impl::slurp(c.out), full);

  PipelineConfig other = c;
  other.seed = 12;
  EXPECT_THROW(run_pipeline(other), ConfigError);
  fs::remove_all(d);
}

TEST(Report, FormatsRowsAndGaps) {
  TestResult r;
  r.H = 12.345;
  r.df = 2;
  r.n = 40;
  r.p = 0.0021;
  r.epsilon_sq = 0.0799;
  r.epsilon_sq_reported = 0.08;
  r.interpretation = EffectSize::Moderate;
  const std::vector<ReportRow> rows = {{"bravais", "Z", r, {}},
                                       {"point_group", "nu", std::nullopt, "all values tie"}};
  const std::string text = format_report(rows, 0.05, 0.2);
  EXPECT_NE(text.find("rho in [0.05, 0.2]"), std::string::npos);
  EXPECT_NE(text.find("Bravais Lattice"), std::string::npos);
  EXPECT_NE(text.find("12.3"), std::string::npos);
  EXPECT_NE(text.find("0.002"), std::string::npos);
  EXPECT_NE(text.find("0.08  Moderate"), std::string::npos);
  EXPECT_NE(text.find("n/a (all values tie)"), std::string::npos);
  r.p = 1e-5;
  EXPECT_NE(format_report({{"space_group", "E_norm", r, {}}}, 0, 1).find("p < .001"),
            std::string::npos);
}
