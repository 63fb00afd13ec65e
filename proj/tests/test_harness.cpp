#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cltlab/harness.hpp"
#include "doctest.h"

using namespace cltlab;

namespace {

DistributionSpec rademacher1() {
  return DistributionSpec::product(Marginal1D::kRademacher, 1)
      .with_standardized_flag();
}

}  // namespace

TEST_CASE("run_rate_experiment on the exact lattice route") {
  RateConfig cfg{rademacher1(),
                 2.0,
                 {256, 512, 1024, 2048, 4096},
                 EstimatorRoute::kQuantileExact,
                 64,
                 4,
                 17,
                 "",
                 false};
  RateFit fit = run_rate_experiment(cfg);
  REQUIRE(fit.records.size() == 5);
  // slope within 0.03 of -1/2 on the exact pipeline
  CHECK(std::abs(fit.fitted_slope + 0.5) < 0.03);
  // the lattice plateau: fitted constant near 2/sqrt(12)
  CHECK(fit.fitted_constant == doctest::Approx(2.0 / std::sqrt(12.0)).epsilon(0.01));
  REQUIRE(fit.reference_constant.has_value());
  CHECK(*fit.reference_constant == doctest::Approx(0.0));  // symmetric law
  REQUIRE(fit.lattice_reference_printed.has_value());
  // as printed: (1/6)||2U||_2 = (2/6) sqrt(1/12)... = 0.0962; without the 1/6: 0.577
  CHECK(*fit.lattice_reference_printed == doctest::Approx(0.0962).epsilon(0.03));
  CHECK(*fit.lattice_reference_unscaled == doctest::Approx(0.5774).epsilon(0.03));
  for (const auto& rec : fit.records) {
    CHECK(rec.sqrtn_wp ==
          doctest::Approx(std::sqrt(static_cast<double>(rec.n)) * rec.wp)
              .epsilon(1e-12));
    CHECK(!rec.std_error.has_value());
  }
}

TEST_CASE("run_rate_experiment rejects an incompatible route") {
  RateConfig cfg{DistributionSpec::product(Marginal1D::kStdExponential, 1)
                     .with_standardized_flag(),
                 2.0,
                 {16, 32, 64, 128},
                 EstimatorRoute::kQuantileExact,
                 64,
                 4,
                 1,
                 "",
                 false};
  CHECK_THROWS_AS(run_rate_experiment(cfg), std::invalid_argument);
}

TEST_CASE("gamma-matched spec: degenerate slope flagged by steepness, no crash") {
  auto gamma_like = DistributionSpec::gaussian_mixture(
                        {Eigen::VectorXd::Zero(1)},
                        {Eigen::MatrixXd::Identity(1, 1)}, {1.0})
                        .with_standardized_flag();
  RateConfig cfg{gamma_like, 2.0,  {16, 32, 64, 128},
                 EstimatorRoute::kTwoSampleMc, 128, 6, 5, "", false};
  RateFit fit = run_rate_experiment(cfg);
  // W(gamma, gamma) = 0: the estimate is sampling floor only; slope is not
  // a rate and the records stay finite
  for (const auto& rec : fit.records) CHECK(std::isfinite(rec.wp));
  CHECK(std::isfinite(fit.fitted_slope));
}

TEST_CASE("emit_outputs round trip and determinism") {
  RateConfig cfg{rademacher1(), 2.0, {64, 128, 256, 512},
                 EstimatorRoute::kQuantileExact, 64, 4, 3, "", false};
  RateFit fit = run_rate_experiment(cfg);
  const std::string csv1 = records_to_csv(fit.records);
  RateFit fit2 = run_rate_experiment(cfg);
  CHECK(csv1 == records_to_csv(fit2.records));
  CHECK(csv1.rfind("spec_id,d,n,p,seed,method,wp,se,sqrtn_wp,bound_total\n", 0) ==
        0);

  // empty record list: header-only CSV
  CHECK(records_to_csv({}) ==
        "spec_id,d,n,p,seed,method,wp,se,sqrtn_wp,bound_total\n");

  const std::string dir = "/tmp/cltlab_test_out";
  std::filesystem::remove_all(dir);
  emit_outputs(fit.records, dir);
  CHECK(std::filesystem::exists(dir + "/records.csv"));
  CHECK(std::filesystem::exists(dir + "/records.json"));
  CHECK(std::filesystem::exists(dir + "/rate_rademacher-d1.dat"));

  // rate file: first column log2 n, monotone
  std::ifstream rf(dir + "/rate_rademacher-d1.dat");
  double prev = -1.0, a, b;
  int rows = 0;
  while (rf >> a >> b) {
    CHECK(a > prev);
    prev = a;
    ++rows;
  }
  CHECK(rows == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("doubles round trip through the shortest formatting") {
  for (double v : {0.1, 1.0 / 3.0, 2.0 / std::sqrt(12.0), 1e-17, 123456.789}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("records JSON mirrors the CSV fields") {
  ExperimentRecord rec;
  rec.spec_id = "x";
  rec.d = 1;
  rec.n = 64;
  rec.p = 2.0;
  rec.seed = 9;
  rec.method = "quantile_exact";
  rec.wp = 1.0 / 3.0;
  rec.sqrtn_wp = 8.0 / 3.0;
  rec.timestamp = "2024-01-01T00:00:00Z";
  const std::string json = records_to_json({rec}, false);
  CHECK(json.find("timestamp") == std::string::npos);
  const std::string json_ts = records_to_json({rec}, true);
  CHECK(json_ts.find("timestamp") != std::string::npos);
  CHECK(json.find("0.3333333333333333") != std::string::npos);
}

TEST_CASE("bound comparison: beta sweep surfaces hypothesis violations") {
  BoundComparisonConfig cfg;
  cfg.spec = DistributionSpec::product(Marginal1D::kRademacher, 2)
                 .with_standardized_flag();
  cfg.p = 2.0;
  cfg.n_grid = {64, 256};
  cfg.beta_sq_sweep = {1.0, 4.0, 8.0};
  cfg.wq = WqPolicy::parse("bonis:1");
  cfg.m = 128;
  cfg.reps = 4;
  cfg.seed = 7;
  BoundComparison cmp = run_bound_comparison(cfg);
  REQUIRE(cmp.rows.size() == 6);
  for (const auto& row : cmp.rows) {
    if (row.beta_sq == 1.0) {
      // only the zero difference survives: not positive-definite
      CHECK(!row.accepted);
      CHECK(row.rejection.find("corollary hypothesis") != std::string::npos);
    } else {
      CHECK(row.accepted);
      CHECK(row.ratio > 0.0);
      CHECK(std::isfinite(row.report.total));
    }
  }
  const std::string json = cmp.to_json();
  CHECK(json.find("rejection") != std::string::npos);
  CHECK(json.find("bound_total") != std::string::npos);
}

TEST_CASE("shrinking truncation schedule sends the lattice term to zero") {
  // continuous spec with beta_sq_n = n^{-1/2} (radius n^{-1/4}):
  // sqrt(n) x term_lattice = C sqrt(dp) sqrt(beta_sq_n) -> 0
  auto ex = DistributionSpec::product(Marginal1D::kStdExponential, 1)
                .with_standardized_flag();
  double prev = std::numeric_limits<double>::infinity();
  for (int64_t n : {256, 1024, 4096}) {
    const double beta_sq = 1.0 / std::sqrt(static_cast<double>(n));
    CltTerms t = compute_terms(ex, n, 2.0, beta_sq);
    BoundReport rep = theorem_bound(t, 3.0, 6.0, bonis_wq_plugin(1.0, n, 3.0));
    const double scaled = std::sqrt(static_cast<double>(n)) * rep.term_lattice;
    CHECK(scaled < prev);
    prev = scaled;
  }
  CHECK(prev < 0.2);
}

TEST_CASE("WqPolicy parsing") {
  CHECK(WqPolicy::parse("auto").kind == WqPolicy::kAuto);
  auto v = WqPolicy::parse("0.25");
  CHECK(v.kind == WqPolicy::kValue);
  CHECK(v.value == doctest::Approx(0.25));
  auto b = WqPolicy::parse("bonis:3.5");
  CHECK(b.kind == WqPolicy::kBonis);
  CHECK(b.value == doctest::Approx(3.5));
}

TEST_CASE("lattice_reference MC oracle for a symmetric lattice") {
  // E[X^3] = 0, beta = 2: (1/6) ||2U||_2 = (1/3) sqrt(1/12)... = 0.09623
  const double printed = lattice_reference(0.0, 2.0, 2.0, 400'000, 3);
  CHECK(printed == doctest::Approx(2.0 / (6.0 * std::sqrt(12.0))).epsilon(0.02));
}
