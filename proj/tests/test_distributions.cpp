#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>

#include "cltlab/distributions.hpp"
#include "doctest.h"

using namespace cltlab;

namespace {

double binom_pmf(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0) - n * std::log(2.0));
}

}  // namespace

TEST_CASE("standardize two-atom law") {
  auto spec = standardize(DistributionSpec::discrete1d({0.0, 1.0}, {0.5, 0.5}));
  const auto* fam = std::get_if<DiscreteFamily>(&spec.family());
  REQUIRE(fam != nullptr);
  CHECK(fam->atoms[0][0] == doctest::Approx(-1.0));
  CHECK(fam->atoms[1][0] == doctest::Approx(1.0));
  CHECK(spec.standardized());
}

TEST_CASE("standardize is idempotent and whitens correlated atoms") {
  auto spec = standardize(DistributionSpec::discrete(
      {{0.0, 0.0}, {1.0, 0.8}, {-0.6, 1.4}, {2.2, -0.9}},
      {0.1, 0.45, 0.25, 0.2}));
  const Eigen::MatrixXd cov = covariance_of(spec);
  const Eigen::VectorXd mu = mean_of(spec);
  CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(mu.cwiseAbs().maxCoeff() < 1e-9);

  auto twice = standardize(spec);
  const auto* a = std::get_if<DiscreteFamily>(&spec.family());
  const auto* b = std::get_if<DiscreteFamily>(&twice.family());
  for (size_t i = 0; i < a->atoms.size(); ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(a->atoms[i][c] == doctest::Approx(b->atoms[i][c]).epsilon(1e-9));
}

TEST_CASE("standardize rejects singular covariance with eigenvalue") {
  auto pm = DistributionSpec::point_mass({0.0, 0.0});
  CHECK_THROWS_AS((void)standardize(pm), SingularCovarianceError);
  try {
    (void)standardize(pm);
  } catch (const SingularCovarianceError& e) {
    CHECK(e.smallest_eigenvalue == doctest::Approx(0.0));
  }
}

TEST_CASE("sampling: point mass, rademacher means, exponential skewness") {
  auto pm = DistributionSpec::point_mass({0.0, 0.0, 0.0});
  Eigen::MatrixXd z = sample(pm, 3, 99);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);

  auto rad = DistributionSpec::product(Marginal1D::kRademacher, 2);
  const int64_t m = 100'000;
  Eigen::MatrixXd r = sample(rad, m, 7);
  for (int c = 0; c < 2; ++c)
    CHECK(std::abs(r.col(c).mean()) < 4.0 / std::sqrt(static_cast<double>(m)));

  // skewness of standardized Exp(1) is E[(E-1)^3] = 2
  auto ex = DistributionSpec::product(Marginal1D::kStdExponential, 1);
  const int64_t M = 1'000'000;
  Eigen::MatrixXd s = sample(ex, M, 19);
  const double mean = s.col(0).mean();
  double m2 = 0.0, m3 = 0.0;
  for (int64_t i = 0; i < M; ++i) {
    const double c = s(i, 0) - mean;
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= static_cast<double>(M);
  m3 /= static_cast<double>(M);
  const double skew = m3 / std::pow(m2, 1.5);
  CHECK(skew == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("sampling deterministic and independent of chunking") {
  auto spec = DistributionSpec::product(Marginal1D::kStdExponential, 2);
  Eigen::MatrixXd a = sample(spec, 50, 5);
  Eigen::MatrixXd b = sample(spec, 50, 5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  // drawing more rows leaves earlier rows untouched (counter addressing)
  Eigen::MatrixXd c = sample(spec, 80, 5);
  CHECK((c.topRows(50) - a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("moment_tensor exact values") {
  auto rad2 = DistributionSpec::product(Marginal1D::kRademacher, 2);
  Tensor q2 = moment_tensor(rad2, 2);
  CHECK(q2.at({0, 0}) == doctest::Approx(1.0));
  CHECK(q2.at({1, 1}) == doctest::Approx(1.0));
  CHECK(q2.at({0, 1}) == doctest::Approx(0.0));

  Tensor q3 = moment_tensor(rad2, 3);
  for (size_t f = 0; f < q3.size(); ++f) CHECK(q3[f] == doctest::Approx(0.0));

  // standardized exponential: E[X^3] = 2 (by-hand integration)
  auto ex = DistributionSpec::product(Marginal1D::kStdExponential, 1);
  CHECK(moment_tensor(ex, 3)[0] == doctest::Approx(2.0));
  CHECK(moment_tensor(ex, 4)[0] == doctest::Approx(9.0));

  // gaussian mixture equal to gamma: E[X^3] = 0, E[X^4] = 3
  auto g = DistributionSpec::gaussian_mixture(
      {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Identity(1, 1)}, {1.0});
  CHECK(moment_tensor(g, 3)[0] == doctest::Approx(0.0));
  CHECK(moment_tensor(g, 4)[0] == doctest::Approx(3.0));

  // 2-d gaussian with correlation rho: E[X1^2 X2^2] = 1 + 2 rho^2 (Isserlis)
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 1.0;
  auto g2 = DistributionSpec::gaussian_mixture({Eigen::VectorXd::Zero(2)}, {cov},
                                               {1.0});
  Tensor q4 = moment_tensor(g2, 4);
  CHECK(q4.at({0, 0, 1, 1}) == doctest::Approx(1.0 + 2.0 * 0.09));
  CHECK(q4.at({0, 1, 0, 1}) == doctest::Approx(1.0 + 2.0 * 0.09));
}

TEST_CASE("moment_tensor MC agreement for the mixture family") {
  // oracle: sample moments converge to the exact recursion values
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, -0.4, -0.4, 2.0;
  Eigen::VectorXd mu(2);
  mu << 0.5, -1.0;
  auto g = DistributionSpec::gaussian_mixture(
      {mu, -mu}, {cov, Eigen::MatrixXd::Identity(2, 2)}, {0.3, 0.7});
  Tensor exact = moment_tensor(g, 3);
  const int64_t m = 1'000'000;
  Eigen::MatrixXd s = sample(g, m, 31);
  Tensor mc(2, 3);
  for (int64_t i = 0; i < m; ++i) {
    const std::vector<double> row{s(i, 0), s(i, 1)};
    Tensor pw = outer_power(row, 3);
    for (size_t f = 0; f < mc.size(); ++f) mc[f] += pw[f];
  }
  for (size_t f = 0; f < mc.size(); ++f) {
    mc[f] /= static_cast<double>(m);
    CHECK(mc[f] == doctest::Approx(exact[f]).epsilon(0.03));
  }
}

TEST_CASE("difference moments: rademacher oracle values") {
  auto rad = DistributionSpec::product(Marginal1D::kRademacher, 1);
  // D in {-2, 0, 2} with probabilities 1/4, 1/2, 1/4
  CHECK(difference_abs_moment(rad, 2.0, std::nullopt, TailSide::kAbove).value ==
        doctest::Approx(2.0));
  CHECK(difference_abs_moment(rad, 4.0, 5.0, TailSide::kAbove).value ==
        doctest::Approx(0.0));
  Eigen::MatrixXd m4 = difference_second_moment(rad, 4.0);
  CHECK(m4(0, 0) == doctest::Approx(2.0));
  Eigen::MatrixXd m1 = difference_second_moment(rad, 1.0);
  CHECK(m1(0, 0) == doctest::Approx(0.0));

  auto rad2 = DistributionSpec::product(Marginal1D::kRademacher, 2);
  Eigen::MatrixXd d2 = difference_second_moment(rad2, 4.0);
  CHECK(d2(0, 0) == doctest::Approx(1.0));
  CHECK(d2(1, 1) == doctest::Approx(1.0));
  CHECK(d2(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("difference moments: continuous law MC near exact") {
  auto ex = DistributionSpec::product(Marginal1D::kStdExponential, 1);
  McOptions mc;
  mc.draws = 400'000;
  auto est = difference_abs_moment(ex, 2.0, std::nullopt, TailSide::kAbove, mc);
  // E|X'-X|^2 = 2 Var = 2
  CHECK(est.value == doctest::Approx(2.0).epsilon(0.02));
  CHECK(est.std_error > 0.0);
  CHECK(std::abs(est.value - 2.0) < 5.0 * est.std_error);
}

TEST_CASE("difference partition identity across thresholds") {
  auto spec = standardize(DistributionSpec::discrete1d(
      {-2.0, -0.3, 0.9, 1.4}, {0.2, 0.4, 0.25, 0.15}));
  const double total =
      difference_abs_moment(spec, 2.5, std::nullopt, TailSide::kAbove).value;
  for (double t : {0.0, 0.1, 1.0, 3.7, 25.0}) {
    const double above = difference_abs_moment(spec, 2.5, t, TailSide::kAbove).value;
    const double below = difference_abs_moment(spec, 2.5, t, TailSide::kBelow).value;
    CHECK(std::abs(total - above - below) < 1e-12);
  }
}

TEST_CASE("DifferencePopulation tails match direct enumeration") {
  auto spec = standardize(
      DistributionSpec::discrete1d({-1.0, 0.2, 1.6}, {0.5, 0.3, 0.2}));
  DifferencePopulation pop(spec, 3.0);
  CHECK(pop.exact());
  for (double t : {0.0, 0.5, 1.9, 7.0}) {
    CHECK(pop.tail_abs_moment4(t) ==
          doctest::Approx(
              difference_abs_moment(spec, 4.0, t, TailSide::kAbove).value)
              .epsilon(1e-12));
    CHECK(pop.tail_abs_moment_p2(t) ==
          doctest::Approx(
              difference_abs_moment(spec, 5.0, t, TailSide::kAbove).value)
              .epsilon(1e-12));
  }
  CHECK(pop.total_abs_moment(2.0) == doctest::Approx(2.0).epsilon(1e-12));
  Eigen::MatrixXd lam = Eigen::MatrixXd::Identity(1, 1) * 0.5;
  const double b2 = pop.truncated_lambda_moment(lam, 2.0, 100.0);
  CHECK(b2 == doctest::Approx(0.25 * 2.0).epsilon(1e-12));
}

TEST_CASE("convolve_power: hand convolution of rademacher") {
  Discrete1D rad{{-1.0, 1.0}, {0.5, 0.5}};
  Discrete1D s2 = convolve_power(rad, 2);
  REQUIRE(s2.atoms.size() == 3);
  CHECK(s2.atoms[0] == doctest::Approx(-std::sqrt(2.0)));
  CHECK(s2.atoms[1] == doctest::Approx(0.0));
  CHECK(s2.atoms[2] == doctest::Approx(std::sqrt(2.0)));
  CHECK(s2.weights[0] == doctest::Approx(0.25));
  CHECK(s2.weights[1] == doctest::Approx(0.5));
  CHECK(s2.weights[2] == doctest::Approx(0.25));

  Discrete1D s1 = convolve_power(rad, 1);
  CHECK(s1.atoms[0] == doctest::Approx(-1.0));
  CHECK(s1.weights[0] == doctest::Approx(0.5));
}

TEST_CASE("convolve_power: binomial pmf oracle at n = 10") {
  Discrete1D rad{{-1.0, 1.0}, {0.5, 0.5}};
  Discrete1D s = convolve_power(rad, 10);
  REQUIRE(s.atoms.size() == 11);
  for (int k = 0; k <= 10; ++k) {
    CHECK(s.atoms[k] ==
          doctest::Approx((2.0 * k - 10.0) / std::sqrt(10.0)).epsilon(1e-12));
    CHECK(s.weights[k] == doctest::Approx(binom_pmf(10, k)).epsilon(1e-10));
  }
  CHECK(std::abs(s.mean()) < 1e-10);
  CHECK(s.variance() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("convolve_power keeps mean zero variance one on a five-atom law") {
  auto spec = standardize(DistributionSpec::discrete1d(
      {-2, -1, 0, 1, 2}, {1.0 / 12, 1.0 / 6, 0.5, 1.0 / 6, 1.0 / 12}));
  Discrete1D law = convolve_power(as_discrete1d(spec), 100);
  CHECK(std::abs(law.mean()) < 1e-10);
  CHECK(std::abs(law.variance() - 1.0) < 1e-10);
}

TEST_CASE("lattice_spacing detection") {
  Discrete1D rad{{-1.0, 1.0}, {0.5, 0.5}};
  auto beta = lattice_spacing(rad);
  REQUIRE(beta.has_value());
  CHECK(*beta == doctest::Approx(2.0));
  Discrete1D irr{{0.0, 1.0, std::sqrt(2.0)}, {0.4, 0.3, 0.3}};
  CHECK(!lattice_spacing(irr).has_value());
}

TEST_CASE("spec JSON round trip and diagnostics") {
  const std::string text = R"({
    "dim": 2, "family": "discrete",
    "atoms": [[0.0, 0.0], [1.0, 0.5], [-1.0, 0.5]],
    "weights": [0.5, 0.25, 0.25],
    "standardize": true})";
  auto spec = spec_from_json_text(text, "inline-test");
  CHECK(spec.dim() == 2);
  CHECK(spec.standardized());
  auto round = spec_from_json_text(spec_to_json_text(spec), "roundtrip");
  const auto* a = std::get_if<DiscreteFamily>(&spec.family());
  const auto* b = std::get_if<DiscreteFamily>(&round.family());
  REQUIRE(a);
  REQUIRE(b);
  for (size_t i = 0; i < a->atoms.size(); ++i)
    for (int c = 0; c < 2; ++c) CHECK(a->atoms[i][c] == b->atoms[i][c]);

  CHECK_THROWS_AS((void)spec_from_json_text("{", "bad"), SpecParseError);
  CHECK_THROWS_WITH_AS(
      (void)spec_from_json_text(R"({"family":"discrete","atoms":[[0],[1]]})",
                                "w"),
      doctest::Contains("weights"), SpecParseError);
  CHECK_THROWS_WITH_AS(
      (void)spec_from_json_text(
          R"({"family":"nope","atoms":[[0]],"weights":[1]})", "f"),
      doctest::Contains("family"), SpecParseError);
  CHECK_THROWS_WITH_AS(
      (void)spec_from_json_text(
          R"({"dim":3,"family":"product_1d","marginal":"rademacher","copies":2})",
          "d"),
      doctest::Contains("dim"), SpecParseError);
}

TEST_CASE("two_point product standardization") {
  auto spec = standardize(DistributionSpec::two_point_product(0.0, 1.0, 0.3, 1));
  const auto* p = std::get_if<Product1DFamily>(&spec.family());
  REQUIRE(p);
  // standardized atoms: a = -sqrt((1-w)/w), b = sqrt(w/(1-w))
  CHECK(p->a == doctest::Approx(-std::sqrt(0.7 / 0.3)));
  CHECK(p->b == doctest::Approx(std::sqrt(0.3 / 0.7)));
  const Eigen::MatrixXd cov = covariance_of(spec);
  CHECK(cov(0, 0) == doctest::Approx(1.0));
  // E[X^3] = (1 - 2w)/sqrt(w(1-w))
  CHECK(moment_tensor(spec, 3)[0] ==
        doctest::Approx(0.4 / std::sqrt(0.21)).epsilon(1e-12));
}
