#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cltlab/interpolation.hpp"
#include "cltlab/wasserstein.hpp"
#include "doctest.h"

using namespace cltlab;

namespace {

AtomLaw two_atom() {
  return AtomLaw::from_discrete1d(Discrete1D{{-1.0, 1.0}, {0.5, 0.5}});
}

AtomLaw five_atom() {
  return AtomLaw::from_discrete1d(Discrete1D{
      {-2.0, -1.0, 0.0, 1.0, 2.0}, {1.0 / 12, 1.0 / 6, 0.5, 1.0 / 6, 1.0 / 12}});
}

AtomLaw delta0(int d) {
  AtomLaw law;
  law.atoms = Eigen::MatrixXd::Zero(1, d);
  law.weights = Eigen::VectorXd::Ones(1);
  return law;
}

}  // namespace

TEST_CASE("OUPoint invariants") {
  for (double t : {1e-6, 0.05, 0.7, 3.0, 20.0}) {
    OUPoint p = OUPoint::at(t);
    CHECK(p.delta ==
          doctest::Approx(1.0 / (p.shrink * p.shrink) - 1.0).epsilon(1e-12));
    CHECK(p.noise_var >= 0.0);
    CHECK(p.noise_var < 1.0);
  }
}

TEST_CASE("ft_sample limits") {
  auto rad = DistributionSpec::product(Marginal1D::kRademacher, 1)
                 .with_standardized_flag();
  // t large: F_t ~ gamma
  Eigen::MatrixXd big = ft_sample(rad, 4, 40.0, 20000, 3);
  CHECK(std::abs(big.col(0).mean()) < 0.03);
  const double var =
      (big.col(0).array() - big.col(0).mean()).square().sum() / (big.rows() - 1);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  // point mass source: draws are sqrt(1 - e^{-2t}) gaussians
  auto pm = DistributionSpec::point_mass({0.0});
  Eigen::MatrixXd z = ft_sample(pm, 1, 0.5, 20000, 4);
  const double nv = -std::expm1(-1.0);
  const double var2 =
      (z.col(0).array() - z.col(0).mean()).square().sum() / (z.rows() - 1);
  CHECK(var2 == doctest::Approx(nv).epsilon(0.05));

  // t near 0: draws close to raw S_n draws (lattice +- noise)
  Eigen::MatrixXd tiny = ft_sample(rad, 4, 1e-8, 100, 5);
  for (int i = 0; i < tiny.rows(); ++i) {
    const double lattice = std::round(tiny(i, 0) * 2.0) / 2.0;
    CHECK(std::abs(tiny(i, 0) - lattice) < 1e-3);
  }
}

TEST_CASE("score closed form for a single atom at zero") {
  AtomLaw law = delta0(1);
  for (double t : {0.1, 0.5, 2.0}) {
    const double e2t = std::exp(-2.0 * t);
    for (double x : {-2.0, -0.3, 0.0, 1.7}) {
      Eigen::VectorXd xv(1);
      xv(0) = x;
      const double want = -x * e2t / (1.0 - e2t);
      CHECK(score_mixture(law, t, xv).value(0) ==
            doctest::Approx(want).epsilon(1e-12));
      CHECK(score_via_conditional(law, t, xv).value(0) ==
            doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("score vanishes at large t and at symmetry points") {
  AtomLaw law = two_atom();
  Eigen::VectorXd x(1);
  x(0) = 0.0;
  CHECK(score_mixture(law, 0.5, x).value(0) == doctest::Approx(0.0));
  for (double xx : {-3.0, -1.0, 0.5, 3.0}) {
    x(0) = xx;
    CHECK(std::abs(score_mixture(law, 40.0, x).value(0)) < 1e-10);
  }
}

TEST_CASE("mixture and conditional scores agree on the grid") {
  const AtomLaw laws[3] = {two_atom(), five_atom(),
                           AtomLaw::from_discrete1d(
                               Discrete1D{{-1.2, 0.3, 1.9}, {0.5, 0.3, 0.2}})};
  double sup = 0.0;
  for (const auto& law : laws) {
    for (double t : {0.05, 0.2, 1.0, 3.0}) {
      for (int i = 0; i <= 20; ++i) {
        Eigen::VectorXd x(1);
        x(0) = -4.0 + 0.4 * i;
        sup = std::max(sup, std::abs(score_mixture(law, t, x).value(0) -
                                     score_via_conditional(law, t, x).value(0)));
      }
    }
  }
  CHECK(sup < 1e-8);
}

TEST_CASE("score underflow flag far from every atom") {
  AtomLaw law = two_atom();
  Eigen::VectorXd x(1);
  x(0) = 1e6;
  ScoreResult r = score_mixture(law, 0.01, x);
  CHECK(r.underflow_flag);
  CHECK(std::isfinite(r.value(0)));
}

TEST_CASE("score_pnorm matches the delta_0 closed form") {
  AtomLaw law = delta0(1);
  for (double t : {0.2, 1.0}) {
    const double e2t = std::exp(-2.0 * t);
    const double want = e2t / std::sqrt(1.0 - e2t);
    McEstimate est = score_pnorm(law, t, 2.0, 200'000, 17);
    CHECK(std::abs(est.value - want) <= 3.0 * est.std_error + 1e-9);
    CHECK(score_pnorm_quadrature(law, t, 2.0) ==
          doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("score_pnorm decreasing for t >= 1 and tiny at t = 40") {
  AtomLaw law = two_atom();
  double prev = std::numeric_limits<double>::infinity();
  for (double t : {1.0, 1.5, 2.5, 4.0}) {
    const double v = score_pnorm_quadrature(law, t, 2.0);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(score_pnorm_quadrature(law, 40.0, 2.0) < 1e-8);
}

TEST_CASE("score_integral: delta_0 equals sqrt(d) within 1e-6") {
  for (int d : {1, 2, 3, 4}) {
    ScoreIntegral si = score_integral(delta0(d), 2.0);
    CHECK(std::abs(si.value - std::sqrt(static_cast<double>(d))) < 1e-6);
    CHECK(!si.flagged);
  }
}

TEST_CASE("score_integral dominates the exact distance, near-tight for atoms") {
  const Discrete1D laws[2] = {
      {{-1.0, 1.0}, {0.5, 0.5}},
      {{-2, -1, 0, 1, 2}, {1.0 / 12, 1.0 / 6, 0.5, 1.0 / 6, 1.0 / 12}}};
  for (const auto& l : laws) {
    for (double p : {2.0, 3.0}) {
      const double wex = wp_quantile_exact(l, p);
      const ScoreIntegral si = score_integral(AtomLaw::from_discrete1d(l), p);
      CHECK(wex <= si.value + si.quad_error + 1e-6);
      CHECK(si.value < 1.5 * wex);  // the domination is not vacuous
    }
  }
}

TEST_CASE("trivial small-time bound dominates the score norm") {
  AtomLaw law = five_atom();
  for (double t : {0.05, 0.2, 0.5, 1.0, 2.0}) {
    const double lhs = score_pnorm_quadrature(law, t, 2.0);
    const double rhs =
        std::exp(-t) * (law.lp_norm(2.0) +
                        gaussian_lp_norm(2.0, 1) / std::sqrt(std::expm1(2.0 * t)));
    CHECK(lhs <= rhs + 1e-9);
  }
}
