// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures.  Each criterion pins its tolerance in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cltlab/harness.hpp"
#include "cltlab/interpolation.hpp"
#include "cltlab/rng.hpp"

using namespace cltlab;

namespace {

int failures = 0;

void report(int idx, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %-2d %-34s %s  (%.1fs)\n", pass ? "PASS" : "FAIL",
              idx, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class F>
void run(int idx, const std::string& name, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = f();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report(idx, name, pass, detail, secs);
}

std::string fmt(double v) { return format_double(v); }

DistributionSpec std_exp1() {
  return DistributionSpec::product(Marginal1D::kStdExponential, 1)
      .with_standardized_flag();
}

DistributionSpec rademacher1() {
  return DistributionSpec::product(Marginal1D::kRademacher, 1)
      .with_standardized_flag();
}

// 1. continuous-law asymptotic constant via the two-sample route
std::pair<bool, std::string> criterion1() {
  RateConfig cfg{std_exp1(),
                 2.0,
                 {64, 128, 256, 512, 1024, 2048, 4096},
                 EstimatorRoute::kTwoSampleMc,
                 2048,
                 32,
                 20240811,
                 "",
                 false};
  RateFit fit = run_rate_experiment(cfg);
  const double target = std::sqrt(2.0) / 3.0;
  const double rel = std::abs(fit.fitted_constant - target) / target;
  return {rel < 0.10, "fitted " + fmt(fit.fitted_constant) + " vs " +
                          fmt(target) + ", rel " + fmt(rel)};
}

// 2. lattice lower bound via the exact quantile route
std::pair<bool, std::string> criterion2() {
  Discrete1D rad{{-1.0, 1.0}, {0.5, 0.5}};
  double min_scaled = std::numeric_limits<double>::infinity();
  for (int e = 8; e <= 14; ++e) {
    const int64_t n = int64_t{1} << e;
    const double w = wp_quantile_exact(convolve_power(rad, n), 2.0);
    min_scaled = std::min(min_scaled, std::sqrt(static_cast<double>(n)) * w);
  }
  return {min_scaled >= 0.5,
          "min sqrt(n) W_2 over the grid = " + fmt(min_scaled) + " >= 0.5"};
}

// 3. exact-vs-MC estimator agreement
std::pair<bool, std::string> criterion3() {
  const int64_t n = 1024;
  const double exact =
      wp_quantile_exact(convolve_power(Discrete1D{{-1.0, 1.0}, {0.5, 0.5}}, n),
                        2.0);
  TransportEstimate est = wp_two_sample(rademacher1(), n, 2.0, 2048, 32, 20240812);
  const double se = est.std_error.value_or(0.0);
  const double tol = 0.02 * exact + 3.0 * se;
  const double diff = std::abs(est.value - exact);
  return {diff <= tol, "mc " + fmt(est.value) + " vs exact " + fmt(exact) +
                           ", |diff| " + fmt(diff) + " <= " + fmt(tol)};
}

// 4. score-integral equality case for point mass sources
std::pair<bool, std::string> criterion4() {
  double worst = 0.0;
  for (int d = 1; d <= 4; ++d) {
    AtomLaw law;
    law.atoms = Eigen::MatrixXd::Zero(1, d);
    law.weights = Eigen::VectorXd::Ones(1);
    const ScoreIntegral si = score_integral(law, 2.0);
    worst = std::max(worst, std::abs(si.value - std::sqrt(static_cast<double>(d))));
  }
  // W_2(delta_0, gamma) in d=1 from the independent quantile route
  const double w1 = wp_quantile_exact(Discrete1D{{0.0}, {1.0}}, 2.0);
  worst = std::max(worst, std::abs(w1 - 1.0));
  return {worst < 1e-6, "max |score_integral - sqrt(d)| = " + fmt(worst)};
}

// 5. score-function identity: mixture vs conditional closed forms
std::pair<bool, std::string> criterion5() {
  const Discrete1D laws[3] = {
      {{-1.0, 1.0}, {0.5, 0.5}},
      {{-2, -1, 0, 1, 2}, {1.0 / 12, 1.0 / 6, 0.5, 1.0 / 6, 1.0 / 12}},
      {{-1.2, 0.3, 1.9}, {0.5, 0.3, 0.2}}};
  double sup = 0.0;
  for (const auto& l : laws) {
    const AtomLaw law = AtomLaw::from_discrete1d(l);
    for (double t : {0.05, 0.2, 1.0, 3.0})
      for (int i = 0; i <= 20; ++i) {
        Eigen::VectorXd x(1);
        x(0) = -4.0 + 0.4 * i;
        sup = std::max(sup, (score_mixture(law, t, x).value -
                             score_via_conditional(law, t, x).value)
                                .cwiseAbs()
                                .maxCoeff());
      }
  }
  return {sup < 1e-8, "sup |mixture - conditional| = " + fmt(sup)};
}

// 6. Stein domination: exact W_p below the score integral
std::pair<bool, std::string> criterion6() {
  const Discrete1D laws[2] = {
      {{-1.0, 1.0}, {0.5, 0.5}},
      {{-2, -1, 0, 1, 2}, {1.0 / 12, 1.0 / 6, 0.5, 1.0 / 6, 1.0 / 12}}};
  bool pass = true;
  std::string detail;
  for (const auto& l : laws)
    for (double p : {2.0, 3.0}) {
      const double wex = wp_quantile_exact(l, p);
      const ScoreIntegral si = score_integral(AtomLaw::from_discrete1d(l), p);
      const bool ok = wex <= si.value + si.quad_error + 1e-6;
      pass = pass && ok && !si.flagged;
      detail += fmt(wex) + "<=" + fmt(si.value) + " ";
    }
  return {pass, detail};
}

// 7. Hermite / Lemma 8 / Lemma 10 suite
std::pair<bool, std::string> criterion7() {
  // (a) ||M H_2(Z)||_2 = sqrt(2) ||M|| within 1% at 1e6 draws
  SeqRng rng(31337);
  Tensor m(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = j; k < 3; ++k) {
        const double v = 2.0 * rng.uniform() - 1.0;
        m.at({i, j, k}) = v;
        m.at({i, k, j}) = v;
      }
  HermitePNorm hp = contracted_hermite_pnorm(m, 2, 2.0, 1'000'000, 55);
  const double target = std::sqrt(2.0) * hs_norm(m);
  const double rel = std::abs(hp.value - target) / target;
  bool pass = rel < 0.01;
  std::string detail = "closed-form rel err " + fmt(rel);

  // (b) Lemma 8 inequality at 4-SE tolerance
  for (int k = 1; k <= 3 && pass; ++k)
    for (double p : {2.0, 3.0, 4.0}) {
      Tensor mk(2, k + 1);
      for (size_t f = 0; f < mk.size(); ++f) mk[f] = 2.0 * rng.uniform() - 1.0;
      HermitePNorm est = contracted_hermite_pnorm(mk, k, p, 300'000, 200 + k);
      double kfac = 1.0;
      for (int i = 2; i <= k; ++i) kfac *= i;
      const double rse = est.std_error / est.value;
      const double bound =
          std::pow(p - 1.0, k) * kfac * hs_dot(mk, mk) * (1.0 + 4.0 * 2.0 * rse);
      if (!(est.value * est.value <= bound)) {
        pass = false;
        detail += " lemma8 fail k=" + std::to_string(k) + " p=" + fmt(p);
      }
    }

  // (c) Lemma 10 regression residuals at 4 SE, k=2, alpha=0.6, d=1
  const double alpha = 0.6;
  RandomStream rs(909);
  const int64_t n = 1'000'000;
  double acc[3] = {0, 0, 0}, acc2[3] = {0, 0, 0};
  for (int64_t i = 0; i < n; ++i) {
    const double y = rs.normal(2 * static_cast<uint64_t>(i));
    const double z = rs.normal(2 * static_cast<uint64_t>(i) + 1);
    const double v = alpha * y + std::sqrt(1.0 - alpha * alpha) * z;
    const double resid = (z * z - 1.0) - (1.0 - alpha * alpha) * (v * v - 1.0);
    const double gs[3] = {1.0, v, v * v};
    for (int s = 0; s < 3; ++s) {
      acc[s] += resid * gs[s];
      acc2[s] += resid * gs[s] * resid * gs[s];
    }
  }
  for (int s = 0; s < 3; ++s) {
    const double mu = acc[s] / n;
    const double se =
        std::sqrt((acc2[s] / n - mu * mu) / static_cast<double>(n));
    if (std::abs(mu) > 4.0 * se) {
      pass = false;
      detail += " lemma10 residual " + fmt(mu / se) + " sigma";
    }
  }
  return {pass, detail};
}

// 8. epsilon pipeline: -5/9 slope with the W_q plug-in
std::pair<bool, std::string> criterion8() {
  const auto spec =
      standardize(DistributionSpec::two_point_product(0.0, 1.0, 0.3, 1));
  std::vector<double> lx, ly;
  double max_resid = 0.0;
  for (int e = 8; e <= 16; ++e) {
    const int64_t n = int64_t{1} << e;
    CltTerms terms = compute_terms(spec, n, 2.0, 6.0);
    EpsilonSolve es =
        solve_epsilon(terms, 3.0, 6.0, bonis_wq_plugin(3.0, n, 3.0));
    max_resid = std::max(max_resid, es.residual);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(es.epsilon));
  }
  const double slope = fit_line(lx, ly).slope;
  const bool pass = std::abs(slope + 5.0 / 9.0) < 0.02 && max_resid < 1e-10;
  return {pass, "slope " + fmt(slope) + " (target -5/9), max residual " +
                    fmt(max_resid)};
}

// 9. corollary leading-term scaling
std::pair<bool, std::string> criterion9() {
  const auto spec = std_exp1();
  const double ref = corollary_constant(spec, 2.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int e = 6; e <= 14; ++e) {
    const int64_t n = int64_t{1} << e;
    CltTerms terms = compute_terms(spec, n, 2.0, 9.0);
    BoundReport rep =
        theorem_bound(terms, 3.0, 6.0, bonis_wq_plugin(1.0, n, 3.0));
    const double scaled = std::sqrt(static_cast<double>(n)) * rep.term_leading;
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
  }
  const double variation = (hi - lo) / hi;
  const double gap = std::abs(hi - ref) / ref;
  return {variation < 1e-9 && gap < 1e-9,
          "relative variation " + fmt(variation) + ", gap to constant " +
              fmt(gap)};
}

// 10. bound/empirical ratio tables: finite, stable, within budget 50 at C=1
std::pair<bool, std::string> criterion10() {
  bool pass = true;
  std::string detail;
  struct Case {
    DistributionSpec spec;
    double beta_sq;
  };
  const std::vector<Case> cases = {
      {rademacher1(), 4.0},
      {DistributionSpec::product(Marginal1D::kRademacher, 2)
           .with_standardized_flag(),
       4.0},
      {standardize(DistributionSpec::two_point_product(0.0, 1.0, 0.3, 1)), 6.0},
  };
  for (const auto& cs : cases) {
    BoundComparisonConfig cfg;
    cfg.spec = cs.spec;
    cfg.p = 2.0;
    cfg.n_grid = {256, 1024, 4096};
    cfg.beta_sq_sweep = {cs.beta_sq};
    cfg.c = 1.0;
    cfg.wq = WqPolicy::parse("bonis:1");
    cfg.m = cs.spec.dim() == 1 ? 1024 : 256;
    cfg.reps = 8;
    cfg.seed = 20240813;
    BoundComparison cmp = run_bound_comparison(cfg);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : cmp.rows) {
      if (!row.accepted || !std::isfinite(row.ratio) || row.ratio <= 0.0 ||
          row.ratio > 50.0)
        pass = false;
      lo = std::min(lo, row.ratio);
      hi = std::max(hi, row.ratio);
    }
    // stability in n: the ratio stays within one order of magnitude
    if (hi > 10.0 * lo) pass = false;
    detail += cs.spec.id() + ":[" + fmt(lo) + "," + fmt(hi) + "] ";
  }
  return {pass, "ratio ranges " + detail + "(budget 50, C=1)"};
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  run(1, "continuous asymptotic constant", criterion1);
  run(2, "lattice lower bound", criterion2);
  run(3, "exact vs MC estimators", criterion3);
  run(4, "score integral equality case", criterion4);
  run(5, "score function identity", criterion5);
  run(6, "Stein domination", criterion6);
  run(7, "Hermite norm suite", criterion7);
  run(8, "epsilon slope -5/9", criterion8);
  run(9, "leading term scaling", criterion9);
  run(10, "bound/empirical ratio budget", criterion10);
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures;
}
