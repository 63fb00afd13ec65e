#include "cltlab/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cltlab/numerics.hpp"
#include "cltlab/rng.hpp"

namespace cltlab {

OUPoint OUPoint::at(double t) {
  if (!(t >= 0.0)) throw std::domain_error("OUPoint: t >= 0 required");
  OUPoint p;
  p.t = t;
  p.delta = std::expm1(2.0 * t);
  p.shrink = std::exp(-t);
  p.noise_var = -std::expm1(-2.0 * t);
  return p;
}

AtomLaw AtomLaw::from_discrete1d(const Discrete1D& law) {
  law.validate();
  AtomLaw out;
  const int a = static_cast<int>(law.atoms.size());
  out.atoms.resize(a, 1);
  out.weights.resize(a);
  for (int i = 0; i < a; ++i) {
    out.atoms(i, 0) = law.atoms[i];
    out.weights(i) = law.weights[i];
  }
  return out;
}

AtomLaw AtomLaw::from_spec(const DistributionSpec& spec) {
  if (!spec.is_discrete())
    throw std::invalid_argument("AtomLaw::from_spec: finite-atom spec required");
  if (spec.dim() == 1) return from_discrete1d(as_discrete1d(spec));
  AtomLaw out;
  if (const auto* df = std::get_if<DiscreteFamily>(&spec.family())) {
    const int a = static_cast<int>(df->atoms.size());
    out.atoms.resize(a, spec.dim());
    out.weights.resize(a);
    for (int i = 0; i < a; ++i) {
      for (int c = 0; c < spec.dim(); ++c) out.atoms(i, c) = df->atoms[i][c];
      out.weights(i) = df->weights[i];
    }
    return out;
  }
  if (const auto* pm = std::get_if<PointMassFamily>(&spec.family())) {
    out.atoms.resize(1, spec.dim());
    for (int c = 0; c < spec.dim(); ++c) out.atoms(0, c) = pm->location[c];
    out.weights = Eigen::VectorXd::Ones(1);
    return out;
  }
  const auto* pr = std::get_if<Product1DFamily>(&spec.family());
  const double lo = pr->marginal == Marginal1D::kRademacher ? -1.0 : pr->a;
  const double hi = pr->marginal == Marginal1D::kRademacher ? 1.0 : pr->b;
  const double w = pr->marginal == Marginal1D::kRademacher ? 0.5 : pr->w;
  const int d = spec.dim();
  const int count = 1 << d;
  out.atoms.resize(count, d);
  out.weights.resize(count);
  for (int mask = 0; mask < count; ++mask) {
    double wt = 1.0;
    for (int c = 0; c < d; ++c) {
      const bool up = (mask >> c) & 1;
      out.atoms(mask, c) = up ? hi : lo;
      wt *= up ? (1.0 - w) : w;
    }
    out.weights(mask) = wt;
  }
  return out;
}

double AtomLaw::lp_norm(double p) const {
  double s = 0.0;
  for (int i = 0; i < atoms.rows(); ++i)
    s += weights(i) * std::pow(atoms.row(i).norm(), p);
  return std::pow(s, 1.0 / p);
}

Eigen::MatrixXd ft_sample(const DistributionSpec& spec, int64_t n, double t,
                          int64_t m, uint64_t seed) {
  if (!(t > 0.0)) throw std::domain_error("ft_sample: t > 0 required");
  const OUPoint ou = OUPoint::at(t);
  const int d = spec.dim();
  CoupledSampler sampler(spec);
  RandomStream rs(derive_seed(seed, 0x6674u));
  RandomStream rz(derive_seed(seed, 0x667Au));
  Eigen::MatrixXd out(m, d);
  std::vector<double> xs(d);
  const double root_n = std::sqrt(static_cast<double>(n));
  const double sigma = std::sqrt(ou.noise_var);
  for (int64_t i = 0; i < m; ++i) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (int64_t j = 0; j < n; ++j) {
      sampler.draw(rs, static_cast<uint64_t>(i * n + j), false, xs.data(),
                   nullptr);
      for (int c = 0; c < d; ++c) s(c) += xs[c];
    }
    for (int c = 0; c < d; ++c)
      out(i, c) = ou.shrink * s(c) / root_n +
                  sigma * rz.normal(static_cast<uint64_t>(i * d + c));
  }
  return out;
}

namespace {

constexpr double kUnderflowLogWeight = -800.0;  // ~40 sigma

// posterior weights pi_j(x) over atom images e^{-t} a_j, log-sum-exp
void posterior(const AtomLaw& law, const OUPoint& ou, const Eigen::VectorXd& x,
               Eigen::VectorXd& pi, bool& underflow) {
  const int a = static_cast<int>(law.atoms.rows());
  Eigen::VectorXd logw(a);
  for (int j = 0; j < a; ++j) {
    const double d2 = (x - ou.shrink * law.atoms.row(j).transpose()).squaredNorm();
    logw(j) = std::log(law.weights(j)) - 0.5 * d2 / ou.noise_var;
  }
  const double mx = logw.maxCoeff();
  underflow = mx < kUnderflowLogWeight;
  pi = (logw.array() - mx).exp();
  pi /= pi.sum();
}

}  // namespace

ScoreResult score_mixture(const AtomLaw& law, double t, const Eigen::VectorXd& x) {
  if (!(t > 0.0)) throw std::domain_error("score_mixture: t > 0 required");
  const OUPoint ou = OUPoint::at(t);
  ScoreResult out;
  Eigen::VectorXd pi;
  posterior(law, ou, x, pi, out.underflow_flag);
  const Eigen::VectorXd abar = law.atoms.transpose() * pi;
  // grad log f_t(x) + x with f_t the mixture density
  out.value = x - (x - ou.shrink * abar) / ou.noise_var;
  return out;
}

ScoreResult score_via_conditional(const AtomLaw& law, double t,
                                  const Eigen::VectorXd& x) {
  if (!(t > 0.0)) throw std::domain_error("score_via_conditional: t > 0 required");
  const OUPoint ou = OUPoint::at(t);
  ScoreResult out;
  Eigen::VectorXd pi;
  posterior(law, ou, x, pi, out.underflow_flag);
  const Eigen::VectorXd abar = law.atoms.transpose() * pi;
  const Eigen::VectorXd ez =
      (x - ou.shrink * abar) / std::sqrt(ou.noise_var);  // E[Z | F_t = x]
  out.value = ou.shrink * (abar - ez / std::sqrt(ou.delta));
  return out;
}

McEstimate score_pnorm(const AtomLaw& law, double t, double p, int64_t m,
                       uint64_t seed) {
  if (!(t > 0.0)) throw std::domain_error("score_pnorm: t > 0 required");
  const OUPoint ou = OUPoint::at(t);
  const int d = law.dim();
  const int a = static_cast<int>(law.atoms.rows());
  Eigen::VectorXd cum(a);
  double acc = 0.0;
  for (int j = 0; j < a; ++j) {
    acc += law.weights(j);
    cum(j) = acc;
  }
  cum(a - 1) = 1.0;
  RandomStream rs(derive_seed(seed, 0x736Eu));
  const double sigma = std::sqrt(ou.noise_var);
  double sum = 0.0, sum2 = 0.0;
  Eigen::VectorXd x(d);
  for (int64_t i = 0; i < m; ++i) {
    const uint64_t base = static_cast<uint64_t>(i) * (d + 1);
    const double u0 = rs.uniform(base);
    const int j = static_cast<int>(
        std::lower_bound(cum.begin(), cum.end(), u0) - cum.begin());
    for (int c = 0; c < d; ++c)
      x(c) = ou.shrink * law.atoms(j, c) + sigma * rs.normal(base + 1 + c);
    const double v = std::pow(score_mixture(law, t, x).value.norm(), p);
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(m);
  const double mean = sum / n;
  McEstimate out;
  out.value = std::pow(mean, 1.0 / p);
  if (m > 1 && mean > 0) {
    const double var = std::max(0.0, sum2 / n - mean * mean) / (n - 1);
    out.std_error = std::sqrt(var) * std::pow(mean, 1.0 / p - 1.0) / p;
  }
  return out;
}

double score_pnorm_quadrature(const AtomLaw& law, double t, double p,
                              double tol) {
  if (law.dim() != 1)
    throw std::invalid_argument("score_pnorm_quadrature: d == 1 only");
  const OUPoint ou = OUPoint::at(t);
  const double sigma = std::sqrt(ou.noise_var);
  double total = 0.0;
  for (int j = 0; j < law.atoms.rows(); ++j) {
    const double center = ou.shrink * law.atoms(j, 0);
    auto f = [&](double z) {
      Eigen::VectorXd x(1);
      x(0) = center + sigma * z;
      const double r = std::abs(score_mixture(law, t, x).value(0));
      return law.weights(j) * normal_pdf(z) * std::pow(r, p);
    };
    auto q = integrate_adaptive(f, -10.0, 10.0, tol, 32);
    total += q.value;
  }
  return std::pow(total, 1.0 / p);
}

namespace {

// ||rho_t||_p for the law; deterministic quadrature when possible.
double inner_norm(const AtomLaw& law, double t, double p,
                  const ScoreIntegralOptions& opts) {
  const OUPoint ou = OUPoint::at(t);
  if (law.atoms.rows() == 1 && law.atoms.row(0).norm() == 0.0) {
    // point mass at 0: rho_t(F_t) = -(e^{-2t}/sigma) Z exactly
    const double c = (1.0 - ou.noise_var) / std::sqrt(ou.noise_var);
    return c * gaussian_lp_norm(p, law.dim());
  }
  if (law.dim() == 1) return score_pnorm_quadrature(law, t, p, 1e-11);
  return score_pnorm(law, t, p, opts.mc_points,
                     derive_seed(opts.seed, 0x7176u,
                                 static_cast<uint64_t>(t * 1e6)))
      .value;
}

}  // namespace

ScoreIntegral score_integral(const AtomLaw& law, double p,
                             const ScoreIntegralOptions& opts) {
  ScoreIntegral out;
  auto h = [&](double t) { return inner_norm(law, t, p, opts); };

  // t = tau^2 kills the 1/sqrt(t) small-time growth
  auto g = [&](double tau) { return 2.0 * tau * h(tau * tau); };
  auto q1 = integrate_adaptive(g, 0.0, std::sqrt(opts.t_min_split),
                               0.25 * opts.tol, 32);
  auto q2 = integrate_adaptive(h, opts.t_min_split, opts.t_max, 0.25 * opts.tol,
                               32);
  // analytic tail from the e^{-t}(||W||_p + ||Z||_p / sqrt(delta)) bound:
  // int_T^inf e^{-t} dt * ||W||_p + ||Z||_p (1 - sqrt(1 - e^{-2T}))
  const double wp = law.lp_norm(p);
  const double zp = gaussian_lp_norm(p, law.dim());
  out.tail_bound = std::exp(-opts.t_max) * wp +
                   zp * (1.0 - std::sqrt(-std::expm1(-2.0 * opts.t_max)));
  out.quad_error = q1.error + q2.error;
  out.value = q1.value + q2.value + out.tail_bound;
  out.flagged = !q1.converged || !q2.converged || out.quad_error > opts.tol;
  return out;
}

}  // namespace cltlab
