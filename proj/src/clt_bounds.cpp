#include "cltlab/clt_bounds.hpp"

#include <cmath>
#include <sstream>

#include "cltlab/rng.hpp"
#include "json.hpp"

namespace cltlab {

CltTerms compute_terms(const DistributionSpec& spec, int64_t n, double p,
                       double beta_sq_x, const TermsOptions& opts) {
  if (!spec.standardized())
    throw std::invalid_argument("compute_terms: spec must be standardized");
  if (n < 1) throw std::invalid_argument("compute_terms: n >= 1");
  if (p < 2.0) throw std::invalid_argument("compute_terms: p >= 2");
  if (!(beta_sq_x > 0.0))
    throw std::invalid_argument("compute_terms: beta_sq_x > 0");

  CltTerms t;
  t.d = spec.dim();
  t.n = n;
  t.p = p;
  const double dn = static_cast<double>(n);

  // M_q = n E[W^{xq}] = n^{1-q/2} E[X^{xq}]
  t.m3 = moment_tensor(spec, 3);
  t.m3 *= std::pow(dn, -0.5);
  t.m4 = moment_tensor(spec, 4);
  t.m4 *= 1.0 / dn;
  t.norm_m3 = hs_norm(t.m3);
  t.norm_m4 = hs_norm(t.m4);

  auto pop = std::make_shared<DifferencePopulation>(spec, p, opts.mc);

  // L_q = n E||D_W||^q = n^{1-q/2} E||D_X||^q
  t.l_p = std::pow(dn, 1.0 - 0.5 * p) * pop->total_abs_moment(p);
  const double e_d4 = pop->total_abs_moment(4.0);
  const double e_dp2 = pop->total_abs_moment(p + 2.0);
  // L'_q = n ||E[W^{x2}]||^{q/2} E||D_W||^q with ||E[W^{x2}]|| = sqrt(d)/n
  t.lprime_4 = std::pow(std::sqrt(static_cast<double>(t.d)) / dn, 2.0) * dn *
               std::pow(dn, -2.0) * e_d4;
  t.lprime_p2 = std::pow(std::sqrt(static_cast<double>(t.d)) / dn, 0.5 * (p + 2.0)) *
                dn * std::pow(dn, -0.5 * (p + 2.0)) * e_dp2;

  t.beta_w = std::sqrt(beta_sq_x / dn);

  // Lambda_beta = (n E[D_{W,beta}^{x2}])^{-1} = E[D_X D_X^T 1{<= beta_sq_x}]^{-1}
  const Eigen::MatrixXd trunc = pop->truncated_second_moment(beta_sq_x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(trunc);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig > 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())))
    throw CorollaryHypothesisError(min_eig);
  t.lambda_beta = trunc.inverse();

  // beta_q = n E||Lambda D_{W,beta}||^q = n^{1-q/2} E[||Lambda D_X||^q 1{...}]
  t.beta_2 = pop->truncated_lambda_moment(t.lambda_beta, 2.0, beta_sq_x);
  t.beta_p = std::pow(dn, 1.0 - 0.5 * p) *
             pop->truncated_lambda_moment(t.lambda_beta, p, beta_sq_x);

  // W-scale tail callables: 1{||D_W||^2 >= t} <=> 1{||D_X||^2 >= n t}
  t.l4_tail = [pop, dn](double thr) {
    return std::pow(dn, -1.0) * pop->tail_abs_moment4(dn * thr);
  };
  t.lp2_tail = [pop, dn, p](double thr) {
    return std::pow(dn, -0.5 * p) * pop->tail_abs_moment_p2(dn * thr);
  };
  t.ldprime4_tail = [pop, dn](double thr) {
    return std::pow(dn, -1.0) * pop->tail_weighted_second_moment_norm(dn * thr);
  };
  t.l4_untruncated = t.l4_tail(0.0);
  return t;
}

namespace {

double denominator(const CltTerms& t, const BoundOptions& opts) {
  const double p = t.p;
  const double head = std::sqrt(t.beta_2 + t.d);
  if (opts.corollary_denominator)
    return head + std::sqrt(p) * (std::pow(t.beta_p, 1.0 / p) +
                                  std::pow(t.l_p, 1.0 / p));
  return head + std::sqrt(p) * std::pow(t.beta_p + t.l_p, 1.0 / p);
}

double numerator(const CltTerms& t, double r, double w_q_bound, double eps) {
  return t.ldprime4_tail(eps) + t.norm_m4 + r * t.norm_m3 * w_q_bound;
}

}  // namespace

EpsilonSolve solve_epsilon(const CltTerms& terms, double q, double r,
                           double w_q_bound, const BoundOptions& opts) {
  const double p = terms.p;
  if (std::abs(1.0 / q + 1.0 / r - 1.0 / p) > 1e-12)
    throw std::invalid_argument("solve_epsilon: need 1/q + 1/r = 1/p");
  if (w_q_bound < 0.0)
    throw std::invalid_argument("solve_epsilon: W_q bound must be >= 0");
  const double den = denominator(terms, opts);
  if (!(den > 0.0)) throw std::invalid_argument("solve_epsilon: denominator <= 0");

  EpsilonSolve out;
  auto rhs = [&](double eps) {
    return p * numerator(terms, r, w_q_bound, eps) / den;
  };
  const double rhs0 = rhs(0.0);
  if (rhs0 == 0.0) {
    out.zero_numerator = true;
    return out;
  }
  const double tol = 1e-10 * (1.0 + rhs0);
  auto g = [&](double eps) { return std::pow(eps, 1.5) - rhs(eps); };
  double lo = 0.0, hi = std::pow(rhs0, 2.0 / 3.0) + 1.0;
  double glo = g(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (std::abs(gm) < tol) {
      out.epsilon = mid;
      out.residual = std::abs(gm);
      return out;
    }
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  out.epsilon = 0.5 * (lo + hi);
  out.residual = std::abs(g(out.epsilon));
  // the bracket collapsed without meeting the tolerance: the RHS tail has a
  // jump at the root (possible for finite-atom laws)
  out.at_discontinuity = out.residual >= tol;
  return out;
}

namespace {

void push(std::vector<std::pair<std::string, double>>& diag, std::string k,
          double v) {
  diag.emplace_back(std::move(k), v);
}

void guard_finite(const char* what, double v) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("theorem_bound: non-finite ") + what);
}

}  // namespace

BoundReport theorem_bound(const CltTerms& terms, double q, double r,
                          double w_q_bound, const BoundOptions& opts) {
  const double p = terms.p;
  const double d = terms.d;
  EpsilonSolve es = solve_epsilon(terms, q, r, w_q_bound, opts);
  const double eps = es.epsilon;

  BoundReport rep;
  rep.epsilon = eps;
  rep.c_used = opts.c;
  rep.w_q_input = w_q_bound;
  rep.q = q;
  rep.r = r;
  rep.epsilon_zero_flag = es.zero_numerator;

  HermitePNorm m3h2 = contracted_hermite_pnorm(terms.m3, 2, p, opts.hermite_mc,
                                               derive_seed(opts.seed, 0x6833u));
  const double m3h2_p = m3h2.exact.value_or(m3h2.value);
  rep.term_leading = m3h2_p / 6.0;

  rep.term_lattice = opts.c * std::sqrt(d * p) * terms.beta_w;

  const double den = denominator(terms, opts);
  const double num = numerator(terms, r, w_q_bound, eps);
  rep.term_mixed = std::pow(p, 7.0 / 6.0) * std::pow(num, 2.0 / 3.0) *
                   std::pow(den, 1.0 / 3.0);

  const double l4e = terms.l4_tail(eps);
  const double lp2e = terms.lp2_tail(eps);
  const double abs_log_eps = es.zero_numerator ? 0.0 : std::abs(std::log(eps));
  rep.term_tail =
      opts.c * (p * std::sqrt(l4e) +
                std::pow(p, 1.0 + 1.0 / p) * std::pow(lp2e, 1.0 / p) +
                abs_log_eps * std::pow(p, 1.5) *
                    (std::sqrt(terms.lprime_4) +
                     std::pow(p * p * terms.lprime_p2, 1.0 / p)));

  guard_finite("term_leading", rep.term_leading);
  guard_finite("term_lattice", rep.term_lattice);
  guard_finite("term_mixed", rep.term_mixed);
  guard_finite("term_tail", rep.term_tail);
  rep.total = rep.term_leading + rep.term_lattice + rep.term_mixed + rep.term_tail;

  auto& dg = rep.diagnostics;
  push(dg, "n", static_cast<double>(terms.n));
  push(dg, "d", d);
  push(dg, "p", p);
  push(dg, "norm_M3", terms.norm_m3);
  push(dg, "norm_M4", terms.norm_m4);
  push(dg, "L_p", terms.l_p);
  push(dg, "beta_2", terms.beta_2);
  push(dg, "beta_p", terms.beta_p);
  push(dg, "beta_W", terms.beta_w);
  push(dg, "Lprime_4", terms.lprime_4);
  push(dg, "Lprime_p2", terms.lprime_p2);
  push(dg, "L4_tail_eps", l4e);
  push(dg, "Lp2_tail_eps", lp2e);
  push(dg, "Ldprime4_tail_eps", terms.ldprime4_tail(eps));
  push(dg, "denominator", den);
  push(dg, "numerator_eps", num);
  push(dg, "M3H2_pnorm", m3h2_p);
  push(dg, "M3H2_std_error", m3h2.std_error);
  push(dg, "epsilon_residual", es.residual);
  push(dg, "epsilon_at_discontinuity", es.at_discontinuity ? 1.0 : 0.0);
  push(dg, "abs_log_epsilon", abs_log_eps);
  // the corollary statement's normalization C sqrt(d beta / n) = C sqrt(d) beta_W
  push(dg, "lattice_term_corollary_form", opts.c * std::sqrt(d) * terms.beta_w);
  return rep;
}

std::string BoundReport::to_json() const {
  nlohmann::json j;
  j["epsilon"] = epsilon;
  j["term_leading"] = term_leading;
  j["term_lattice"] = term_lattice;
  j["term_mixed"] = term_mixed;
  j["term_tail"] = term_tail;
  j["total"] = total;
  j["inputs"] = {{"C", c_used}, {"W_q", w_q_input}, {"q", q}, {"r", r}};
  j["epsilon_zero_flag"] = epsilon_zero_flag;
  nlohmann::json diag = nlohmann::json::object();
  for (const auto& [k, v] : diagnostics) diag[k] = v;
  j["diagnostics"] = diag;
  return j.dump(2);
}

double corollary_constant(const DistributionSpec& spec, double p, int64_t n_mc,
                          uint64_t seed) {
  if (!spec.standardized())
    throw std::invalid_argument("corollary_constant: spec must be standardized");
  const Tensor ex3 = moment_tensor(spec, 3);
  HermitePNorm res = contracted_hermite_pnorm(ex3, 2, p, n_mc, seed);
  return res.exact.value_or(res.value) / 6.0;
}

double bonis_wq_plugin(double k_const, int64_t n, double q) {
  return k_const * std::pow(static_cast<double>(n), 1.0 / (2.0 * q) - 0.5);
}

double psi1(double t, const CltTerms& terms, double c) {
  if (!(t > 0.0)) throw std::domain_error("psi1: t > 0 required");
  const double p = terms.p;
  const double d = terms.d;
  return c * (std::sqrt(d * p) * (1.0 + 1.0 / std::sqrt(ou_delta(t))) +
              p * std::pow(terms.l_p, 1.0 / p));
}

double psi2(double t, const CltTerms& terms, double c) {
  if (!(t > 0.0)) throw std::domain_error("psi2: t > 0 required");
  const double p = terms.p;
  const double d = terms.d;
  const double eta = eta_p(t, p);
  if (eta < terms.beta_w * terms.beta_w)
    throw std::domain_error("psi2: requires eta_p(t) >= beta_W^2");
  return c * (std::sqrt(p * (terms.beta_2 + d)) +
              p * std::pow(terms.beta_p + terms.l_p, 1.0 / p) +
              std::sqrt(d * p) * terms.beta_w * terms.beta_w /
                  std::pow(ou_delta(t), 1.5));
}

double psi3(double t, const CltTerms& terms, double q, double r,
            double w_q_bound, double c) {
  if (!(t > 0.0)) throw std::domain_error("psi3: t > 0 required");
  const double p = terms.p;
  if (!(q > p && q <= p + 2.0))
    throw std::domain_error("psi3: requires p < q <= p + 2");
  const double eta = eta_p(t, p);
  HermitePNorm m3h2 = contracted_hermite_pnorm(terms.m3, 2, p, 50'000, 12345);
  const double m3h2_p = m3h2.exact.value_or(m3h2.value);
  const double lead = 0.5 * std::exp(-3.0 * t) * m3h2_p;
  const double transport = c * r * terms.norm_m3 * w_q_bound / std::pow(eta, 1.5);
  const double tails =
      c * (std::sqrt(p * terms.l4_tail(eta) / eta) +
           p * std::pow(terms.lp2_tail(eta) / eta, 1.0 / p) +
           std::sqrt(p * terms.lprime_4) / eta +
           p * std::pow(terms.lprime_p2, 1.0 / p) /
               std::pow(eta, 0.5 + 2.0 / p));
  const double moments =
      c * (terms.ldprime4_tail(eta) + terms.norm_m4) / std::pow(eta, 1.5);
  return lead + transport + tails + moments;
}

}  // namespace cltlab
