#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cltlab/distributions.hpp"
#include "cltlab/multilinear.hpp"

namespace cltlab {

// Delta(t) = e^{2t} - 1 and the adopted tail resolution eta_p(t) = Delta(t)/(p-1).
inline double ou_delta(double t) { return std::expm1(2.0 * t); }
inline double eta_p(double t, double p) { return ou_delta(t) / (p - 1.0); }

struct CorollaryHypothesisError : std::runtime_error {
  double smallest_eigenvalue;
  explicit CorollaryHypothesisError(double eig)
      : std::runtime_error(
            "corollary hypothesis violated: truncated difference second moment "
            "is not positive-definite (smallest eigenvalue " +
            std::to_string(eig) + ")"),
        smallest_eigenvalue(eig) {}
};

// All sum-form quantities for W_i = X_i / sqrt(n): every sum over i is
// n * (per-summand value on the W scale).  Tail callables take the W-scale
// squared threshold.
struct CltTerms {
  int d = 1;
  int64_t n = 1;
  double p = 2.0;

  Tensor m3, m4;                // n E[W^{x3}], n E[W^{x4}]
  double norm_m3 = 0.0, norm_m4 = 0.0;
  double l_p = 0.0;             // n E||D||^p
  double lprime_4 = 0.0, lprime_p2 = 0.0;
  double beta_w = 0.0;          // truncation radius on the W scale
  Eigen::MatrixXd lambda_beta;  // (n E[D_beta^{x2}])^{-1}
  double beta_2 = 0.0, beta_p = 0.0;

  std::function<double(double)> l4_tail;        // n E[||D||^4 1{||D||^2 >= t}]
  std::function<double(double)> lp2_tail;       // same with power p+2
  std::function<double(double)> ldprime4_tail;  // n ||E[W^{x2}||D||^2 1{...}]||

  double l4_untruncated = 0.0;  // l4_tail(0)
};

struct TermsOptions {
  McOptions mc;  // used only when the spec needs Monte Carlo difference moments
};

CltTerms compute_terms(const DistributionSpec& spec, int64_t n, double p,
                       double beta_sq_x, const TermsOptions& opts = {});

struct EpsilonSolve {
  double epsilon = 0.0;
  double residual = 0.0;        // |eps^{3/2} - RHS(eps)|
  bool zero_numerator = false;  // numerator identically zero -> eps = 0
  bool at_discontinuity = false;  // root pinched at a tail jump (lattice laws)
};

struct BoundOptions {
  double c = 1.0;
  int64_t hermite_mc = 200'000;
  uint64_t seed = 99;
  // corollary-proof denominator variant beta_p^{1/p} + L_p^{1/p}
  bool corollary_denominator = false;
};

// Solves eps^{3/2} = p (L''_4(eps) + ||M_4|| + r ||M_3|| W_q) / den by
// bisection; RHS nonincreasing in eps, so the root is unique.
EpsilonSolve solve_epsilon(const CltTerms& terms, double q, double r,
                           double w_q_bound,
                           const BoundOptions& opts = {});

struct BoundReport {
  double epsilon = 0.0;
  double term_leading = 0.0;
  double term_lattice = 0.0;
  double term_mixed = 0.0;
  double term_tail = 0.0;
  double total = 0.0;
  double c_used = 1.0;
  double w_q_input = 0.0;
  double q = 0.0, r = 0.0;
  bool epsilon_zero_flag = false;
  std::vector<std::pair<std::string, double>> diagnostics;

  std::string to_json() const;
};

BoundReport theorem_bound(const CltTerms& terms, double q, double r,
                          double w_q_bound, const BoundOptions& opts = {});

// (1/6) ||E[X^{x3}] H_2(Z)||_p: the n->inf limit of sqrt(n) * term_leading.
double corollary_constant(const DistributionSpec& spec, double p,
                          int64_t n_mc = 1'000'000, uint64_t seed = 7);

// W_q plug-in following the finite-moment transport bound: K n^{1/(2q) - 1/2}.
double bonis_wq_plugin(double k_const, int64_t n, double q);

// The three regime bounds on ||rho_t||_p (C parameterized, default 1).
double psi1(double t, const CltTerms& terms, double c = 1.0);
double psi2(double t, const CltTerms& terms, double c = 1.0);
double psi3(double t, const CltTerms& terms, double q, double r,
            double w_q_bound, double c = 1.0);

}  // namespace cltlab
