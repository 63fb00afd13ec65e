#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cltlab/distributions.hpp"

namespace cltlab {

// One time point of the Ornstein-Uhlenbeck interpolation
// F_t = e^{-t} W + sqrt(1 - e^{-2t}) Z.
struct OUPoint {
  double t = 0.0;
  double delta = 0.0;      // e^{2t} - 1
  double shrink = 1.0;     // e^{-t}
  double noise_var = 0.0;  // 1 - e^{-2t}
  static OUPoint at(double t);
};

// Finite-atom law of W in R^d (covers lattice S_n via convolve_power and
// small-support product laws).
struct AtomLaw {
  Eigen::MatrixXd atoms;    // A x d
  Eigen::VectorXd weights;  // sum to 1

  static AtomLaw from_discrete1d(const Discrete1D& law);
  static AtomLaw from_spec(const DistributionSpec& spec);
  int dim() const { return static_cast<int>(atoms.cols()); }
  double lp_norm(double p) const;  // ||W||_p
};

// Draws of F_t with W = S_n built from spec.
Eigen::MatrixXd ft_sample(const DistributionSpec& spec, int64_t n, double t,
                          int64_t m, uint64_t seed);

struct ScoreResult {
  Eigen::VectorXd value;
  bool underflow_flag = false;  // x beyond ~40 sigma of every atom image
};

// Score of F_t relative to gamma via the mixture density:
// rho_t(x) = x + grad log f_t(x), f_t the Gaussian mixture of atom images.
ScoreResult score_mixture(const AtomLaw& law, double t, const Eigen::VectorXd& x);

// Same score via the conditional-expectation form
// rho_t = e^{-t} (E[W | F_t=x] - E[Z | F_t=x] / sqrt(delta)).
ScoreResult score_via_conditional(const AtomLaw& law, double t,
                                  const Eigen::VectorXd& x);

// MC estimate of E[||rho_t(F_t)||^p]^{1/p} with F_t drawn from the mixture.
McEstimate score_pnorm(const AtomLaw& law, double t, double p, int64_t m,
                       uint64_t seed);

// Deterministic per-atom z-quadrature of the same norm (d == 1 only).
double score_pnorm_quadrature(const AtomLaw& law, double t, double p,
                              double tol = 1e-10);

struct ScoreIntegral {
  double value = 0.0;       // quadrature over (0, T_max] plus analytic tail
  double tail_bound = 0.0;  // the analytic bound added for (T_max, inf)
  double quad_error = 0.0;
  bool flagged = false;     // error budget exceeded the requested tolerance
};

struct ScoreIntegralOptions {
  double t_min_split = 0.1;
  double t_max = 20.0;
  double tol = 1e-7;
  int64_t mc_points = 200'000;  // inner MC size when d >= 2 with several atoms
  uint64_t seed = 1;
};

// int_0^inf ||rho_t||_p dt, dominating W_p(law, gamma): substitution t = tau^2
// on (0, t_min_split], adaptive panels on [t_min_split, T_max], analytic
// e^{-t}(||W||_p + ||Z||_p / sqrt(delta)) bound beyond T_max.
ScoreIntegral score_integral(const AtomLaw& law, double p,
                             const ScoreIntegralOptions& opts = {});

}  // namespace cltlab
