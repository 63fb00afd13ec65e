#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "cltlab/distributions.hpp"

namespace cltlab {

struct QuadReport {
  double error_bound = 0.0;
  bool converged = true;
};

// W_p(law, gamma) through the 1-d quantile coupling, integrated exactly in
// z-space: sum_j int_{z_{j-1}}^{z_j} |a_j - z|^p phi(z) dz with adaptive
// Gauss-Legendre per cell (kink split at a_j, clamped far tails).
double wp_quantile_exact(const Discrete1D& law, double p, int quad_order = 32,
                         QuadReport* report = nullptr);

// Exact linear assignment between equal-size clouds (shortest augmenting
// path with potentials); returns (min_sigma (1/m) sum ||x_i - y_sigma(i)||^p)^{1/p}.
// 1-d inputs take the sorted-coupling fast path, which is the exact optimum.
double wp_assignment(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     double p);
// Always runs the general solver (used to cross-check the 1-d fast path).
double wp_assignment_general(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                             double p);

enum class TransportMethod { kQuantileExact, kAssignment, kTwoSampleMc };

struct TransportEstimate {
  double value = 0.0;
  std::optional<double> std_error;  // present iff the method is stochastic
  TransportMethod method = TransportMethod::kTwoSampleMc;
  int m = 0;
  int reps = 0;
  // m-doubling bias diagnostic: raw (uncorrected) estimates at m and 2m
  std::optional<double> raw_m, raw_2m;
};

// Monte Carlo estimate of W_p(nu_n, gamma) from coupled clouds of S_n draws
// and standard-Gaussian points.  Each rep draws a 2m-point pair (plus its
// antithetic twin); the raw empirical estimates at m and 2m are emitted, and
// `value` carries the finite-m bias correction (rank-aligned for smooth 1-d
// laws, m-doubling extrapolation otherwise).
TransportEstimate wp_two_sample(const DistributionSpec& spec, int64_t n,
                                double p, int m, int reps, uint64_t seed);

// Plug-in upper value for W_q(nu, gamma) in Theorem-style bounds: two-sample
// estimate plus two standard errors.
double wp_pair_bound_for_theorem(const DistributionSpec& spec, int64_t n,
                                 double q, int m, int reps, uint64_t seed);

}  // namespace cltlab
