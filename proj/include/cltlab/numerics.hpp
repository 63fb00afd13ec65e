#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace cltlab {

inline constexpr double kPi = 3.14159265358979323846;

double normal_quantile(double p);          // Phi^{-1}, Wichura AS241
double normal_cdf(double z);
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

// E[||Z||^p]^{1/p} for Z standard normal in R^d (chi moments via lgamma).
double gaussian_lp_norm(double p, int d);

// Gauss-Legendre nodes/weights on [-1,1]; cached per order.
const std::vector<std::pair<double, double>>& gauss_legendre(int order);

struct QuadResult {
  double value = 0.0;
  double error = 0.0;   // accumulated local error estimates
  bool converged = true;
};

// Adaptive panel integration: GL(order) per panel, split until the
// |whole - (left+right)| estimate is below tol (absolute).
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double tol, int order = 32,
                              int max_depth = 32);

double log_sum_exp(std::span<const double> v);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(std::span<const double> v);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact computations
};

}  // namespace cltlab
