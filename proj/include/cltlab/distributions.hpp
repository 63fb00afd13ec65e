#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cltlab/multilinear.hpp"
#include "cltlab/numerics.hpp"
#include "cltlab/rng.hpp"

namespace cltlab {

// Exact 1-d discrete law (used for laws of S_n on lattice sources).
struct Discrete1D {
  std::vector<double> atoms;    // strictly increasing
  std::vector<double> weights;  // sum to 1 within 1e-12

  void validate() const;
  double mean() const;
  double variance() const;
};

enum class Marginal1D { kRademacher, kStdExponential, kUniformPm, kTwoPoint };

struct DiscreteFamily {
  std::vector<std::vector<double>> atoms;  // each of length dim
  std::vector<double> weights;
};

struct GaussianMixtureFamily {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<double> weights;
};

struct Product1DFamily {
  Marginal1D marginal;
  double a = 0.0, b = 0.0, w = 0.5;  // two_point parameters only
  int copies = 1;
};

struct PointMassFamily {
  std::vector<double> location;
};

// Declarative source law nu.  Immutable after construction.
class DistributionSpec {
 public:
  using Family = std::variant<DiscreteFamily, GaussianMixtureFamily,
                              Product1DFamily, PointMassFamily>;

  DistributionSpec(int dim, Family family, bool standardized,
                   std::string id = {});

  static DistributionSpec discrete(std::vector<std::vector<double>> atoms,
                                   std::vector<double> weights);
  static DistributionSpec discrete1d(std::vector<double> atoms,
                                     std::vector<double> weights);
  static DistributionSpec gaussian_mixture(std::vector<Eigen::VectorXd> means,
                                           std::vector<Eigen::MatrixXd> covs,
                                           std::vector<double> weights);
  static DistributionSpec product(Marginal1D marginal, int copies);
  static DistributionSpec two_point_product(double a, double b, double w,
                                            int copies);
  static DistributionSpec point_mass(std::vector<double> location);

  int dim() const { return dim_; }
  bool standardized() const { return standardized_; }
  const Family& family() const { return family_; }
  const std::string& id() const { return id_; }

  bool is_discrete() const;  // finite-atom (discrete / lattice product / point mass)
  bool is_continuous_1d() const;

  DistributionSpec with_standardized_flag() const;

 private:
  int dim_;
  Family family_;
  bool standardized_;
  std::string id_;
};

// ---- exact first/second moments ----
Eigen::VectorXd mean_of(const DistributionSpec& spec);
Eigen::MatrixXd covariance_of(const DistributionSpec& spec);

// Whitening with the symmetric (spectral) square root.  Throws
// SingularCovarianceError when the covariance is not positive-definite.
struct SingularCovarianceError : std::runtime_error {
  double smallest_eigenvalue;
  explicit SingularCovarianceError(double eig);
};
DistributionSpec standardize(const DistributionSpec& spec);

// ---- sampling ----
// i.i.d. draws (m x d, row per draw); deterministic given seed and
// independent of how callers partition work.
Eigen::MatrixXd sample(const DistributionSpec& spec, int64_t m, uint64_t seed);

// Number of counter positions consumed per draw (fixed per family).
int uniforms_per_draw(const DistributionSpec& spec);
// One draw addressed by index; when `gauss_twin` is non-null it receives a
// standard-normal vector built from the same uniforms (maximal per-summand
// coupling for the two-sample estimator).
void draw_at(const DistributionSpec& spec, const RandomStream& rs,
             uint64_t index, bool antithetic, double* x_out,
             double* gauss_twin);

// Reusable sampling plan (cumulative weights, Cholesky factors) for
// index-addressed draws; cheap to call per summand.
class CoupledSampler {
 public:
  explicit CoupledSampler(const DistributionSpec& spec);
  ~CoupledSampler();
  CoupledSampler(const CoupledSampler&) = delete;
  CoupledSampler& operator=(const CoupledSampler&) = delete;

  int stride() const;
  void draw(const RandomStream& rs, uint64_t index, bool antithetic,
            double* x, double* twin) const;
  // plain draw and its antithetic twin from one read of the uniforms
  void draw_pair(const RandomStream& rs, uint64_t index, double* x,
                 double* twin, double* x_anti, double* twin_anti) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- moments ----
// Exact E[X^{otimes q}] (atom enumeration / closed-form marginal moments /
// Gaussian moment recursion).
Tensor moment_tensor(const DistributionSpec& spec, int q);

// Raw moments m_0..m_q of a named marginal (exact).
std::vector<double> marginal_raw_moments(const Product1DFamily& fam, int q);

// ---- difference moments (D = X' - X, X' an i.i.d. copy) ----
enum class TailSide { kAbove, kBelow };  // above: ||D||^2 >= t, below: < t

struct McOptions {
  int64_t draws = 1'000'000;
  uint64_t seed = 20240601;
};

// E[||D||^q 1{...}] on the X scale; exact by atom-pair enumeration for
// finite-atom specs, Monte Carlo otherwise (std_error reported).
McEstimate difference_abs_moment(const DistributionSpec& spec, double q,
                                 std::optional<double> threshold_sq,
                                 TailSide side, const McOptions& mc = {});

// E[D D^T 1{||D||^2 <= beta_sq}] * scale^2.
Eigen::MatrixXd difference_second_moment(const DistributionSpec& spec,
                                         double beta_sq, double scale = 1.0,
                                         const McOptions& mc = {});

// Precomputed population of (X, X') difference statistics with prefix sums,
// so truncated tail functionals are O(log) per query.  Exact weights for
// finite-atom specs; 1/N weights for Monte Carlo populations.
class DifferencePopulation {
 public:
  DifferencePopulation(const DistributionSpec& spec, double p,
                       const McOptions& mc = {});

  // sum of w * ||d||^q over ||d||^2 >= t for q in {4, p+2}, and the matrix
  // sum of w * x x^T ||d||^2 over ||d||^2 >= t (HS norm returned).
  double tail_abs_moment4(double t) const;
  double tail_abs_moment_p2(double t) const;
  double tail_weighted_second_moment_norm(double t) const;

  double total_abs_moment(double q) const;  // E||D||^q, exact from population
  // E[||Lambda d||^q 1{||d||^2 <= beta_sq}]
  double truncated_lambda_moment(const Eigen::MatrixXd& lambda, double q,
                                 double beta_sq) const;
  Eigen::MatrixXd truncated_second_moment(double beta_sq) const;

  bool exact() const { return exact_; }

 private:
  struct Entry {
    double w;
    double d2;  // ||d||^2
    Eigen::VectorXd d;
    Eigen::VectorXd x;
  };
  std::vector<Entry> entries_;  // sorted by d2 ascending
  std::vector<double> suffix4_, suffix_p2_;
  std::vector<Eigen::MatrixXd> suffix_xxd2_;
  double p_;
  bool exact_;
  size_t first_index_geq(double t) const;
};

// ---- exact law of S_n for 1-d discrete sources ----
struct AtomExplosionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Exact distribution of (X_1 + ... + X_n)/sqrt(n); atoms closer than
// merge_eps (on the unscaled sum) are merged.
Discrete1D convolve_power(const Discrete1D& law, int64_t n,
                          double merge_eps = 1e-12);
Discrete1D as_discrete1d(const DistributionSpec& spec);

// Lattice spacing beta when the law lives on an arithmetic progression.
std::optional<double> lattice_spacing(const Discrete1D& law, double tol = 1e-9);

// ---- JSON spec files ----
struct SpecParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
DistributionSpec spec_from_json_text(const std::string& text,
                                     const std::string& origin = "<inline>");
DistributionSpec load_spec_file(const std::string& path);
std::string spec_to_json_text(const DistributionSpec& spec);

}  // namespace cltlab
