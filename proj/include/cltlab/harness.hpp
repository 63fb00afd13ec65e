#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cltlab/clt_bounds.hpp"
#include "cltlab/distributions.hpp"
#include "cltlab/wasserstein.hpp"

namespace cltlab {

struct ExperimentRecord {
  std::string spec_id;
  int d = 1;
  int64_t n = 1;
  double p = 2.0;
  uint64_t seed = 0;
  std::string method;
  double wp = 0.0;
  std::optional<double> std_error;
  double sqrtn_wp = 0.0;  // sqrt(n) * wp
  std::optional<double> bound_total;
  std::string timestamp;  // excluded from deterministic outputs
};

struct RateFit {
  std::vector<ExperimentRecord> records;
  double fitted_constant = 0.0;  // mean of sqrt(n) W over the top half of the grid
  double fitted_slope = 0.0;     // log-log slope of W vs n
  std::optional<double> reference_constant;  // corollary constant
  std::optional<double> relative_gap;
  // lattice references (1-d lattice sources): the asymptotic expression as
  // printed, and the same expression without the 1/6 factor
  std::optional<double> lattice_reference_printed;
  std::optional<double> lattice_reference_unscaled;
};

enum class EstimatorRoute { kQuantileExact, kTwoSampleMc };

struct RateConfig {
  DistributionSpec spec;
  double p = 2.0;
  std::vector<int64_t> n_grid;
  EstimatorRoute route = EstimatorRoute::kTwoSampleMc;
  int m = 2048;
  int reps = 32;
  uint64_t seed = 1;
  std::string out_dir;       // empty: no files
  bool emit_timestamps = false;
};

RateFit run_rate_experiment(const RateConfig& config);

struct WqPolicy {
  enum Kind { kAuto, kValue, kBonis } kind = kAuto;
  double value = 0.0;  // fixed W_q or the Bonis K constant
  static WqPolicy parse(const std::string& text);  // "auto" | number | "bonis:K"
};

struct BoundComparisonConfig {
  DistributionSpec spec;
  double p = 2.0;
  std::vector<int64_t> n_grid;
  std::vector<double> beta_sq_sweep;  // X-scale squared truncation radii
  double c = 1.0;
  WqPolicy wq;
  int m = 1024;
  int reps = 16;
  uint64_t seed = 1;
  bool corollary_denominator = false;
};

struct BoundComparisonRow {
  int64_t n = 0;
  double beta_sq = 0.0;
  bool accepted = false;
  std::string rejection;  // corollary-hypothesis failure message when rejected
  double empirical_wp = 0.0;
  std::optional<double> empirical_se;
  BoundReport report;
  double ratio = 0.0;  // bound total / empirical
};

struct BoundComparison {
  std::vector<BoundComparisonRow> rows;
  std::string to_json() const;
};

BoundComparison run_bound_comparison(const BoundComparisonConfig& config);

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> results;
  bool all_pass() const;
  std::string to_json() const;
};

// Executes the spec'd module invariants plus the Rosenthal ratio check.
VerifyReport run_verify_suite(uint64_t seed);

// CSV (fixed header, shortest round-trip doubles), JSON mirror and
// gnuplot-friendly (log2 n, sqrt(n) W) rate files.
void emit_outputs(const std::vector<ExperimentRecord>& records,
                  const std::string& out_dir, bool emit_timestamps = false);
std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::string records_to_json(const std::vector<ExperimentRecord>& records,
                            bool emit_timestamps = false);

std::string format_double(double v);  // shortest round-trip representation

// Rio-style lattice reference (1/6)||E[X^3](Z^2-1) + beta U||_p by MC.
double lattice_reference(double ex3, double beta, double p, int64_t n_mc,
                         uint64_t seed);

}  // namespace cltlab
