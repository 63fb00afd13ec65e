// Command-line front end: moments, terms, bound, wp, rate, score-integral,
// verify.  Spec files are JSON; outputs are CSV/JSON.  Exit code 0 iff no
// property failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cltlab/harness.hpp"
#include "cltlab/interpolation.hpp"
#include "json.hpp"

namespace {

using namespace cltlab;

DistributionSpec load_spec(const std::string& path, bool force_standardize) {
  DistributionSpec spec = load_spec_file(path);
  if (force_standardize && !spec.standardized()) spec = standardize(spec);
  return spec;
}

std::vector<int64_t> parse_grid(const std::string& text) {
  std::vector<int64_t> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoll(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["dim"] = t.dim();
  j["order"] = t.order();
  j["entries"] = std::vector<double>(t.entries().begin(), t.entries().end());
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for CLT rates in Wasserstein distance"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, route = "two_sample_mc", wq_text = "auto",
              grid_text;
  double p = 2.0, beta_sq = 4.0, c_const = 1.0;
  int q_order = 2;
  int64_t n = 1024;
  int m = 2048, reps = 32;
  uint64_t seed = 1;
  bool timestamps = false;

  auto* cmd_moments = app.add_subcommand("moments", "exact moment tensor E[X^q]");
  cmd_moments->add_option("--spec", spec_path, "spec JSON file")->required();
  cmd_moments->add_option("--q", q_order, "tensor order")->required();

  auto* cmd_terms = app.add_subcommand("terms", "per-(spec, n, p, beta) quantities");
  cmd_terms->add_option("--spec", spec_path)->required();
  cmd_terms->add_option("--n", n)->required();
  cmd_terms->add_option("--p", p);
  cmd_terms->add_option("--beta-sq", beta_sq, "X-scale squared truncation radius");

  auto* cmd_bound = app.add_subcommand("bound", "evaluate the transport bound");
  cmd_bound->add_option("--spec", spec_path)->required();
  cmd_bound->add_option("--n", n)->required();
  cmd_bound->add_option("--p", p);
  cmd_bound->add_option("--beta-sq", beta_sq);
  cmd_bound->add_option("--C", c_const, "generic constant multiplier");
  cmd_bound->add_option("--wq", wq_text, "auto | <value> | bonis:<K>");
  cmd_bound->add_option("--m", m);
  cmd_bound->add_option("--reps", reps);
  cmd_bound->add_option("--seed", seed);

  auto* cmd_wp = app.add_subcommand("wp", "estimate W_p(nu_n, gamma)");
  cmd_wp->add_option("--spec", spec_path)->required();
  cmd_wp->add_option("--n", n)->required();
  cmd_wp->add_option("--p", p);
  cmd_wp->add_option("--m", m);
  cmd_wp->add_option("--reps", reps);
  cmd_wp->add_option("--seed", seed);
  cmd_wp->add_option("--route", route, "quantile | mc");

  auto* cmd_rate = app.add_subcommand("rate", "rate fit over an n grid");
  cmd_rate->add_option("--spec", spec_path)->required();
  cmd_rate->add_option("--p", p);
  cmd_rate->add_option("--n-grid", grid_text, "comma-separated n values")->required();
  cmd_rate->add_option("--route", route, "quantile | mc");
  cmd_rate->add_option("--m", m);
  cmd_rate->add_option("--reps", reps);
  cmd_rate->add_option("--seed", seed);
  cmd_rate->add_option("--out", out_dir, "output directory");
  cmd_rate->add_flag("--timestamps", timestamps, "include timestamps in JSON");

  auto* cmd_score = app.add_subcommand("score-integral",
                                       "score-integral domination of W_p");
  cmd_score->add_option("--spec", spec_path)->required();
  cmd_score->add_option("--p", p);
  cmd_score->add_option("--n", n, "summand count (law of S_n); 1 = the law itself");
  cmd_score->add_option("--seed", seed);

  auto* cmd_verify = app.add_subcommand("verify", "run the property suite");
  cmd_verify->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_moments->parsed()) {
      const auto spec = load_spec(spec_path, false);
      std::cout << tensor_to_json(moment_tensor(spec, q_order)).dump(2) << "\n";
      return 0;
    }
    if (cmd_terms->parsed()) {
      const auto spec = load_spec(spec_path, true);
      CltTerms t = compute_terms(spec, n, p, beta_sq);
      nlohmann::json j;
      j["n"] = t.n;
      j["d"] = t.d;
      j["p"] = t.p;
      j["norm_M3"] = t.norm_m3;
      j["norm_M4"] = t.norm_m4;
      j["L_p"] = t.l_p;
      j["Lprime_4"] = t.lprime_4;
      j["Lprime_p2"] = t.lprime_p2;
      j["beta_W"] = t.beta_w;
      j["beta_2"] = t.beta_2;
      j["beta_p"] = t.beta_p;
      j["L4_tail_at_0"] = t.l4_untruncated;
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (cmd_bound->parsed()) {
      const auto spec = load_spec(spec_path, true);
      const double q = p + 1.0;
      const double r = 1.0 / (1.0 / p - 1.0 / q);
      const WqPolicy wq = WqPolicy::parse(wq_text);
      double wq_bound = 0.0;
      if (wq.kind == WqPolicy::kAuto)
        wq_bound = wp_pair_bound_for_theorem(spec, n, q, m, reps, seed);
      else if (wq.kind == WqPolicy::kBonis)
        wq_bound = bonis_wq_plugin(wq.value, n, q);
      else
        wq_bound = wq.value;
      CltTerms t = compute_terms(spec, n, p, beta_sq);
      BoundOptions opts;
      opts.c = c_const;
      opts.seed = seed;
      std::cout << theorem_bound(t, q, r, wq_bound, opts).to_json() << "\n";
      return 0;
    }
    if (cmd_wp->parsed()) {
      const auto spec = load_spec(spec_path, true);
      nlohmann::json j;
      if (route == "quantile") {
        const Discrete1D law = convolve_power(as_discrete1d(spec), n);
        QuadReport rep;
        j["wp"] = wp_quantile_exact(law, p, 32, &rep);
        j["method"] = "quantile_exact";
        j["quad_error"] = rep.error_bound;
      } else {
        TransportEstimate est = wp_two_sample(spec, n, p, m, reps, seed);
        j["wp"] = est.value;
        j["se"] = est.std_error.value_or(0.0);
        j["method"] = "two_sample_mc";
        if (est.raw_m) j["raw_m"] = *est.raw_m;
        if (est.raw_2m) j["raw_2m"] = *est.raw_2m;
      }
      j["n"] = n;
      j["p"] = p;
      j["sqrtn_wp"] = std::sqrt(static_cast<double>(n)) * j["wp"].get<double>();
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (cmd_rate->parsed()) {
      RateConfig cfg{load_spec(spec_path, true),
                     p,
                     parse_grid(grid_text),
                     route == "quantile" ? EstimatorRoute::kQuantileExact
                                         : EstimatorRoute::kTwoSampleMc,
                     m,
                     reps,
                     seed,
                     out_dir,
                     timestamps};
      RateFit fit = run_rate_experiment(cfg);
      nlohmann::json j;
      j["fitted_constant"] = fit.fitted_constant;
      j["fitted_slope"] = fit.fitted_slope;
      if (fit.reference_constant) j["reference_constant"] = *fit.reference_constant;
      if (fit.relative_gap) j["relative_gap"] = *fit.relative_gap;
      if (fit.lattice_reference_printed)
        j["lattice_reference_printed"] = *fit.lattice_reference_printed;
      if (fit.lattice_reference_unscaled)
        j["lattice_reference_unscaled"] = *fit.lattice_reference_unscaled;
      j["records"] = nlohmann::json::parse(records_to_json(fit.records));
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (cmd_score->parsed()) {
      const auto spec = load_spec(spec_path, false);
      const Discrete1D law =
          n > 1 ? convolve_power(as_discrete1d(spec), n) : as_discrete1d(spec);
      ScoreIntegralOptions opts;
      opts.seed = seed;
      const ScoreIntegral si = score_integral(AtomLaw::from_discrete1d(law), p, opts);
      const double wex = wp_quantile_exact(law, p);
      nlohmann::json j;
      j["score_integral"] = si.value;
      j["tail_bound"] = si.tail_bound;
      j["quad_error"] = si.quad_error;
      j["flagged"] = si.flagged;
      j["wp_quantile_exact"] = wex;
      j["dominates"] = wex <= si.value + si.quad_error + 1e-9;
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (cmd_verify->parsed()) {
      VerifyReport rep = run_verify_suite(seed);
      std::cout << rep.to_json() << "\n";
      return rep.all_pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
