#include "cltlab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cltlab/interpolation.hpp"
#include "cltlab/rng.hpp"
#include "json.hpp"

namespace cltlab {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::string route_name(EstimatorRoute r) {
  return r == EstimatorRoute::kQuantileExact ? "quantile_exact" : "two_sample_mc";
}

}  // namespace

double lattice_reference(double ex3, double beta, double p, int64_t n_mc,
                         uint64_t seed) {
  RandomStream rs(derive_seed(seed, 0x7269u));
  double sum = 0.0;
  for (int64_t i = 0; i < n_mc; ++i) {
    const double z = rs.normal(2 * static_cast<uint64_t>(i));
    const double u = rs.uniform(2 * static_cast<uint64_t>(i) + 1) - 0.5;
    sum += std::pow(std::abs(ex3 * (z * z - 1.0) + beta * u), p);
  }
  return std::pow(sum / static_cast<double>(n_mc), 1.0 / p) / 6.0;
}

RateFit run_rate_experiment(const RateConfig& config) {
  if (config.n_grid.size() < 4)
    throw std::invalid_argument("run_rate_experiment: need >= 4 grid points");
  const DistributionSpec spec =
      config.spec.standardized() ? config.spec : standardize(config.spec);
  if (config.route == EstimatorRoute::kQuantileExact &&
      !(spec.dim() == 1 && spec.is_discrete()))
    throw std::invalid_argument(
        "run_rate_experiment: quantile_exact route requires a 1-d lattice spec");

  RateFit fit;
  for (size_t gi = 0; gi < config.n_grid.size(); ++gi) {
    const int64_t n = config.n_grid[gi];
    ExperimentRecord rec;
    rec.spec_id = spec.id();
    rec.d = spec.dim();
    rec.n = n;
    rec.p = config.p;
    rec.seed = derive_seed(config.seed, 0x6E70u, gi);
    rec.method = route_name(config.route);
    if (config.route == EstimatorRoute::kQuantileExact) {
      const Discrete1D law = convolve_power(as_discrete1d(spec), n);
      rec.wp = wp_quantile_exact(law, config.p);
    } else {
      TransportEstimate est =
          wp_two_sample(spec, n, config.p, config.m, config.reps, rec.seed);
      rec.wp = est.value;
      rec.std_error = est.std_error;
    }
    rec.sqrtn_wp = std::sqrt(static_cast<double>(n)) * rec.wp;
    rec.timestamp = now_iso8601();
    fit.records.push_back(std::move(rec));
  }

  const size_t count = fit.records.size();
  const size_t top_start = count / 2;
  double acc = 0.0;
  for (size_t i = top_start; i < count; ++i) acc += fit.records[i].sqrtn_wp;
  fit.fitted_constant = acc / static_cast<double>(count - top_start);

  std::vector<double> lx, ly;
  for (const auto& r : fit.records) {
    if (r.wp > 0.0) {
      lx.push_back(std::log(static_cast<double>(r.n)));
      ly.push_back(std::log(r.wp));
    }
  }
  if (lx.size() >= 2) fit.fitted_slope = fit_line(lx, ly).slope;

  fit.reference_constant = corollary_constant(spec, config.p);
  if (*fit.reference_constant > 1e-12)
    fit.relative_gap = std::abs(fit.fitted_constant - *fit.reference_constant) /
                       *fit.reference_constant;

  if (spec.dim() == 1 && spec.is_discrete()) {
    const Discrete1D base = as_discrete1d(spec);
    if (auto beta = lattice_spacing(base)) {
      const double ex3 = moment_tensor(spec, 3)[0];
      fit.lattice_reference_printed =
          lattice_reference(ex3, *beta, config.p, 400'000, config.seed);
      fit.lattice_reference_unscaled = 6.0 * *fit.lattice_reference_printed;
    }
  }

  if (!config.out_dir.empty())
    emit_outputs(fit.records, config.out_dir, config.emit_timestamps);
  return fit;
}

WqPolicy WqPolicy::parse(const std::string& text) {
  WqPolicy p;
  if (text == "auto") {
    p.kind = kAuto;
    return p;
  }
  if (text.rfind("bonis:", 0) == 0) {
    p.kind = kBonis;
    p.value = std::stod(text.substr(6));
    return p;
  }
  p.kind = kValue;
  p.value = std::stod(text);
  return p;
}

BoundComparison run_bound_comparison(const BoundComparisonConfig& config) {
  const DistributionSpec spec =
      config.spec.standardized() ? config.spec : standardize(config.spec);
  const double p = config.p;
  const double q = p + 1.0;
  const double r = 1.0 / (1.0 / p - 1.0 / q);
  BoundComparison out;
  const bool exact_route = spec.dim() == 1 && spec.is_discrete();

  for (size_t gi = 0; gi < config.n_grid.size(); ++gi) {
    const int64_t n = config.n_grid[gi];
    double empirical = 0.0;
    std::optional<double> emp_se;
    const uint64_t point_seed = derive_seed(config.seed, 0x6263u, gi);
    if (exact_route) {
      empirical = wp_quantile_exact(convolve_power(as_discrete1d(spec), n), p);
    } else {
      TransportEstimate est =
          wp_two_sample(spec, n, p, config.m, config.reps, point_seed);
      empirical = est.value;
      emp_se = est.std_error;
    }
    double wq_bound = 0.0;
    switch (config.wq.kind) {
      case WqPolicy::kAuto:
        wq_bound = wp_pair_bound_for_theorem(spec, n, q, config.m, config.reps,
                                             derive_seed(point_seed, 0x7771u));
        break;
      case WqPolicy::kValue:
        wq_bound = config.wq.value;
        break;
      case WqPolicy::kBonis:
        wq_bound = bonis_wq_plugin(config.wq.value, n, q);
        break;
    }
    for (double beta_sq : config.beta_sq_sweep) {
      BoundComparisonRow row;
      row.n = n;
      row.beta_sq = beta_sq;
      row.empirical_wp = empirical;
      row.empirical_se = emp_se;
      try {
        CltTerms terms = compute_terms(spec, n, p, beta_sq);
        BoundOptions opts;
        opts.c = config.c;
        opts.corollary_denominator = config.corollary_denominator;
        opts.seed = derive_seed(config.seed, 0x626Fu);
        row.report = theorem_bound(terms, q, r, wq_bound, opts);
        row.accepted = true;
        row.ratio = empirical > 0.0 ? row.report.total / empirical : 0.0;
      } catch (const CorollaryHypothesisError& e) {
        row.accepted = false;
        row.rejection = e.what();
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

std::string BoundComparison::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json j;
    j["n"] = row.n;
    j["beta_sq"] = row.beta_sq;
    j["accepted"] = row.accepted;
    if (!row.accepted) {
      j["rejection"] = row.rejection;
    } else {
      j["bound_total"] = row.report.total;
      j["epsilon"] = row.report.epsilon;
      j["term_leading"] = row.report.term_leading;
      j["term_lattice"] = row.report.term_lattice;
      j["term_mixed"] = row.report.term_mixed;
      j["term_tail"] = row.report.term_tail;
      j["ratio"] = row.ratio;
    }
    j["empirical_wp"] = row.empirical_wp;
    if (row.empirical_se) j["empirical_se"] = *row.empirical_se;
    arr.push_back(j);
  }
  return arr.dump(2);
}

// ------------------------------------------------------------------ outputs

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::ostringstream os;
  os << "spec_id,d,n,p,seed,method,wp,se,sqrtn_wp,bound_total\n";
  for (const auto& r : records) {
    os << r.spec_id << ',' << r.d << ',' << r.n << ',' << format_double(r.p)
       << ',' << r.seed << ',' << r.method << ',' << format_double(r.wp) << ','
       << (r.std_error ? format_double(*r.std_error) : "") << ','
       << format_double(r.sqrtn_wp) << ','
       << (r.bound_total ? format_double(*r.bound_total) : "") << '\n';
  }
  return os.str();
}

std::string records_to_json(const std::vector<ExperimentRecord>& records,
                            bool emit_timestamps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j;
    j["spec_id"] = r.spec_id;
    j["d"] = r.d;
    j["n"] = r.n;
    j["p"] = r.p;
    j["seed"] = r.seed;
    j["method"] = r.method;
    j["wp"] = r.wp;
    if (r.std_error) j["se"] = *r.std_error;
    j["sqrtn_wp"] = r.sqrtn_wp;
    if (r.bound_total) j["bound_total"] = *r.bound_total;
    if (emit_timestamps) j["timestamp"] = r.timestamp;
    arr.push_back(j);
  }
  return arr.dump(2);
}

void emit_outputs(const std::vector<ExperimentRecord>& records,
                  const std::string& out_dir, bool emit_timestamps) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit_outputs: cannot create " + out_dir);

  auto write = [&](const std::string& name, const std::string& content) {
    const std::string path = out_dir + "/" + name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("emit_outputs: cannot open " + path);
    f << content;
    if (!f) throw std::runtime_error("emit_outputs: write failed for " + path);
  };
  write("records.csv", records_to_csv(records));
  write("records.json", records_to_json(records, emit_timestamps));

  // two-column rate files per spec id: log2 n vs sqrt(n) W
  std::vector<std::string> ids;
  for (const auto& r : records)
    if (std::find(ids.begin(), ids.end(), r.spec_id) == ids.end())
      ids.push_back(r.spec_id);
  for (const auto& id : ids) {
    std::vector<const ExperimentRecord*> rs;
    for (const auto& r : records)
      if (r.spec_id == id) rs.push_back(&r);
    std::sort(rs.begin(), rs.end(),
              [](const ExperimentRecord* a, const ExperimentRecord* b) {
                return a->n < b->n;
              });
    std::ostringstream os;
    for (const auto* r : rs)
      os << format_double(std::log2(static_cast<double>(r->n))) << ' '
         << format_double(r->sqrtn_wp) << '\n';
    write("rate_" + id + ".dat", os.str());
  }
}

bool VerifyReport::all_pass() const {
  return std::all_of(results.begin(), results.end(),
                     [](const PropertyResult& r) { return r.pass; });
}

std::string VerifyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results)
    arr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  return nlohmann::json{{"all_pass", all_pass()}, {"properties", arr}}.dump(2);
}

}  // namespace cltlab
