#include "cltlab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cltlab/rng.hpp"
#include "json.hpp"

namespace cltlab {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr size_t kAtomExpansionCap = 4096;
constexpr size_t kConvolutionAtomCap = 10'000'000;

double inv_cdf_marginal(const Product1DFamily& fam, double u) {
  switch (fam.marginal) {
    case Marginal1D::kRademacher:
      return u < 0.5 ? -1.0 : 1.0;
    case Marginal1D::kStdExponential:
      return -std::log1p(-u) - 1.0;
    case Marginal1D::kUniformPm:
      return std::sqrt(3.0) * (2.0 * u - 1.0);
    case Marginal1D::kTwoPoint:
      return u < fam.w ? fam.a : fam.b;
  }
  return 0.0;
}

const char* marginal_name(Marginal1D m) {
  switch (m) {
    case Marginal1D::kRademacher: return "rademacher";
    case Marginal1D::kStdExponential: return "standardized_exponential";
    case Marginal1D::kUniformPm: return "uniform_pm";
    case Marginal1D::kTwoPoint: return "two_point";
  }
  return "?";
}

void check_weights(const std::vector<double>& w, const std::string& what) {
  if (w.empty()) throw std::invalid_argument(what + ": empty weights");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument(what + ": negative weight");
    s += x;
  }
  if (std::abs(s - 1.0) > kWeightTol)
    throw std::invalid_argument(what + ": weights sum to " + std::to_string(s));
}

}  // namespace

// ---------------------------------------------------------------- Discrete1D

void Discrete1D::validate() const {
  if (atoms.size() != weights.size() || atoms.empty())
    throw std::invalid_argument("Discrete1D: atoms/weights size mismatch");
  for (size_t i = 1; i < atoms.size(); ++i)
    if (!(atoms[i] > atoms[i - 1]))
      throw std::invalid_argument("Discrete1D: atoms must be strictly increasing");
  check_weights(weights, "Discrete1D");
}

double Discrete1D::mean() const {
  long double s = 0.0L;
  for (size_t i = 0; i < atoms.size(); ++i)
    s += static_cast<long double>(weights[i]) * atoms[i];
  return static_cast<double>(s);
}

double Discrete1D::variance() const {
  const long double mu = mean();
  long double s = 0.0L;
  for (size_t i = 0; i < atoms.size(); ++i) {
    long double c = atoms[i] - mu;
    s += static_cast<long double>(weights[i]) * c * c;
  }
  return static_cast<double>(s);
}

// ---------------------------------------------------------- DistributionSpec

DistributionSpec::DistributionSpec(int dim, Family family, bool standardized,
                                   std::string id)
    : dim_(dim), family_(std::move(family)), standardized_(standardized),
      id_(std::move(id)) {
  if (dim_ < 1 || dim_ > Tensor::kMaxDim)
    throw std::invalid_argument("DistributionSpec: dim out of range");
  if (const auto* d = std::get_if<DiscreteFamily>(&family_)) {
    check_weights(d->weights, "discrete spec");
    if (d->atoms.size() != d->weights.size())
      throw std::invalid_argument("discrete spec: atoms/weights size mismatch");
    for (const auto& a : d->atoms)
      if (static_cast<int>(a.size()) != dim_)
        throw std::invalid_argument("discrete spec: atom dimension mismatch");
  } else if (const auto* g = std::get_if<GaussianMixtureFamily>(&family_)) {
    check_weights(g->weights, "gaussian_mixture spec");
    if (g->means.size() != g->weights.size() ||
        g->covariances.size() != g->weights.size())
      throw std::invalid_argument("gaussian_mixture spec: component count mismatch");
    for (size_t i = 0; i < g->means.size(); ++i)
      if (g->means[i].size() != dim_ || g->covariances[i].rows() != dim_ ||
          g->covariances[i].cols() != dim_)
        throw std::invalid_argument("gaussian_mixture spec: component dimension mismatch");
  } else if (const auto* p = std::get_if<Product1DFamily>(&family_)) {
    if (p->copies != dim_)
      throw std::invalid_argument("product_1d spec: copies != dim");
    if (p->marginal == Marginal1D::kTwoPoint && !(p->w > 0.0 && p->w < 1.0))
      throw std::invalid_argument("two_point spec: w must be in (0,1)");
  } else if (const auto* pm = std::get_if<PointMassFamily>(&family_)) {
    if (static_cast<int>(pm->location.size()) != dim_)
      throw std::invalid_argument("point_mass spec: location dimension mismatch");
  }
  if (id_.empty()) {
    std::ostringstream os;
    if (std::holds_alternative<DiscreteFamily>(family_))
      os << "discrete-d" << dim_;
    else if (std::holds_alternative<GaussianMixtureFamily>(family_))
      os << "gaussmix-d" << dim_;
    else if (const auto* pr = std::get_if<Product1DFamily>(&family_))
      os << marginal_name(pr->marginal) << "-d" << dim_;
    else
      os << "pointmass-d" << dim_;
    id_ = os.str();
  }
}

DistributionSpec DistributionSpec::discrete(
    std::vector<std::vector<double>> atoms, std::vector<double> weights) {
  const int d = atoms.empty() ? 1 : static_cast<int>(atoms.front().size());
  return DistributionSpec(d, DiscreteFamily{std::move(atoms), std::move(weights)},
                          false);
}

DistributionSpec DistributionSpec::discrete1d(std::vector<double> atoms,
                                              std::vector<double> weights) {
  std::vector<std::vector<double>> a;
  a.reserve(atoms.size());
  for (double x : atoms) a.push_back({x});
  return discrete(std::move(a), std::move(weights));
}

DistributionSpec DistributionSpec::gaussian_mixture(
    std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> covs,
    std::vector<double> weights) {
  const int d = means.empty() ? 1 : static_cast<int>(means.front().size());
  return DistributionSpec(
      d, GaussianMixtureFamily{std::move(means), std::move(covs), std::move(weights)},
      false);
}

DistributionSpec DistributionSpec::product(Marginal1D marginal, int copies) {
  const bool std_marginal = marginal != Marginal1D::kTwoPoint;
  return DistributionSpec(copies, Product1DFamily{marginal, 0, 0, 0.5, copies},
                          std_marginal);
}

DistributionSpec DistributionSpec::two_point_product(double a, double b,
                                                     double w, int copies) {
  return DistributionSpec(copies,
                          Product1DFamily{Marginal1D::kTwoPoint, a, b, w, copies},
                          false);
}

DistributionSpec DistributionSpec::point_mass(std::vector<double> location) {
  const int d = static_cast<int>(location.size());
  return DistributionSpec(d, PointMassFamily{std::move(location)}, false);
}

DistributionSpec DistributionSpec::with_standardized_flag() const {
  DistributionSpec copy = *this;
  copy.standardized_ = true;
  return copy;
}

bool DistributionSpec::is_discrete() const {
  if (std::holds_alternative<DiscreteFamily>(family_) ||
      std::holds_alternative<PointMassFamily>(family_))
    return true;
  if (const auto* p = std::get_if<Product1DFamily>(&family_))
    return p->marginal == Marginal1D::kRademacher ||
           p->marginal == Marginal1D::kTwoPoint;
  return false;
}

bool DistributionSpec::is_continuous_1d() const {
  return dim_ == 1 && !is_discrete();
}

// ------------------------------------------------------------ atom expansion

namespace {

struct AtomExpansion {
  Eigen::MatrixXd atoms;  // A x d
  Eigen::VectorXd weights;
};

std::optional<AtomExpansion> expand_atoms(const DistributionSpec& spec) {
  const int d = spec.dim();
  if (const auto* df = std::get_if<DiscreteFamily>(&spec.family())) {
    AtomExpansion e;
    e.atoms.resize(static_cast<int>(df->atoms.size()), d);
    e.weights.resize(static_cast<int>(df->atoms.size()));
    for (size_t i = 0; i < df->atoms.size(); ++i) {
      for (int c = 0; c < d; ++c) e.atoms(static_cast<int>(i), c) = df->atoms[i][c];
      e.weights(static_cast<int>(i)) = df->weights[i];
    }
    return e;
  }
  if (const auto* pm = std::get_if<PointMassFamily>(&spec.family())) {
    AtomExpansion e;
    e.atoms.resize(1, d);
    for (int c = 0; c < d; ++c) e.atoms(0, c) = pm->location[c];
    e.weights = Eigen::VectorXd::Ones(1);
    return e;
  }
  if (const auto* pr = std::get_if<Product1DFamily>(&spec.family())) {
    double a, b, w;
    if (pr->marginal == Marginal1D::kRademacher) {
      a = -1.0; b = 1.0; w = 0.5;
    } else if (pr->marginal == Marginal1D::kTwoPoint) {
      a = pr->a; b = pr->b; w = pr->w;
    } else {
      return std::nullopt;
    }
    const size_t count = size_t{1} << d;
    if (count > kAtomExpansionCap)
      throw AtomExplosionError("product atom expansion exceeds cap");
    AtomExpansion e;
    e.atoms.resize(static_cast<int>(count), d);
    e.weights.resize(static_cast<int>(count));
    for (size_t mask = 0; mask < count; ++mask) {
      double wt = 1.0;
      for (int c = 0; c < d; ++c) {
        const bool hi = (mask >> c) & 1;
        e.atoms(static_cast<int>(mask), c) = hi ? b : a;
        wt *= hi ? (1.0 - w) : w;
      }
      e.weights(static_cast<int>(mask)) = wt;
    }
    return e;
  }
  return std::nullopt;
}

}  // namespace

// ------------------------------------------------------------------- moments

std::vector<double> marginal_raw_moments(const Product1DFamily& fam, int q) {
  std::vector<double> m(q + 1, 0.0);
  m[0] = 1.0;
  switch (fam.marginal) {
    case Marginal1D::kRademacher:
      for (int k = 2; k <= q; k += 2) m[k] = 1.0;
      break;
    case Marginal1D::kStdExponential: {
      // E[(E-1)^k] for E ~ Exp(1): derangement numbers 1,0,1,2,9,44,265
      static const double kSub[] = {1, 0, 1, 2, 9, 44, 265};
      for (int k = 0; k <= q; ++k) m[k] = kSub[k];
      break;
    }
    case Marginal1D::kUniformPm:
      for (int k = 2; k <= q; k += 2) m[k] = std::pow(3.0, k / 2.0) / (k + 1);
      break;
    case Marginal1D::kTwoPoint:
      for (int k = 0; k <= q; ++k)
        m[k] = fam.w * std::pow(fam.a, k) + (1.0 - fam.w) * std::pow(fam.b, k);
      break;
  }
  return m;
}

Eigen::VectorXd mean_of(const DistributionSpec& spec) {
  const int d = spec.dim();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  if (auto e = expand_atoms(spec)) {
    mu = e->atoms.transpose() * e->weights;
  } else if (const auto* g = std::get_if<GaussianMixtureFamily>(&spec.family())) {
    for (size_t i = 0; i < g->weights.size(); ++i) mu += g->weights[i] * g->means[i];
  } else if (const auto* p = std::get_if<Product1DFamily>(&spec.family())) {
    mu.setConstant(marginal_raw_moments(*p, 1)[1]);
  }
  return mu;
}

Eigen::MatrixXd covariance_of(const DistributionSpec& spec) {
  const int d = spec.dim();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (auto e = expand_atoms(spec)) {
    const Eigen::VectorXd mu = e->atoms.transpose() * e->weights;
    for (int i = 0; i < e->atoms.rows(); ++i) {
      const Eigen::VectorXd c = e->atoms.row(i).transpose() - mu;
      cov += e->weights(i) * c * c.transpose();
    }
  } else if (const auto* g = std::get_if<GaussianMixtureFamily>(&spec.family())) {
    const Eigen::VectorXd mu = mean_of(spec);
    for (size_t i = 0; i < g->weights.size(); ++i) {
      const Eigen::VectorXd c = g->means[i] - mu;
      cov += g->weights[i] * (g->covariances[i] + c * c.transpose());
    }
  } else if (const auto* p = std::get_if<Product1DFamily>(&spec.family())) {
    auto m = marginal_raw_moments(*p, 2);
    cov = (m[2] - m[1] * m[1]) * Eigen::MatrixXd::Identity(d, d);
  }
  return cov;
}

SingularCovarianceError::SingularCovarianceError(double eig)
    : std::runtime_error("covariance is singular (smallest eigenvalue " +
                         std::to_string(eig) + ")"),
      smallest_eigenvalue(eig) {}

DistributionSpec standardize(const DistributionSpec& spec) {
  const int d = spec.dim();
  const Eigen::VectorXd mu = mean_of(spec);
  const Eigen::MatrixXd cov = covariance_of(spec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (!(min_eig > 1e-12 * std::max(1.0, max_eig)))
    throw SingularCovarianceError(min_eig);
  const Eigen::MatrixXd white =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();

  if (const auto* df = std::get_if<DiscreteFamily>(&spec.family())) {
    DiscreteFamily out = *df;
    for (auto& a : out.atoms) {
      Eigen::Map<Eigen::VectorXd> v(a.data(), d);
      v = (white * (v - mu)).eval();
    }
    return DistributionSpec(d, std::move(out), true, spec.id());
  }
  if (const auto* g = std::get_if<GaussianMixtureFamily>(&spec.family())) {
    GaussianMixtureFamily out = *g;
    for (auto& m : out.means) m = white * (m - mu);
    for (auto& c : out.covariances) c = white * c * white.transpose();
    return DistributionSpec(d, std::move(out), true, spec.id());
  }
  if (const auto* p = std::get_if<Product1DFamily>(&spec.family())) {
    if (p->marginal != Marginal1D::kTwoPoint) return spec.with_standardized_flag();
    auto m = marginal_raw_moments(*p, 2);
    const double sd = std::sqrt(m[2] - m[1] * m[1]);
    Product1DFamily out = *p;
    out.a = (p->a - m[1]) / sd;
    out.b = (p->b - m[1]) / sd;
    return DistributionSpec(d, out, true, spec.id());
  }
  throw SingularCovarianceError(0.0);  // point mass: unreachable past PD check
}

namespace {

// E[prod_i X_{idx[i]}] for X ~ N(mu, C), by Stein recursion on the first index.
double gauss_product_moment(const Eigen::VectorXd& mu, const Eigen::MatrixXd& c,
                            std::vector<int>& idx) {
  if (idx.empty()) return 1.0;
  const int a = idx.back();
  idx.pop_back();
  double val = mu(a) * gauss_product_moment(mu, c, idx);
  for (size_t l = 0; l < idx.size(); ++l) {
    const int b = idx[l];
    std::swap(idx[l], idx.back());
    const int saved = idx.back();
    idx.pop_back();
    val += c(a, b) * gauss_product_moment(mu, c, idx);
    idx.push_back(saved);
    std::swap(idx[l], idx.back());
  }
  idx.push_back(a);
  return val;
}

}  // namespace

Tensor moment_tensor(const DistributionSpec& spec, int q) {
  const int d = spec.dim();
  Tensor t(d, q);
  if (q == 0) {
    t[0] = 1.0;
    return t;
  }
  if (auto e = expand_atoms(spec)) {
    for (int i = 0; i < e->atoms.rows(); ++i) {
      std::vector<double> row(e->atoms.row(i).begin(), e->atoms.row(i).end());
      Tensor pw = outer_power(row, q);
      for (size_t f = 0; f < t.size(); ++f) t[f] += e->weights(i) * pw[f];
    }
    return t;
  }
  if (const auto* p = std::get_if<Product1DFamily>(&spec.family())) {
    auto m = marginal_raw_moments(*p, q);
    std::vector<int> mult(d);
    for (size_t f = 0; f < t.size(); ++f) {
      std::fill(mult.begin(), mult.end(), 0);
      size_t rem = f;
      for (int i = 0; i < q; ++i) {
        ++mult[rem % d];
        rem /= d;
      }
      double prod = 1.0;
      for (int c = 0; c < d; ++c) prod *= m[mult[c]];
      t[f] = prod;
    }
    return t;
  }
  const auto* g = std::get_if<GaussianMixtureFamily>(&spec.family());
  std::vector<int> idx(q);
  for (size_t f = 0; f < t.size(); ++f) {
    size_t rem = f;
    for (int i = 0; i < q; ++i) {
      idx[i] = static_cast<int>(rem % d);
      rem /= d;
    }
    double val = 0.0;
    for (size_t comp = 0; comp < g->weights.size(); ++comp)
      val += g->weights[comp] *
             gauss_product_moment(g->means[comp], g->covariances[comp], idx);
    t[f] = val;
  }
  return t;
}

// ------------------------------------------------------------------ sampling

namespace {

struct SamplePlan {
  const DistributionSpec* spec;
  int stride;
  // discrete expansion
  std::optional<AtomExpansion> atoms;
  std::vector<double> cum;
  // mixture
  std::vector<Eigen::MatrixXd> chol;
  std::vector<double> mix_cum;

  explicit SamplePlan(const DistributionSpec& s) : spec(&s) {
    const int d = s.dim();
    if (const auto* g = std::get_if<GaussianMixtureFamily>(&s.family())) {
      stride = 1 + d;
      double acc = 0.0;
      for (size_t i = 0; i < g->weights.size(); ++i) {
        acc += g->weights[i];
        mix_cum.push_back(acc);
        chol.push_back(Eigen::LLT<Eigen::MatrixXd>(g->covariances[i]).matrixL());
      }
      mix_cum.back() = 1.0;
    } else if (std::holds_alternative<DiscreteFamily>(s.family())) {
      stride = d;
      atoms = expand_atoms(s);
      double acc = 0.0;
      for (int i = 0; i < atoms->weights.size(); ++i) {
        acc += atoms->weights(i);
        cum.push_back(acc);
      }
      cum.back() = 1.0;
    } else {
      stride = d;  // product_1d and point_mass
    }
  }

  void draw_one(const double* u, double* x, double* twin) const {
    const int d = spec->dim();
    if (const auto* pr = std::get_if<Product1DFamily>(&spec->family())) {
      for (int c = 0; c < d; ++c) {
        x[c] = inv_cdf_marginal(*pr, u[c]);
        if (twin) twin[c] = normal_quantile(u[c]);
      }
      return;
    }
    if (const auto* pm = std::get_if<PointMassFamily>(&spec->family())) {
      for (int c = 0; c < d; ++c) {
        x[c] = pm->location[c];
        if (twin) twin[c] = normal_quantile(u[c]);
      }
      return;
    }
    if (std::holds_alternative<DiscreteFamily>(spec->family())) {
      const size_t a = static_cast<size_t>(
          std::lower_bound(cum.begin(), cum.end(), u[0]) - cum.begin());
      for (int c = 0; c < d; ++c) {
        x[c] = atoms->atoms(static_cast<int>(a), c);
        if (twin) twin[c] = normal_quantile(u[c]);
      }
      return;
    }
    const size_t comp = static_cast<size_t>(
        std::lower_bound(mix_cum.begin(), mix_cum.end(), u[0]) - mix_cum.begin());
    const auto* g = std::get_if<GaussianMixtureFamily>(&spec->family());
    Eigen::VectorXd z(d);
    for (int c = 0; c < d; ++c) z(c) = normal_quantile(u[1 + c]);
    Eigen::Map<Eigen::VectorXd>(x, d) = g->means[comp] + chol[comp] * z;
    if (twin) Eigen::Map<Eigen::VectorXd>(twin, d) = z;
  }

  void read_uniforms(const RandomStream& rs, uint64_t index, bool antithetic,
                     double* u) const {
    const uint64_t base = index * static_cast<uint64_t>(stride);
    for (int j = 0; j < stride; ++j) {
      const double v = rs.uniform(base + static_cast<uint64_t>(j));
      u[j] = antithetic ? 1.0 - v : v;
    }
  }

  void draw(const RandomStream& rs, uint64_t index, bool antithetic, double* x,
            double* twin) const {
    double u[2 * Tensor::kMaxDim + 2];
    read_uniforms(rs, index, antithetic, u);
    draw_one(u, x, twin);
  }

  void draw_pair(const RandomStream& rs, uint64_t index, double* x, double* twin,
                 double* x_anti, double* twin_anti) const {
    double u[2 * Tensor::kMaxDim + 2];
    read_uniforms(rs, index, false, u);
    draw_one(u, x, twin);
    for (int j = 0; j < stride; ++j) u[j] = 1.0 - u[j];
    draw_one(u, x_anti, twin_anti);
  }
};

}  // namespace

int uniforms_per_draw(const DistributionSpec& spec) {
  return SamplePlan(spec).stride;
}

void draw_at(const DistributionSpec& spec, const RandomStream& rs,
             uint64_t index, bool antithetic, double* x_out,
             double* gauss_twin) {
  SamplePlan(spec).draw(rs, index, antithetic, x_out, gauss_twin);
}

struct CoupledSampler::Impl {
  DistributionSpec spec;  // owned copy; the plan points into it
  SamplePlan plan;
  explicit Impl(const DistributionSpec& s) : spec(s), plan(spec) {}
};

CoupledSampler::CoupledSampler(const DistributionSpec& spec)
    : impl_(std::make_unique<Impl>(spec)) {}
CoupledSampler::~CoupledSampler() = default;

int CoupledSampler::stride() const { return impl_->plan.stride; }

void CoupledSampler::draw(const RandomStream& rs, uint64_t index,
                          bool antithetic, double* x, double* twin) const {
  impl_->plan.draw(rs, index, antithetic, x, twin);
}

void CoupledSampler::draw_pair(const RandomStream& rs, uint64_t index,
                               double* x, double* twin, double* x_anti,
                               double* twin_anti) const {
  impl_->plan.draw_pair(rs, index, x, twin, x_anti, twin_anti);
}

Eigen::MatrixXd sample(const DistributionSpec& spec, int64_t m, uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample: m >= 1 required");
  const int d = spec.dim();
  SamplePlan plan(spec);
  RandomStream rs(seed);
  Eigen::MatrixXd out(m, d);
  std::vector<double> x(d);
  for (int64_t i = 0; i < m; ++i) {
    plan.draw(rs, static_cast<uint64_t>(i), false, x.data(), nullptr);
    for (int c = 0; c < d; ++c) out(i, c) = x[c];
  }
  return out;
}

// -------------------------------------------------------- difference moments

namespace {

// Visits weighted (x, x') pairs: exact atom pairs when expandable, seeded MC
// pairs otherwise.  f(x, xp, w).
template <class F>
bool for_each_pair(const DistributionSpec& spec, const McOptions& mc, F&& f) {
  if (auto e = expand_atoms(spec)) {
    const int a = static_cast<int>(e->weights.size());
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < a; ++j)
        f(Eigen::VectorXd(e->atoms.row(i)), Eigen::VectorXd(e->atoms.row(j)),
          e->weights(i) * e->weights(j));
    return true;
  }
  const int d = spec.dim();
  SamplePlan plan(spec);
  RandomStream rs(mc.seed);
  Eigen::VectorXd x(d), xp(d);
  const double w = 1.0 / static_cast<double>(mc.draws);
  for (int64_t i = 0; i < mc.draws; ++i) {
    plan.draw(rs, static_cast<uint64_t>(2 * i), false, x.data(), nullptr);
    plan.draw(rs, static_cast<uint64_t>(2 * i + 1), false, xp.data(), nullptr);
    f(x, xp, w);
  }
  return false;
}

bool tail_keep(double d2, std::optional<double> threshold_sq, TailSide side) {
  if (!threshold_sq) return true;
  return side == TailSide::kAbove ? d2 >= *threshold_sq : d2 < *threshold_sq;
}

}  // namespace

McEstimate difference_abs_moment(const DistributionSpec& spec, double q,
                                 std::optional<double> threshold_sq,
                                 TailSide side, const McOptions& mc) {
  if (q < 0.0) throw std::invalid_argument("difference_abs_moment: q >= 0");
  long double sum = 0.0L, sum2 = 0.0L;
  const bool exact = for_each_pair(
      spec, mc, [&](const Eigen::VectorXd& x, const Eigen::VectorXd& xp, double w) {
        const double d2 = (xp - x).squaredNorm();
        if (!tail_keep(d2, threshold_sq, side)) return;
        const double v = q == 0.0 ? 1.0 : std::pow(d2, 0.5 * q);
        sum += static_cast<long double>(w) * v;
        sum2 += static_cast<long double>(w) * v * v;
      });
  McEstimate out;
  out.value = static_cast<double>(sum);
  if (!exact) {
    const double n = static_cast<double>(mc.draws);
    const double var =
        std::max(0.0, static_cast<double>(sum2) * n / n - out.value * out.value);
    out.std_error = std::sqrt(var / n);
  }
  return out;
}

Eigen::MatrixXd difference_second_moment(const DistributionSpec& spec,
                                         double beta_sq, double scale,
                                         const McOptions& mc) {
  if (!(beta_sq > 0.0))
    throw std::invalid_argument("difference_second_moment: beta_sq > 0");
  if (!(scale > 0.0))
    throw std::invalid_argument("difference_second_moment: scale > 0");
  const int d = spec.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for_each_pair(spec, mc,
                [&](const Eigen::VectorXd& x, const Eigen::VectorXd& xp, double w) {
                  const Eigen::VectorXd diff = xp - x;
                  if (diff.squaredNorm() <= beta_sq)
                    acc += w * diff * diff.transpose();
                });
  return scale * scale * acc;
}

// ------------------------------------------------------ DifferencePopulation

DifferencePopulation::DifferencePopulation(const DistributionSpec& spec,
                                           double p, const McOptions& mc)
    : p_(p) {
  const int d = spec.dim();
  exact_ = for_each_pair(
      spec, mc, [&](const Eigen::VectorXd& x, const Eigen::VectorXd& xp, double w) {
        Entry e;
        e.w = w;
        e.d = xp - x;
        e.d2 = e.d.squaredNorm();
        e.x = x;
        entries_.push_back(std::move(e));
      });
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.d2 < b.d2; });
  const size_t n = entries_.size();
  suffix4_.assign(n + 1, 0.0);
  suffix_p2_.assign(n + 1, 0.0);
  suffix_xxd2_.assign(n + 1, Eigen::MatrixXd::Zero(d, d));
  for (size_t i = n; i-- > 0;) {
    const Entry& e = entries_[i];
    suffix4_[i] = suffix4_[i + 1] + e.w * e.d2 * e.d2;
    suffix_p2_[i] = suffix_p2_[i + 1] + e.w * std::pow(e.d2, 0.5 * (p_ + 2.0));
    suffix_xxd2_[i] = suffix_xxd2_[i + 1] + e.w * e.d2 * (e.x * e.x.transpose());
  }
}

size_t DifferencePopulation::first_index_geq(double t) const {
  return static_cast<size_t>(
      std::lower_bound(entries_.begin(), entries_.end(), t,
                       [](const Entry& e, double v) { return e.d2 < v; }) -
      entries_.begin());
}

double DifferencePopulation::tail_abs_moment4(double t) const {
  return suffix4_[first_index_geq(t)];
}

double DifferencePopulation::tail_abs_moment_p2(double t) const {
  return suffix_p2_[first_index_geq(t)];
}

double DifferencePopulation::tail_weighted_second_moment_norm(double t) const {
  return suffix_xxd2_[first_index_geq(t)].norm();
}

double DifferencePopulation::total_abs_moment(double q) const {
  long double s = 0.0L;
  for (const Entry& e : entries_)
    s += static_cast<long double>(e.w) * std::pow(e.d2, 0.5 * q);
  return static_cast<double>(s);
}

double DifferencePopulation::truncated_lambda_moment(
    const Eigen::MatrixXd& lambda, double q, double beta_sq) const {
  long double s = 0.0L;
  for (const Entry& e : entries_) {
    if (e.d2 > beta_sq) break;
    const double v = (lambda * e.d).squaredNorm();
    s += static_cast<long double>(e.w) * std::pow(v, 0.5 * q);
  }
  return static_cast<double>(s);
}

Eigen::MatrixXd DifferencePopulation::truncated_second_moment(
    double beta_sq) const {
  const int d = entries_.empty() ? 1 : static_cast<int>(entries_[0].d.size());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (const Entry& e : entries_) {
    if (e.d2 > beta_sq) break;
    acc += e.w * e.d * e.d.transpose();
  }
  return acc;
}

// -------------------------------------------------------------- convolution

namespace {

using AtomList = std::vector<std::pair<double, double>>;  // (atom, weight)

AtomList merge_atoms(AtomList v, double eps) {
  std::sort(v.begin(), v.end());
  AtomList out;
  for (const auto& [a, w] : v) {
    if (!out.empty() && a - out.back().first <= eps)
      out.back().second += w;
    else
      out.emplace_back(a, w);
  }
  return out;
}

AtomList convolve(const AtomList& a, const AtomList& b, double eps) {
  if (a.size() * b.size() > 400'000'000ull)
    throw AtomExplosionError("convolve_power: pairwise expansion too large");
  AtomList out;
  out.reserve(a.size() * b.size());
  for (const auto& [xa, wa] : a)
    for (const auto& [xb, wb] : b) out.emplace_back(xa + xb, wa * wb);
  out = merge_atoms(std::move(out), eps);
  if (out.size() > kConvolutionAtomCap)
    throw AtomExplosionError("convolve_power: atom count exceeds cap");
  return out;
}

}  // namespace

Discrete1D convolve_power(const Discrete1D& law, int64_t n, double merge_eps) {
  law.validate();
  if (n < 1) throw std::invalid_argument("convolve_power: n >= 1 required");
  AtomList base;
  for (size_t i = 0; i < law.atoms.size(); ++i)
    base.emplace_back(law.atoms[i], law.weights[i]);
  AtomList result{{0.0, 1.0}};
  int64_t e = n;
  while (e > 0) {
    if (e & 1) result = convolve(result, base, merge_eps);
    e >>= 1;
    if (e > 0) base = convolve(base, base, merge_eps);
  }
  Discrete1D out;
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  out.atoms.reserve(result.size());
  out.weights.reserve(result.size());
  for (const auto& [a, w] : result) {
    out.atoms.push_back(a * s);
    out.weights.push_back(w);
  }
  // renormalize float drift in the weights
  double tot = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) w /= tot;
  return out;
}

Discrete1D as_discrete1d(const DistributionSpec& spec) {
  if (spec.dim() != 1 || !spec.is_discrete())
    throw std::invalid_argument("as_discrete1d: spec must be 1-d finite-atom");
  auto e = expand_atoms(spec);
  AtomList v;
  for (int i = 0; i < e->weights.size(); ++i)
    v.emplace_back(e->atoms(i, 0), e->weights(i));
  v = merge_atoms(std::move(v), 0.0);
  Discrete1D out;
  for (const auto& [a, w] : v) {
    out.atoms.push_back(a);
    out.weights.push_back(w);
  }
  out.validate();
  return out;
}

std::optional<double> lattice_spacing(const Discrete1D& law, double tol) {
  if (law.atoms.size() < 2) return std::nullopt;
  double g = 0.0;
  for (size_t i = 1; i < law.atoms.size(); ++i) {
    double gap = law.atoms[i] - law.atoms[i - 1];
    if (g == 0.0) {
      g = gap;
      continue;
    }
    // real gcd by Euclid with tolerance
    double x = std::max(g, gap), y = std::min(g, gap);
    while (y > tol) {
      double r = std::fmod(x, y);
      if (r > y - tol) r = 0.0;  // wrapped just below y
      x = y;
      y = r;
    }
    g = x;
  }
  // all atoms must sit on the grid
  for (size_t i = 1; i < law.atoms.size(); ++i) {
    const double k = (law.atoms[i] - law.atoms[0]) / g;
    if (std::abs(k - std::round(k)) > tol) return std::nullopt;
  }
  return g;
}

// --------------------------------------------------------------------- JSON

namespace {

using nlohmann::json;

[[noreturn]] void fail_field(const std::string& origin, const std::string& field,
                             const std::string& why) {
  throw SpecParseError(origin + ": field '" + field + "': " + why);
}

std::vector<double> require_number_array(const json& j, const std::string& origin,
                                         const std::string& field) {
  if (!j.contains(field) || !j[field].is_array())
    fail_field(origin, field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j[field]) {
    if (!v.is_number()) fail_field(origin, field, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

DistributionSpec spec_from_json_text(const std::string& text,
                                     const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw SpecParseError(origin + ": top level must be an object");
  if (!j.contains("family") || !j["family"].is_string())
    fail_field(origin, "family", "required string");
  const std::string family = j["family"].get<std::string>();
  const std::string id = j.value("id", std::string{});

  std::optional<DistributionSpec> spec;
  if (family == "discrete") {
    if (!j.contains("atoms") || !j["atoms"].is_array())
      fail_field(origin, "atoms", "expected array of vectors");
    std::vector<std::vector<double>> atoms;
    for (const auto& row : j["atoms"]) {
      if (row.is_number())
        atoms.push_back({row.get<double>()});
      else if (row.is_array()) {
        std::vector<double> v;
        for (const auto& x : row) {
          if (!x.is_number()) fail_field(origin, "atoms", "non-numeric entry");
          v.push_back(x.get<double>());
        }
        atoms.push_back(std::move(v));
      } else {
        fail_field(origin, "atoms", "each atom must be a number or vector");
      }
    }
    auto weights = require_number_array(j, origin, "weights");
    try {
      spec = DistributionSpec::discrete(std::move(atoms), std::move(weights));
    } catch (const std::invalid_argument& e) {
      throw SpecParseError(origin + ": " + e.what());
    }
  } else if (family == "gaussian_mixture") {
    if (!j.contains("means") || !j["means"].is_array())
      fail_field(origin, "means", "expected array of vectors");
    std::vector<Eigen::VectorXd> means;
    for (const auto& row : j["means"]) {
      Eigen::VectorXd m(row.size());
      int c = 0;
      for (const auto& x : row) m(c++) = x.get<double>();
      means.push_back(std::move(m));
    }
    if (!j.contains("covariances") || !j["covariances"].is_array())
      fail_field(origin, "covariances", "expected array of matrices");
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& mat : j["covariances"]) {
      const int r = static_cast<int>(mat.size());
      Eigen::MatrixXd c(r, r);
      for (int i = 0; i < r; ++i)
        for (int k = 0; k < r; ++k) c(i, k) = mat[i][k].get<double>();
      covs.push_back(std::move(c));
    }
    auto weights = require_number_array(j, origin, "weights");
    try {
      spec = DistributionSpec::gaussian_mixture(std::move(means), std::move(covs),
                                                std::move(weights));
    } catch (const std::invalid_argument& e) {
      throw SpecParseError(origin + ": " + e.what());
    }
  } else if (family == "product_1d") {
    if (!j.contains("marginal") || !j["marginal"].is_string())
      fail_field(origin, "marginal", "required string");
    const std::string m = j["marginal"].get<std::string>();
    const int copies = j.value("copies", j.value("dim", 1));
    try {
      if (m == "rademacher")
        spec = DistributionSpec::product(Marginal1D::kRademacher, copies);
      else if (m == "standardized_exponential")
        spec = DistributionSpec::product(Marginal1D::kStdExponential, copies);
      else if (m == "uniform_pm")
        spec = DistributionSpec::product(Marginal1D::kUniformPm, copies);
      else if (m == "two_point") {
        if (!j.contains("a") || !j.contains("b") || !j.contains("w"))
          fail_field(origin, "a/b/w", "two_point requires a, b, w");
        spec = DistributionSpec::two_point_product(
            j["a"].get<double>(), j["b"].get<double>(), j["w"].get<double>(),
            copies);
      } else {
        fail_field(origin, "marginal", "unknown marginal '" + m + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw SpecParseError(origin + ": " + e.what());
    }
  } else if (family == "point_mass") {
    auto loc = require_number_array(j, origin, "location");
    spec = DistributionSpec::point_mass(std::move(loc));
  } else {
    fail_field(origin, "family", "unknown family '" + family + "'");
  }

  if (j.contains("dim") && j["dim"].get<int>() != spec->dim())
    fail_field(origin, "dim",
               "declared dim " + std::to_string(j["dim"].get<int>()) +
                   " != family dim " + std::to_string(spec->dim()));

  DistributionSpec out = *spec;
  if (!id.empty())
    out = DistributionSpec(out.dim(), out.family(), out.standardized(), id);
  if (j.value("standardize", false)) out = standardize(out);
  return out;
}

DistributionSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecParseError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return spec_from_json_text(ss.str(), path);
}

std::string spec_to_json_text(const DistributionSpec& spec) {
  json j;
  j["dim"] = spec.dim();
  j["id"] = spec.id();
  if (const auto* d = std::get_if<DiscreteFamily>(&spec.family())) {
    j["family"] = "discrete";
    j["atoms"] = d->atoms;
    j["weights"] = d->weights;
  } else if (const auto* g = std::get_if<GaussianMixtureFamily>(&spec.family())) {
    j["family"] = "gaussian_mixture";
    json means = json::array(), covs = json::array();
    for (const auto& m : g->means)
      means.push_back(std::vector<double>(m.begin(), m.end()));
    for (const auto& c : g->covariances) {
      json rows = json::array();
      for (int i = 0; i < c.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < c.cols(); ++k) row.push_back(c(i, k));
        rows.push_back(row);
      }
      covs.push_back(rows);
    }
    j["means"] = means;
    j["covariances"] = covs;
    j["weights"] = g->weights;
  } else if (const auto* p = std::get_if<Product1DFamily>(&spec.family())) {
    j["family"] = "product_1d";
    j["marginal"] = marginal_name(p->marginal);
    j["copies"] = p->copies;
    if (p->marginal == Marginal1D::kTwoPoint) {
      j["a"] = p->a;
      j["b"] = p->b;
      j["w"] = p->w;
    }
  } else if (const auto* pm = std::get_if<PointMassFamily>(&spec.family())) {
    j["family"] = "point_mass";
    j["location"] = pm->location;
  }
  if (spec.standardized()) j["standardized"] = true;
  return j.dump(2);
}

}  // namespace cltlab
