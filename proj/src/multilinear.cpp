#include "cltlab/multilinear.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cltlab/rng.hpp"

namespace cltlab {

namespace {

size_t checked_size(int dim, int order) {
  if (dim < 1 || dim > Tensor::kMaxDim)
    throw std::invalid_argument("Tensor: dim must be in [1," +
                                std::to_string(Tensor::kMaxDim) + "]");
  if (order < 0 || order > Tensor::kMaxOrder)
    throw std::invalid_argument("Tensor: order must be in [0," +
                                std::to_string(Tensor::kMaxOrder) + "]");
  size_t n = 1;
  for (int i = 0; i < order; ++i) n *= static_cast<size_t>(dim);
  return n;
}

}  // namespace

Tensor::Tensor(int dim, int order)
    : dim_(dim), order_(order), data_(checked_size(dim, order), 0.0) {}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

size_t Tensor::flat_index(std::span<const int> idx) const {
  if (static_cast<int>(idx.size()) != order_)
    throw std::invalid_argument("Tensor::at: index length != order");
  size_t flat = 0;
  for (int i = 0; i < order_; ++i) {
    if (idx[i] < 0 || idx[i] >= dim_)
      throw std::out_of_range("Tensor::at: index out of range");
    flat = flat * static_cast<size_t>(dim_) + static_cast<size_t>(idx[i]);
  }
  return flat;
}

Tensor& Tensor::operator*=(double c) {
  for (double& v : data_) v *= c;
  return *this;
}

Tensor outer_power(std::span<const double> x, int k) {
  const int d = static_cast<int>(x.size());
  Tensor t(d, k);
  if (k == 0) {
    t[0] = 1.0;
    return t;
  }
  // entry at flat index f: digits of f base d give the multi-index
  const size_t n = t.size();
  for (size_t f = 0; f < n; ++f) {
    double prod = 1.0;
    size_t rem = f;
    for (int i = 0; i < k; ++i) {
      prod *= x[rem % d];
      rem /= d;
    }
    t[f] = prod;
  }
  return t;
}

double hs_dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("hs_dot: shape mismatch (dim " +
                                std::to_string(a.dim()) + "/" +
                                std::to_string(b.dim()) + ", order " +
                                std::to_string(a.order()) + "/" +
                                std::to_string(b.order()) + ")");
  double s = 0.0;
  auto ea = a.entries(), eb = b.entries();
  for (size_t i = 0; i < ea.size(); ++i) s += ea[i] * eb[i];
  return s;
}

double hs_norm(const Tensor& a) { return std::sqrt(hs_dot(a, a)); }

std::vector<double> contract(const Tensor& m, const Tensor& y) {
  if (m.dim() != y.dim() || m.order() != y.order() + 1)
    throw std::invalid_argument("contract: need M.order == y.order + 1 and equal dims");
  const int d = m.dim();
  const size_t block = y.size();
  std::vector<double> out(d, 0.0);
  auto em = m.entries(), ey = y.entries();
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    const double* row = em.data() + static_cast<size_t>(i) * block;
    for (size_t j = 0; j < block; ++j) s += row[j] * ey[j];
    out[i] = s;
  }
  return out;
}

double hermite_he(int k, double x) {
  if (k == 0) return 1.0;
  double hm = 1.0, h = x;
  for (int j = 1; j < k; ++j) {
    double hn = x * h - j * hm;
    hm = h;
    h = hn;
  }
  return h;
}

Tensor hermite_tensor(std::span<const double> x, int k) {
  const int d = static_cast<int>(x.size());
  Tensor t(d, k);
  if (k == 0) {
    t[0] = 1.0;
    return t;
  }
  // He values per coordinate up to k
  std::vector<double> he(static_cast<size_t>(d) * (k + 1));
  for (int c = 0; c < d; ++c)
    for (int j = 0; j <= k; ++j)
      he[static_cast<size_t>(c) * (k + 1) + j] = hermite_he(j, x[c]);

  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  const size_t n = t.size();
  std::vector<int> mult(d);
  for (size_t f = 0; f < n; ++f) {
    std::fill(mult.begin(), mult.end(), 0);
    size_t rem = f;
    for (int i = 0; i < k; ++i) {
      ++mult[rem % d];
      rem /= d;
    }
    double prod = 1.0;
    for (int c = 0; c < d; ++c)
      if (mult[c] > 0) prod *= he[static_cast<size_t>(c) * (k + 1) + mult[c]];
    t[f] = sign * prod;
  }
  return t;
}

HermitePNorm contracted_hermite_pnorm(const Tensor& m, int k, double p,
                                      int64_t n_mc, uint64_t seed) {
  if (m.order() != k + 1)
    throw std::invalid_argument("contracted_hermite_pnorm: M.order must be k+1");
  if (p < 2.0) throw std::invalid_argument("contracted_hermite_pnorm: p >= 2");
  if (n_mc < 1) throw std::invalid_argument("contracted_hermite_pnorm: n_mc >= 1");
  const int d = m.dim();

  HermitePNorm out;
  if (k == 2 && p == 2.0) {
    // ||M H_2(Z)||_2^2 = sum_i sum_{jl} M_{ijl}(M_{ijl}+M_{ilj}); for M
    // symmetric in its last two slots this is 2||M||^2.
    bool symmetric = true;
    for (int i = 0; i < d && symmetric; ++i)
      for (int j = 0; j < d && symmetric; ++j)
        for (int l = j + 1; l < d; ++l) {
          if (std::abs(m.at({i, j, l}) - m.at({i, l, j})) >
              1e-12 * (1.0 + std::abs(m.at({i, j, l})))) {
            symmetric = false;
            break;
          }
        }
    if (symmetric) out.exact = std::sqrt(2.0) * hs_norm(m);
  }

  constexpr int64_t kBlock = 4096;
  double sum_p = 0.0, sum_p2 = 0.0;
  std::vector<double> z(d);
  for (int64_t start = 0; start < n_mc; start += kBlock) {
    const int64_t stop = std::min(n_mc, start + kBlock);
    RandomStream rs(seed, static_cast<uint64_t>(start / kBlock) + 1);
    for (int64_t i = start; i < stop; ++i) {
      const uint64_t base = static_cast<uint64_t>(i - start) * d;
      for (int c = 0; c < d; ++c) z[c] = rs.normal(base + c);
      Tensor h = hermite_tensor(z, k);
      auto v = contract(m, h);
      double n2 = 0.0;
      for (double vi : v) n2 += vi * vi;
      const double np = std::pow(n2, 0.5 * p);
      sum_p += np;
      sum_p2 += np * np;
    }
  }
  if (!std::isfinite(sum_p))
    throw std::runtime_error("contracted_hermite_pnorm: non-finite accumulation");
  const double n = static_cast<double>(n_mc);
  const double mean_p = sum_p / n;
  out.value = std::pow(mean_p, 1.0 / p);
  if (n_mc > 1 && mean_p > 0.0) {
    const double var = std::max(0.0, (sum_p2 / n - mean_p * mean_p)) / (n - 1.0);
    // delta method through x -> x^{1/p}
    out.std_error = std::sqrt(var) * std::pow(mean_p, 1.0 / p - 1.0) / p;
  }
  return out;
}

}  // namespace cltlab
