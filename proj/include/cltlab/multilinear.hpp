#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cltlab/numerics.hpp"

namespace cltlab {

// Dense order-k tensor over R^d with Hilbert-Schmidt geometry, row-major
// multi-index layout.  Order 0 is a scalar (single entry).
class Tensor {
 public:
  static constexpr int kMaxDim = 16;
  static constexpr int kMaxOrder = 6;

  Tensor() : dim_(1), order_(0), data_(1, 0.0) {}
  Tensor(int dim, int order);
  static Tensor scalar(double v);

  int dim() const { return dim_; }
  int order() const { return order_; }
  size_t size() const { return data_.size(); }

  double& operator[](size_t flat) { return data_[flat]; }
  double operator[](size_t flat) const { return data_[flat]; }
  std::span<const double> entries() const { return data_; }
  std::span<double> entries() { return data_; }

  // multi-index access; idx.size() must equal order()
  double at(std::span<const int> idx) const { return data_[flat_index(idx)]; }
  double& at(std::span<const int> idx) { return data_[flat_index(idx)]; }
  double at(std::initializer_list<int> idx) const {
    return at(std::span<const int>(idx.begin(), idx.size()));
  }
  double& at(std::initializer_list<int> idx) {
    return at(std::span<const int>(idx.begin(), idx.size()));
  }

  size_t flat_index(std::span<const int> idx) const;

  Tensor& operator*=(double c);
  bool same_shape(const Tensor& o) const {
    return dim_ == o.dim_ && order_ == o.order_;
  }

 private:
  int dim_;
  int order_;
  std::vector<double> data_;
};

// x^{otimes k}: entry j = prod_i x_{j_i}; k = 0 gives scalar 1.
Tensor outer_power(std::span<const double> x, int k);

double hs_dot(const Tensor& a, const Tensor& b);
double hs_norm(const Tensor& a);

// (M y)_i = sum_j M_{i,j} y_j for M of order k+1 and y of order k.
std::vector<double> contract(const Tensor& m, const Tensor& y);

// Monic probabilists' Hermite polynomial He_k.
double hermite_he(int k, double x);

// H_k(x) = e^{|x|^2/2} grad^k e^{-|x|^2/2}; entry j equals
// (-1)^k prod_c He_{m_c}(x_c) with m_c the multiplicity of coordinate c in j.
Tensor hermite_tensor(std::span<const double> x, int k);

struct HermitePNorm {
  double value = 0.0;        // MC estimate of ||M H_k(Z)||_p
  double std_error = 0.0;
  std::optional<double> exact;  // closed form when available (p=2, k=2, symmetric M)
};

// Monte Carlo estimate of E[||M H_k(Z)||^p]^{1/p}, Z ~ N(0, I_d), M of order
// k+1.  Draws are partitioned into fixed seeded blocks, so the result depends
// only on (seed, n_mc).
HermitePNorm contracted_hermite_pnorm(const Tensor& m, int k, double p,
                                      int64_t n_mc, uint64_t seed);

}  // namespace cltlab
