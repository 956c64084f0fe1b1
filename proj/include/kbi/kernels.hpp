#pragma once

#include "kbi/linalg.hpp"

#include <memory>
#include <string>

namespace kbi {

/// Multivariate normal density d_G(x | mean, cov), evaluated through the
/// Cholesky factor of `cov`. Instances are immutable and cheap to share.
class GaussianDensity {
 public:
  explicit GaussianDensity(Matrix cov);

  int dim() const { return static_cast<int>(cov_.rows()); }
  const Matrix& covariance() const { return cov_; }

  /// d_G(diff | 0, cov) for a raw pointer to `dim()` offsets.
  double at_offset(const double* diff) const;
  double at_offset(const Vector& diff) const;
  double operator()(const Point& x, const Point& mean) const;

  /// log d_G(0 | 0, cov).
  double log_peak() const { return log_norm_; }

 private:
  Matrix cov_;
  Matrix chol_;  // lower factor of cov_
  double log_norm_;
};

enum class KernelFamily { Gaussian, Laplace, Cauchy };

std::string to_string(KernelFamily family);

/// A shift-invariant positive-definite kernel in normalized-density form:
/// k(x, y) is a probability density in y centred at x.
///
///   Gaussian: k(x,y) = d_G(x - y | 0, R), any dimension
///   Laplace:  k(x,y) = (rate/2) exp(-rate |x - y|), 1-D
///   Cauchy:   k(x,y) = 1 / (pi scale (1 + ((x-y)/scale)^2)), 1-D
class KernelSpec {
 public:
  static KernelSpec gaussian(Matrix covariance);
  static KernelSpec gaussian_isotropic(double bandwidth, int dim);
  static KernelSpec laplace(double rate);
  static KernelSpec cauchy(double scale);

  KernelFamily family() const { return family_; }
  int dim() const { return dim_; }

  /// Gaussian only.
  const Matrix& covariance() const;
  const GaussianDensity& density() const;
  /// Laplace rate (lambda_0). Laplace only.
  double rate() const;
  /// Cauchy scale (sigma_0). Cauchy only.
  double scale() const;

  double operator()(const double* x, const double* y) const;
  double operator()(const Point& x, const Point& y) const;

  /// k(x, x), identical for every x.
  double peak() const;

  bool operator==(const KernelSpec& other) const;
  bool operator!=(const KernelSpec& other) const { return !(*this == other); }

 private:
  KernelSpec() = default;

  KernelFamily family_ = KernelFamily::Gaussian;
  int dim_ = 1;
  double param_ = 0.0;
  std::shared_ptr<const GaussianDensity> gaussian_;
};

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y);

/// Cross-Gram matrix with entry (i, j) = k(A_i, B_j).
Matrix gram(const KernelSpec& spec, const PointSet& a, const PointSet& b);

/// Symmetric Gram matrix of one point set. Only the upper triangle is
/// evaluated; the lower one is a copy, so the result is exactly symmetric.
Matrix gram(const KernelSpec& spec, const PointSet& a);

/// Vector (k(x, A_1), ..., k(x, A_n)).
Vector kernel_column(const KernelSpec& spec, const PointSet& a, const Point& x);

}  // namespace kbi
