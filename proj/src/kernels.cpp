#include "kbi/kernels.hpp"

#include "kbi/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace kbi {

namespace {

constexpr int kStackDim = 16;

}  // namespace

GaussianDensity::GaussianDensity(Matrix cov) : cov_(std::move(cov)) {
  if (cov_.rows() == 0 || cov_.rows() != cov_.cols()) {
    throw InputError("Gaussian covariance must be a non-empty square matrix");
  }
  if (!cov_.allFinite() || !is_symmetric(cov_)) {
    throw InputError("Gaussian covariance must be finite and symmetric");
  }
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) {
    throw InputError("Gaussian covariance is not positive definite");
  }
  chol_ = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < chol_.rows(); ++i) {
    const double d = chol_(i, i);
    if (!(d > 0.0)) throw InputError("Gaussian covariance is not positive definite");
    log_det += 2.0 * std::log(d);
  }
  const double d = static_cast<double>(cov_.rows());
  log_norm_ = -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianDensity::at_offset(const double* diff) const {
  const int d = dim();
  std::array<double, kStackDim> stack{};
  std::vector<double> heap;
  double* z = stack.data();
  if (d > kStackDim) {
    heap.resize(static_cast<std::size_t>(d));
    z = heap.data();
  }
  // Forward substitution L z = diff.
  double q = 0.0;
  for (int i = 0; i < d; ++i) {
    double s = diff[i];
    for (int j = 0; j < i; ++j) s -= chol_(i, j) * z[j];
    z[i] = s / chol_(i, i);
    q += z[i] * z[i];
  }
  return std::exp(log_norm_ - 0.5 * q);
}

double GaussianDensity::at_offset(const Vector& diff) const {
  if (diff.size() != dim()) throw InputError("GaussianDensity: dimension mismatch");
  return at_offset(diff.data());
}

double GaussianDensity::operator()(const Point& x, const Point& mean) const {
  if (x.size() != dim() || mean.size() != dim()) {
    throw InputError("GaussianDensity: dimension mismatch");
  }
  const Vector diff = x - mean;
  return at_offset(diff.data());
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Laplace: return "laplace";
    case KernelFamily::Cauchy: return "cauchy";
  }
  return "unknown";
}

KernelSpec KernelSpec::gaussian(Matrix covariance) {
  KernelSpec spec;
  spec.family_ = KernelFamily::Gaussian;
  spec.gaussian_ = std::make_shared<const GaussianDensity>(std::move(covariance));
  spec.dim_ = spec.gaussian_->dim();
  return spec;
}

KernelSpec KernelSpec::gaussian_isotropic(double bandwidth, int dim) {
  if (!(bandwidth > 0.0) || dim < 1) {
    throw InputError("Gaussian kernel needs bandwidth > 0 and dim >= 1");
  }
  return gaussian(bandwidth * bandwidth * Matrix::Identity(dim, dim));
}

KernelSpec KernelSpec::laplace(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InputError("Laplace kernel rate must be > 0");
  KernelSpec spec;
  spec.family_ = KernelFamily::Laplace;
  spec.param_ = rate;
  return spec;
}

KernelSpec KernelSpec::cauchy(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("Cauchy kernel scale must be > 0");
  KernelSpec spec;
  spec.family_ = KernelFamily::Cauchy;
  spec.param_ = scale;
  return spec;
}

const Matrix& KernelSpec::covariance() const { return density().covariance(); }

const GaussianDensity& KernelSpec::density() const {
  if (family_ != KernelFamily::Gaussian) throw CapabilityError("kernel is not Gaussian");
  return *gaussian_;
}

double KernelSpec::rate() const {
  if (family_ != KernelFamily::Laplace) throw CapabilityError("kernel is not Laplace");
  return param_;
}

double KernelSpec::scale() const {
  if (family_ != KernelFamily::Cauchy) throw CapabilityError("kernel is not Cauchy");
  return param_;
}

double KernelSpec::operator()(const double* x, const double* y) const {
  switch (family_) {
    case KernelFamily::Gaussian: {
      std::array<double, kStackDim> stack{};
      std::vector<double> heap;
      double* diff = stack.data();
      if (dim_ > kStackDim) {
        heap.resize(static_cast<std::size_t>(dim_));
        diff = heap.data();
      }
      for (int i = 0; i < dim_; ++i) diff[i] = x[i] - y[i];
      return gaussian_->at_offset(diff);
    }
    case KernelFamily::Laplace:
      return 0.5 * param_ * std::exp(-param_ * std::abs(x[0] - y[0]));
    case KernelFamily::Cauchy: {
      const double u = (x[0] - y[0]) / param_;
      return 1.0 / (std::numbers::pi * param_ * (1.0 + u * u));
    }
  }
  return 0.0;
}

double KernelSpec::operator()(const Point& x, const Point& y) const {
  if (x.size() != dim_ || y.size() != dim_) {
    throw InputError("eval_kernel: point dimension does not match kernel dimension");
  }
  return (*this)(x.data(), y.data());
}

double KernelSpec::peak() const {
  switch (family_) {
    case KernelFamily::Gaussian: return std::exp(gaussian_->log_peak());
    case KernelFamily::Laplace: return 0.5 * param_;
    case KernelFamily::Cauchy: return 1.0 / (std::numbers::pi * param_);
  }
  return 0.0;
}

bool KernelSpec::operator==(const KernelSpec& other) const {
  if (family_ != other.family_ || dim_ != other.dim_) return false;
  if (family_ == KernelFamily::Gaussian) {
    return gaussian_ == other.gaussian_ ||
           gaussian_->covariance() == other.gaussian_->covariance();
  }
  return param_ == other.param_;
}

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
  return spec(x, y);
}

Matrix gram(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  if ((a.rows() > 0 && a.cols() != spec.dim()) || (b.rows() > 0 && b.cols() != spec.dim())) {
    throw InputError("gram: point dimension does not match kernel dimension");
  }
  Matrix g(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    const double* bj = b.row(j).data();
    for (Eigen::Index i = 0; i < a.rows(); ++i) g(i, j) = spec(a.row(i).data(), bj);
  }
  return g;
}

Matrix gram(const KernelSpec& spec, const PointSet& a) {
  if (a.rows() > 0 && a.cols() != spec.dim()) {
    throw InputError("gram: point dimension does not match kernel dimension");
  }
  const Eigen::Index n = a.rows();
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* aj = a.row(j).data();
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = spec(a.row(i).data(), aj);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Vector kernel_column(const KernelSpec& spec, const PointSet& a, const Point& x) {
  if (x.size() != spec.dim() || (a.rows() > 0 && a.cols() != spec.dim())) {
    throw InputError("kernel_column: dimension mismatch");
  }
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out(i) = spec(x.data(), a.row(i).data());
  return out;
}

}  // namespace kbi
