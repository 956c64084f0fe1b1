#pragma once

#include "kbi/kernels.hpp"
#include "kbi/linalg.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <variant>
#include <vector>

namespace kbi {

/// Kernel mean estimate sum_i w_i k(., X_i). Weights may be negative and
/// are never renormalized.
struct EmpiricalMean {
  EmpiricalMean(KernelSpec spec, PointSet anchors, Vector weights);

  KernelSpec spec;
  PointSet anchors;
  Vector weights;

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
  int dim() const { return spec.dim(); }
};

/// Conditional kernel mean d_G(. | mean, cov) in a Gaussian RKHS. The
/// covariance is shared between atoms built from the same noise model.
struct GaussianAtom {
  Vector mean;
  std::shared_ptr<const GaussianDensity> shape;

  GaussianAtom(Vector mean, std::shared_ptr<const GaussianDensity> shape);
  GaussianAtom(Vector mean, const Matrix& cov);

  const Matrix& covariance() const { return shape->covariance(); }
};

/// Laplace noise (rate) pushed through a Laplace kernel (kernel_rate).
struct LaplaceAtom {
  double location;
  double rate;
  double kernel_rate;
};

/// Cauchy density with the given location and total scale.
struct CauchyAtom {
  double location;
  double scale;
};

struct MixtureAtom {
  std::vector<double> weights;
  std::vector<GaussianAtom> components;
};

using Atom = std::variant<GaussianAtom, LaplaceAtom, CauchyAtom, MixtureAtom>;

/// Kernel mean sum_i w_i m_i where each m_i is a closed-form atom living
/// in the RKHS of `rkhs`.
struct ModelMean {
  ModelMean(KernelSpec rkhs, std::vector<Atom> atoms, Vector weights);

  KernelSpec rkhs;
  std::vector<Atom> atoms;
  Vector weights;

  std::size_t size() const { return atoms.size(); }
  int dim() const { return rkhs.dim(); }
};

using KernelMean = std::variant<EmpiricalMean, ModelMean>;

int atom_dim(const Atom& atom);
double eval_atom(const Atom& atom, const double* y);
double eval_atom(const Atom& atom, const Point& y);

double eval_mean(const EmpiricalMean& mean, const Point& y);
double eval_mean(const ModelMean& mean, const Point& y);
double eval_mean(const KernelMean& mean, const Point& y);

/// sum_i w_i f(X_i).
double expectation(const EmpiricalMean& mean, const std::function<double(const Point&)>& f);

/// RKHS inner product of two closed-form atoms. Supported: Gaussian and
/// Gaussian-mixture atoms in a Gaussian RKHS, using
///   <d_G(.;m1,C1), d_G(.;m2,C2)> = d_G(0; m1 - m2, C1 + C2 - R).
/// Other pairs throw CapabilityError.
double atom_inner_product(const Atom& a, const Atom& b, const KernelSpec& rkhs);

double inner_product(const EmpiricalMean& a, const EmpiricalMean& b);
double inner_product(const EmpiricalMean& a, const ModelMean& b);
double inner_product(const ModelMean& a, const EmpiricalMean& b);
double inner_product(const ModelMean& a, const ModelMean& b);
double inner_product(const KernelMean& a, const KernelMean& b);

/// ||a - b||^2 in the shared RKHS, clamped below at zero.
double rkhs_distance_sq(const KernelMean& a, const KernelMean& b);

const KernelSpec& rkhs_of(const KernelMean& mean);

/// CSV with one row per anchor: x0..x{d-1},weight.
void write_mean_csv(std::ostream& out, const EmpiricalMean& mean);

}  // namespace kbi
