#pragma once

#include "kbi/kernels.hpp"
#include "kbi/means.hpp"
#include "kbi/noise_models.hpp"

#include <variant>
#include <vector>

namespace kbi {

/// Joint sample {(X_i, Y_i)} with the kernels on each side.
struct TrainingPairs {
  TrainingPairs(PointSet xs, PointSet ys, KernelSpec kernel_x, KernelSpec kernel_y);

  PointSet xs;
  PointSet ys;
  KernelSpec kernel_x;
  KernelSpec kernel_y;

  std::size_t size() const { return static_cast<std::size_t>(xs.rows()); }
};

/// Regularizers: epsilon for the sum rule (used as n * epsilon), delta for
/// the Bayes rule.
struct RegParams {
  RegParams(double epsilon, double delta);

  double epsilon;
  double delta;
};

/// Reusable factorization of (G_X + n eps I) for one training set. The
/// factorization is immutable after construction.
class NonKsrOperator {
 public:
  NonKsrOperator(PointSet xs, KernelSpec kernel_x, double eps);
  NonKsrOperator(const TrainingPairs& train, double eps)
      : NonKsrOperator(train.xs, train.kernel_x, eps) {}

  /// (G_X + n eps I)^{-1} G_{X X~} gamma.
  Vector weights(const EmpiricalMean& input) const;
  /// (G_X + n eps I)^{-1} M gamma with M_ij = m_j(X_i).
  Vector weights(const ModelMean& input) const;
  /// (G_X + n eps I)^{-1} rhs.
  Vector solve(const Vector& rhs) const { return solver_.solve(rhs); }
  Matrix solve(const Matrix& rhs) const { return solver_.solve(rhs); }

  const PointSet& xs() const { return xs_; }
  const KernelSpec& kernel() const { return kernel_; }
  const Matrix& gram_x() const { return gram_; }

 private:
  PointSet xs_;
  KernelSpec kernel_;
  Matrix gram_;
  SpdSolver solver_;
};

/// Nonparametric kernel sum rule. Output lives over train.ys.
EmpiricalMean non_ksr(const TrainingPairs& train, const EmpiricalMean& input, double eps);

/// Nonparametric sum rule applied to a model-based mean: the input atoms
/// are evaluated at train.xs to form the cross matrix.
EmpiricalMean non_ksr(const TrainingPairs& train, const ModelMean& input, double eps);

/// Model-based kernel sum rule: sum_i gamma_i m_{Y|X~_i}. No regularizer.
ModelMean mb_ksr(const NoiseModel& model, const EmpiricalMean& input, const KernelSpec& rkhs_y);

/// Weight map of the kernel Bayes rule,
///   D(w) G (( D(w) G )^2 + delta I)^{-1} D(w) k,
/// with the squared system solved by LU (it is not symmetric).
Vector kbr_weights(const Matrix& gram_y, const Vector& prior_weights, double delta,
                   const Vector& k_obs);

/// Kernel Bayes rule with prior sum-rule weights w over train.xs already
/// computed. Output lives over train.xs.
EmpiricalMean kbr(const TrainingPairs& train, const Vector& prior_weights, double delta,
                  const Point& y_obs);

/// Kernel Bayes rule from an empirical prior over arbitrary anchors:
/// w = (G_X + n eps I)^{-1} G_{X X~} gamma, then kbr.
EmpiricalMean kbr(const TrainingPairs& train, const EmpiricalMean& prior, const RegParams& reg,
                  const Point& y_obs);

/// Kernel Bayes rule with a model-based prior: w = (G_X + n eps I)^{-1} M gamma.
EmpiricalMean kbr_model_prior(const TrainingPairs& train, const ModelMean& prior,
                              const RegParams& reg, const Point& y_obs);

struct NonParamStep {
  TrainingPairs train;
  double eps;
};

struct ModelBasedStep {
  NoiseModel model;
  KernelSpec rkhs;
};

using ChainStep = std::variant<NonParamStep, ModelBasedStep>;

/// Folds an input mean through a sequence of sum-rule steps. The whole
/// chain is checked for compatibility before any numerics; a model-based
/// step may not follow another model-based step.
KernelMean chain(const std::vector<ChainStep>& steps, const EmpiricalMean& input);

}  // namespace kbi
