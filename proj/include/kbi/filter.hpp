#pragma once

#include "kbi/means.hpp"
#include "kbi/noise_models.hpp"
#include "kbi/rules.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace kbi {

/// Transition given by an additive-noise model. When `schedule` is set,
/// schedule(t) is the model that moves x_{t-1} to x_t and the transition
/// matrix is rebuilt at every step.
struct ModelTransition {
  NoiseModel model;
  std::function<NoiseModel(std::size_t t)> schedule;
};

/// Transition learned from state pairs (from_i, to_i) with the sum-rule
/// regularizer of the filter.
struct NonParamTransition {
  PointSet from;
  PointSet to;
};

using Transition = std::variant<ModelTransition, NonParamTransition>;

struct FilterModel {
  TrainingPairs train;  // (state X_i, observation Z_i)
  Transition transition;
  RegParams reg;
  KernelMean prior;
};

struct FilterState {
  std::size_t t = 1;
  Vector alpha;
};

/// Kernel Bayes filter. Observations are learned from `train`; the
/// prediction step uses either the model-based sum rule (closed-form
/// conditional means) or the nonparametric one over transition pairs.
/// G_Z and the factorization of (G_X + n eps I) are computed once.
class KbrFilter {
 public:
  explicit KbrFilter(FilterModel model);

  FilterState init(const Point& z1) const;

  /// beta = (G_X + n eps I)^{-1} G_{X'|X} alpha.
  Vector predict(const FilterState& state) const;

  /// alpha_t = D(beta) G_Z ((D(beta) G_Z)^2 + delta I)^{-1} D(beta) k_Z(z_t).
  FilterState update(const FilterState& state, const Vector& beta, const Point& z) const;

  EmpiricalMean posterior(const FilterState& state) const;

  const FilterModel& model() const { return model_; }
  const Matrix& gram_z() const { return gram_z_; }

  /// Matrix whose product with alpha evaluates the predictive mean at
  /// every training state, for the transition into time t.
  Matrix transition_matrix(std::size_t t) const;

 private:
  FilterModel model_;
  NonKsrOperator sum_rule_;
  Matrix gram_z_;
  Matrix static_transition_;
  bool time_variant_ = false;
};

struct PreimageOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

struct PreimageResult {
  Point point;
  int iterations = 0;
  bool fell_back = false;
  /// k(x,x) - 2 m(x) at each accepted iterate, starting at the initial
  /// anchor. Differs from the squared distance by the constant ||m||^2.
  std::vector<double> objective_trace;
};

/// ||k(., x) - m||^2.
double preimage_objective(const EmpiricalMean& mean, const Point& x);

/// Fixed-point preimage for a Gaussian-kernel mean:
///   x <- sum_i w_i k(x, X_i) X_i / sum_i w_i k(x, X_i),
/// started at the largest-weight anchor. A step that would increase the
/// objective ends the iteration. Requires one positive weight.
PreimageResult preimage(const EmpiricalMean& mean, const PreimageOptions& options = {});

Point argmax_weight_anchor(const EmpiricalMean& mean);

enum class PointEstimator { Preimage, ArgmaxWeight };

struct FilterStep {
  FilterState state;
  Point estimate;
};

/// Runs init on z_1 and (predict, update) for t = 2..T. A numeric failure
/// is rethrown as NumericError naming the time index.
std::vector<FilterStep> run_filter(const KbrFilter& filter, const PointSet& observations,
                                   PointEstimator estimator = PointEstimator::Preimage);

}  // namespace kbi
