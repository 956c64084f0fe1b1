#include "kbi/filter.hpp"

#include "kbi/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace kbi {

namespace {

void check_transition(const FilterModel& m) {
  const KernelSpec& kx = m.train.kernel_x;
  if (const auto* mt = std::get_if<ModelTransition>(&m.transition)) {
    if (mt->model.output_dim() != kx.dim()) {
      throw ConfigError("transition", "transition output dimension does not match state kernel");
    }
    check_compatible(mt->model, kx);
  } else {
    const auto& np = std::get<NonParamTransition>(m.transition);
    if (np.from.rows() == 0 || np.from.rows() != np.to.rows()) {
      throw ConfigError("transition", "transition pairs must be non-empty and of equal length");
    }
    if (np.from.cols() != kx.dim() || np.to.cols() != kx.dim()) {
      throw ConfigError("transition", "transition pairs do not match state dimension");
    }
  }
  if (rkhs_of(m.prior).dim() != kx.dim() || !(rkhs_of(m.prior) == kx)) {
    throw ConfigError("prior", "prior must live in the state RKHS");
  }
}

Matrix nonparam_transition(const NonParamTransition& np, const PointSet& xs,
                           const KernelSpec& kx, double eps) {
  // G_{X, to} (G_from + n eps I)^{-1} G_{from, X}
  const NonKsrOperator op(np.from, kx, eps);
  const Matrix coeffs = op.solve(gram(kx, np.from, xs));
  return gram(kx, xs, np.to) * coeffs;
}

}  // namespace

KbrFilter::KbrFilter(FilterModel model)
    : model_(std::move(model)),
      sum_rule_(model_.train.xs, model_.train.kernel_x, model_.reg.epsilon) {
  check_transition(model_);
  gram_z_ = gram(model_.train.kernel_y, model_.train.ys);
  if (const auto* mt = std::get_if<ModelTransition>(&model_.transition)) {
    time_variant_ = static_cast<bool>(mt->schedule);
    if (!time_variant_) {
      static_transition_ =
          cross_gram_model(mt->model, model_.train.xs, model_.train.xs, model_.train.kernel_x);
    }
  } else {
    static_transition_ =
        nonparam_transition(std::get<NonParamTransition>(model_.transition), model_.train.xs,
                            model_.train.kernel_x, model_.reg.epsilon);
  }
}

Matrix KbrFilter::transition_matrix(std::size_t t) const {
  if (!time_variant_) return static_transition_;
  const auto& mt = std::get<ModelTransition>(model_.transition);
  const NoiseModel step = mt.schedule(t);
  return cross_gram_model(step, model_.train.xs, model_.train.xs, model_.train.kernel_x);
}

FilterState KbrFilter::init(const Point& z1) const {
  const Vector w = std::visit([&](const auto& p) { return sum_rule_.weights(p); }, model_.prior);
  const Vector k = kernel_column(model_.train.kernel_y, model_.train.ys, z1);
  return FilterState{1, kbr_weights(gram_z_, w, model_.reg.delta, k)};
}

Vector KbrFilter::predict(const FilterState& state) const {
  if (state.alpha.size() != static_cast<Eigen::Index>(model_.train.size())) {
    throw InputError("predict: weight vector does not match training size");
  }
  if (time_variant_) return sum_rule_.solve(Vector(transition_matrix(state.t + 1) * state.alpha));
  return sum_rule_.solve(Vector(static_transition_ * state.alpha));
}

FilterState KbrFilter::update(const FilterState& state, const Vector& beta, const Point& z) const {
  const Vector k = kernel_column(model_.train.kernel_y, model_.train.ys, z);
  return FilterState{state.t + 1, kbr_weights(gram_z_, beta, model_.reg.delta, k)};
}

EmpiricalMean KbrFilter::posterior(const FilterState& state) const {
  return EmpiricalMean(model_.train.kernel_x, model_.train.xs, state.alpha);
}

double preimage_objective(const EmpiricalMean& mean, const Point& x) {
  const Vector k = kernel_column(mean.spec, mean.anchors, x);
  const double norm_sq = mean.weights.dot(gram(mean.spec, mean.anchors) * mean.weights);
  return mean.spec.peak() - 2.0 * mean.weights.dot(k) + norm_sq;
}

Point argmax_weight_anchor(const EmpiricalMean& mean) {
  Eigen::Index best = 0;
  mean.weights.maxCoeff(&best);
  return mean.anchors.row(best).transpose();
}

PreimageResult preimage(const EmpiricalMean& mean, const PreimageOptions& options) {
  if (mean.spec.family() != KernelFamily::Gaussian) {
    throw CapabilityError("preimage: requires a Gaussian kernel");
  }
  if (!(mean.weights.maxCoeff() > 0.0)) {
    throw InputError("preimage: needs at least one positive weight");
  }
  const double peak = mean.spec.peak();
  const Point anchor = argmax_weight_anchor(mean);

  PreimageResult result;
  result.point = anchor;
  Vector k = kernel_column(mean.spec, mean.anchors, anchor);
  Vector wk = mean.weights.cwiseProduct(k);
  double objective = peak - 2.0 * wk.sum();
  result.objective_trace.push_back(objective);

  for (int it = 0; it < options.max_iterations; ++it) {
    const double denom = wk.sum();
    if (!std::isfinite(denom) || std::abs(denom) < 1e-300) {
      result.point = anchor;
      result.fell_back = true;
      break;
    }
    const Point next = mean.anchors.transpose() * (wk / denom);
    if (!next.allFinite()) {
      result.point = anchor;
      result.fell_back = true;
      break;
    }
    const Vector k_next = kernel_column(mean.spec, mean.anchors, next);
    const Vector wk_next = mean.weights.cwiseProduct(k_next);
    const double obj_next = peak - 2.0 * wk_next.sum();
    if (obj_next > objective) break;
    const double step = (next - result.point).norm();
    result.point = next;
    result.iterations = it + 1;
    wk = wk_next;
    objective = obj_next;
    result.objective_trace.push_back(objective);
    if (step < options.tolerance) break;
  }
  return result;
}

std::vector<FilterStep> run_filter(const KbrFilter& filter, const PointSet& observations,
                                   PointEstimator estimator) {
  if (observations.rows() == 0) throw InputError("run_filter: no observations");
  if (observations.cols() != filter.model().train.kernel_y.dim()) {
    throw InputError("run_filter: observation dimension does not match kernel");
  }
  const auto estimate = [&](const FilterState& s) -> Point {
    const EmpiricalMean post = filter.posterior(s);
    if (estimator == PointEstimator::ArgmaxWeight || post.weights.maxCoeff() <= 0.0) {
      return argmax_weight_anchor(post);
    }
    return preimage(post).point;
  };

  std::vector<FilterStep> steps;
  steps.reserve(static_cast<std::size_t>(observations.rows()));
  std::size_t t = 1;
  try {
    FilterState state = filter.init(observations.row(0).transpose());
    steps.push_back({state, estimate(state)});
    for (t = 2; t <= static_cast<std::size_t>(observations.rows()); ++t) {
      const Vector beta = filter.predict(state);
      state = filter.update(state, beta, observations.row(static_cast<Eigen::Index>(t - 1)).transpose());
      if (!state.alpha.allFinite()) throw NumericError("non-finite filter weights");
      steps.push_back({state, estimate(state)});
    }
  } catch (const NumericError& e) {
    throw NumericError("filter failed at time " + std::to_string(t) + ": " + e.what());
  }
  return steps;
}

}  // namespace kbi
