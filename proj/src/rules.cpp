#include "kbi/rules.hpp"

#include "kbi/errors.hpp"

#include <cmath>
#include <string>

namespace kbi {

TrainingPairs::TrainingPairs(PointSet xs_, PointSet ys_, KernelSpec kx, KernelSpec ky)
    : xs(std::move(xs_)), ys(std::move(ys_)), kernel_x(std::move(kx)), kernel_y(std::move(ky)) {
  if (xs.rows() == 0 || xs.rows() != ys.rows()) {
    throw InputError("TrainingPairs: need n >= 1 pairs with |xs| = |ys|");
  }
  if (xs.cols() != kernel_x.dim() || ys.cols() != kernel_y.dim()) {
    throw InputError("TrainingPairs: point dimensions do not match the kernels");
  }
}

RegParams::RegParams(double eps, double del) : epsilon(eps), delta(del) {
  if (!(epsilon > 0.0) || !(delta > 0.0) || !std::isfinite(epsilon) || !std::isfinite(delta)) {
    throw InputError("RegParams: epsilon and delta must be > 0");
  }
}

namespace {

void require_positive_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("regularizer eps must be > 0");
}

Matrix regularized_gram(const Matrix& g, double eps) {
  Matrix a = g;
  a.diagonal().array() += static_cast<double>(g.rows()) * eps;
  return a;
}

}  // namespace

NonKsrOperator::NonKsrOperator(PointSet xs, KernelSpec kernel_x, double eps)
    : xs_(std::move(xs)), kernel_(std::move(kernel_x)) {
  require_positive_eps(eps);
  if (xs_.rows() == 0) throw InputError("NonKsrOperator: empty training set");
  gram_ = gram(kernel_, xs_);
  solver_ = SpdSolver(regularized_gram(gram_, eps));
}

Vector NonKsrOperator::weights(const EmpiricalMean& input) const {
  if (input.spec != kernel_) throw InputError("non_ksr: input mean is not in the input RKHS");
  return solver_.solve(Vector(gram(kernel_, xs_, input.anchors) * input.weights));
}

Vector NonKsrOperator::weights(const ModelMean& input) const {
  if (input.rkhs != kernel_) throw InputError("non_ksr: input mean is not in the input RKHS");
  Vector rhs = Vector::Zero(xs_.rows());
  for (std::size_t j = 0; j < input.atoms.size(); ++j) {
    const double g = input.weights[static_cast<Eigen::Index>(j)];
    for (Eigen::Index i = 0; i < xs_.rows(); ++i) {
      rhs[i] += g * eval_atom(input.atoms[j], xs_.row(i).data());
    }
  }
  return solver_.solve(rhs);
}

EmpiricalMean non_ksr(const TrainingPairs& train, const EmpiricalMean& input, double eps) {
  NonKsrOperator op(train, eps);
  return EmpiricalMean(train.kernel_y, train.ys, op.weights(input));
}

EmpiricalMean non_ksr(const TrainingPairs& train, const ModelMean& input, double eps) {
  NonKsrOperator op(train, eps);
  return EmpiricalMean(train.kernel_y, train.ys, op.weights(input));
}

ModelMean mb_ksr(const NoiseModel& model, const EmpiricalMean& input, const KernelSpec& rkhs_y) {
  return ModelMean(rkhs_y, conditional_means(model, input.anchors, rkhs_y), input.weights);
}

Vector kbr_weights(const Matrix& gram_y, const Vector& prior_weights, double delta,
                   const Vector& k_obs) {
  const Eigen::Index n = gram_y.rows();
  if (gram_y.cols() != n || prior_weights.size() != n || k_obs.size() != n) {
    throw InputError("kbr: dimension mismatch");
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) throw InputError("kbr: delta must be > 0");
  const Matrix dg = prior_weights.asDiagonal() * gram_y;
  Matrix system = dg * dg;
  system.diagonal().array() += delta;
  const Vector rhs = prior_weights.cwiseProduct(k_obs);
  return dg * solve_general(system, rhs);
}

EmpiricalMean kbr(const TrainingPairs& train, const Vector& prior_weights, double delta,
                  const Point& y_obs) {
  const Matrix gy = gram(train.kernel_y, train.ys);
  const Vector k = kernel_column(train.kernel_y, train.ys, y_obs);
  return EmpiricalMean(train.kernel_x, train.xs, kbr_weights(gy, prior_weights, delta, k));
}

EmpiricalMean kbr(const TrainingPairs& train, const EmpiricalMean& prior, const RegParams& reg,
                  const Point& y_obs) {
  NonKsrOperator op(train, reg.epsilon);
  return kbr(train, op.weights(prior), reg.delta, y_obs);
}

EmpiricalMean kbr_model_prior(const TrainingPairs& train, const ModelMean& prior,
                              const RegParams& reg, const Point& y_obs) {
  NonKsrOperator op(train, reg.epsilon);
  return kbr(train, op.weights(prior), reg.delta, y_obs);
}

namespace {

std::string step_name(std::size_t i) { return "chain step " + std::to_string(i); }

void check_chain(const std::vector<ChainStep>& steps, const EmpiricalMean& input) {
  if (steps.empty()) throw ConfigError("chain", "at least one step is required");
  const KernelSpec* current = &input.spec;
  bool model_output = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (const auto* np = std::get_if<NonParamStep>(&steps[i])) {
      require_positive_eps(np->eps);
      if (np->train.kernel_x != *current) {
        throw ConfigError(step_name(i), "input kernel does not match the incoming mean's RKHS");
      }
      current = &np->train.kernel_y;
      model_output = false;
    } else {
      const auto& mb = std::get<ModelBasedStep>(steps[i]);
      if (model_output) {
        throw ConfigError(step_name(i),
                          "a model-based step cannot consume a model-based mean");
      }
      if (current->dim() != (mb.model.mean_fn().input_dim > 0 ? mb.model.mean_fn().input_dim
                                                               : current->dim())) {
        throw ConfigError(step_name(i), "model input dimension does not match incoming mean");
      }
      try {
        check_compatible(mb.model, mb.rkhs);
      } catch (const std::exception& e) {
        throw ConfigError(step_name(i), e.what());
      }
      current = &mb.rkhs;
      model_output = true;
    }
  }
}

}  // namespace

KernelMean chain(const std::vector<ChainStep>& steps, const EmpiricalMean& input) {
  check_chain(steps, input);
  KernelMean current = input;
  for (const auto& step : steps) {
    if (const auto* np = std::get_if<NonParamStep>(&step)) {
      current = std::visit([&](const auto& m) -> KernelMean { return non_ksr(np->train, m, np->eps); },
                           current);
    } else {
      const auto& mb = std::get<ModelBasedStep>(step);
      current = mb_ksr(mb.model, std::get<EmpiricalMean>(current), mb.rkhs);
    }
  }
  return current;
}

}  // namespace kbi
