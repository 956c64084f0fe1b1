#pragma once

#include "kbi/kernels.hpp"
#include "kbi/means.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace kbi {

/// A named deterministic map f: R^in -> R^out used as the mean of an
/// additive-noise model.
struct MeanFunction {
  std::string name;
  nlohmann::json params;
  int input_dim = 0;   // 0 = any
  int output_dim = 0;  // 0 = same as input
  std::function<Vector(const Vector&)> fn;

  Vector operator()(const Vector& x) const { return fn(x); }
};

/// Global registry of mean-function factories keyed by name. Ships with
/// "identity", "linear" (params {"A": [[...]]}) and "limacon" (params
/// {"b", "M", "eta"}). Thread-safe.
class MeanFunctionRegistry {
 public:
  using Factory = std::function<MeanFunction(const nlohmann::json& params)>;

  static MeanFunctionRegistry& instance();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const;
  MeanFunction make(const std::string& name, const nlohmann::json& params = {}) const;
  std::vector<std::string> names() const;

 private:
  MeanFunctionRegistry();
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

MeanFunction identity_function(int dim);
MeanFunction linear_function(const Matrix& a);

/// (1 + b sin(M theta')) (cos theta', sin theta') with theta' = atan2(x) + eta.
MeanFunction limacon_function(double b, int harmonics, double eta);

struct GaussianNoise {
  Matrix cov;
};

struct GaussianMixtureNoise {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
};

/// 1-D Laplace noise with density (rate/2) exp(-rate |e|).
struct LaplaceNoise {
  double rate;
};

/// 1-D symmetric Cauchy noise with the given scale.
struct CauchyNoise {
  double scale;
};

using Noise = std::variant<GaussianNoise, GaussianMixtureNoise, LaplaceNoise, CauchyNoise>;

/// Additive-noise conditional distribution y = f(x) + e.
class NoiseModel {
 public:
  NoiseModel(MeanFunction mean_fn, Noise noise);

  const MeanFunction& mean_fn() const { return mean_fn_; }
  const Noise& noise() const { return noise_; }
  int output_dim() const { return output_dim_; }

 private:
  MeanFunction mean_fn_;
  Noise noise_;
  int output_dim_;
};

/// Closed-form conditional kernel mean m_{Y|x} in the RKHS of `rkhs`.
///   Gaussian noise S, Gaussian kernel R  -> GaussianAtom(f(x), S + R)
///   Gaussian mixture                     -> MixtureAtom of (f(x)+mu_k, S_k + R)
///   Laplace noise, Laplace kernel        -> LaplaceAtom(f(x), rate, kernel rate)
///   Cauchy noise, Cauchy kernel          -> CauchyAtom(f(x), scale + kernel scale)
/// Any other pairing throws CapabilityError.
Atom conditional_mean(const NoiseModel& model, const Point& x, const KernelSpec& rkhs);

/// Throws CapabilityError or InputError when `model` has no closed-form
/// conditional mean in `rkhs`.
void check_compatible(const NoiseModel& model, const KernelSpec& rkhs);

double eval_conditional_mean(const NoiseModel& model, const Point& x, const Point& y,
                             const KernelSpec& rkhs);

/// n x l matrix with entry (i, j) = m_{Y|inputs_j}(evals_i).
Matrix cross_gram_model(const NoiseModel& model, const PointSet& inputs, const PointSet& evals,
                        const KernelSpec& rkhs);

/// Atoms for every row of `inputs`, sharing one covariance factorization.
std::vector<Atom> conditional_means(const NoiseModel& model, const PointSet& inputs,
                                    const KernelSpec& rkhs);

}  // namespace kbi
