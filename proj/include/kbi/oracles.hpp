#pragma once

#include "kbi/means.hpp"
#include "kbi/noise_models.hpp"
#include "kbi/random.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kbi {

/// pi(x) = sum_i xi_i d_G(x; mu_i, W_i).
struct GaussianMixture {
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covs);

  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;

  std::size_t size() const { return weights.size(); }
  int dim() const { return static_cast<int>(means.front().size()); }
  double density(const Point& x) const;
  PointSet sample(RngStream& rng, std::size_t count) const;
};

/// Four-component 2-D test mixture: means (4,5), (-3,-5), (-6,4), (5,-4),
/// covariances diag(2, 0.5), I, I, I, equal weights.
GaussianMixture benchmark_mixture();

/// y = A x + e, e ~ N(0, Sigma).
struct LinearGaussianModel {
  LinearGaussianModel(Matrix a, Matrix sigma);

  Matrix a;
  Matrix sigma;

  int input_dim() const { return static_cast<int>(a.cols()); }
  int output_dim() const { return static_cast<int>(a.rows()); }
  NoiseModel noise_model() const;
  PointSet sample(RngStream& rng, const PointSet& inputs) const;
};

/// Law of y = A x + e for x ~ pi: the mixture with means A mu_i and
/// covariances Sigma + A W_i A^T.
GaussianMixture push_forward(const LinearGaussianModel& model, const GaussianMixture& input);

/// Kernel mean of the push-forward: sum_i xi_i d_G(.; A mu_i, R + Sigma + A W_i A^T).
ModelMean analytic_output_mean(const LinearGaussianModel& model, const GaussianMixture& input,
                               const KernelSpec& rkhs_y);

/// Kernel mean of z after two linear-Gaussian steps; atom covariances are
/// R_Z + Sigma_2 + A_2 (Sigma_1 + A_1 W_i A_1^T) A_2^T.
ModelMean analytic_chain_output_mean(const LinearGaussianModel& first,
                                     const LinearGaussianModel& second,
                                     const GaussianMixture& input, const KernelSpec& rkhs_z);

/// ||m_Q||^2 = xi^T E xi with E_ij = d_G(0; nu_i - nu_j, R + V_i + V_j),
/// where Q is the mixture with means nu and covariances V.
double output_norm_sq(const GaussianMixture& output, const Matrix& rkhs_cov);

/// Squared RKHS error of an empirical estimate of m_Q:
///   xi^T E xi - 2 w^T m_Q(Y) + w^T G_Y w.
/// Covers the Non-KSR estimator and any chain ending in a Non-KSR step.
double empirical_error_sq(const EmpiricalMean& estimate, const GaussianMixture& output);

/// Squared RKHS error of a Mb-KSR estimate that pushes inputs x_i with
/// weights gamma through an assumed linear-Gaussian model:
///   xi^T E xi - 2 gamma^T F xi + gamma^T H gamma,
///   F_ij = d_G(0; A~ x_i - nu_j, R + Sigma~ + V_j),
///   H_ij = d_G(0; A~ (x_i - x_j), R + 2 Sigma~).
double model_error_sq(const Vector& gamma, const PointSet& inputs,
                      const LinearGaussianModel& assumed, const GaussianMixture& output,
                      const Matrix& rkhs_cov);

/// Non-KSR estimate for a single linear-Gaussian step.
double error_nonksr(const EmpiricalMean& estimate, const LinearGaussianModel& truth,
                    const GaussianMixture& input);

/// Mb-KSR estimate with an assumed model (A~, Sigma~) applied to the
/// empirical input mean sum_i gamma_i k(., x_i).
double error_mbksr(const EmpiricalMean& input, const LinearGaussianModel& assumed,
                   const LinearGaussianModel& truth, const GaussianMixture& truth_input,
                   const Matrix& rkhs_cov);

enum class ChainVariant { NonNon, NonThenModel, ModelThenNon };

std::string to_string(ChainVariant variant);

/// Chains ending in a Non-KSR step: the estimate is empirical over Z.
double error_chain_empirical(const EmpiricalMean& estimate, const LinearGaussianModel& first,
                             const LinearGaussianModel& second, const GaussianMixture& input);

/// Non-KSR then Mb-KSR: weights w over intermediate anchors Y_i pushed
/// through the assumed second model.
double error_chain_non_then_model(const Vector& w, const PointSet& ys,
                                  const LinearGaussianModel& assumed_second,
                                  const LinearGaussianModel& first,
                                  const LinearGaussianModel& second,
                                  const GaussianMixture& input, const Matrix& rkhs_cov);

/// Ordinary least squares fit of y = A x + e without intercept; Sigma is
/// the residual covariance (divided by n).
LinearGaussianModel fit_linear_gaussian(const PointSet& xs, const PointSet& ys);

// Synthetic state space model.

struct SsmConfig {
  double b = 0.4;
  int harmonics = 8;
  double eta = 1.0;
  std::optional<double> eta_test;
  double sigma_h = 0.2;
  double sigma_o = 0.05;
  std::optional<GaussianMixtureNoise> transition_mixture;
  std::size_t horizon = 100;
  std::size_t train_size = 200;

  double test_eta() const { return eta_test.value_or(eta); }
};

struct SsmTrajectory {
  std::vector<double> theta;
  PointSet states;
  PointSet observations;
};

struct SsmData {
  SsmTrajectory train;
  SsmTrajectory test;
};

/// Noiseless curve point (1 + b sin(M theta)) (cos theta, sin theta).
Point limacon_point(double b, int harmonics, double theta);

/// Observation map (sign(u) |u|^{1/2}, sign(v) |v|^{1/2}).
Point observation_map(const Point& x);

/// Simulates the training trajectory (length train_size, angle step eta)
/// and then an independent test trajectory (length horizon, angle step
/// test_eta()). Observation noise is Laplace with rate sqrt(2) / sigma_o
/// per coordinate; transition noise is N(0, sigma_h^2 I) unless a mixture
/// is configured. The curve angle of x_{t+1} is atan2(x_t) + eta, so the
/// states form a Markov chain; theta[t] records the angle used for x_t.
SsmData simulate_ssm(const SsmConfig& config, std::uint64_t seed, std::uint64_t replicate = 0);

/// Transition model x' = limacon(atan2(x) + eta) + noise used by the
/// model-based filter.
NoiseModel ssm_transition_model(const SsmConfig& config, double eta);

// Model selection and rate checks.

struct HyperParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma_x = 0.0;
  double sigma_z = 0.0;

  auto operator<=>(const HyperParams&) const = default;
};

std::string to_string(const HyperParams& p);

struct CvFailure {
  HyperParams params;
  std::string message;
};

struct CvResult {
  HyperParams best;
  double score = 0.0;
  std::vector<CvFailure> failures;
};

/// Twofold cross-validation. fold_score(p, fold) trains on one contiguous
/// half and scores the other (fold 0: first half trains). Returns the grid
/// point with the least mean score; ties go to the lexicographically
/// smallest point. Points raising NumericError or scoring non-finite are
/// skipped; if every point fails, NumericError lists the failures.
CvResult cross_validate(std::vector<HyperParams> grid,
                        const std::function<double(const HyperParams&, int fold)>& fold_score);

/// Cartesian product of per-parameter value lists.
std::vector<HyperParams> make_grid(const std::vector<double>& epsilons,
                                   const std::vector<double>& deltas,
                                   const std::vector<double>& sigma_xs,
                                   const std::vector<double>& sigma_zs);

struct RateResult {
  double slope = 0.0;
  std::vector<double> mean_errors;
};

/// Least-squares slope of log(mean error) against log(size), with
/// error(size, replicate) averaged over the replicates.
RateResult rate_check(const std::function<double(std::size_t size, std::size_t replicate)>& error,
                      const std::vector<std::size_t>& sizes, std::size_t replicates);

}  // namespace kbi
