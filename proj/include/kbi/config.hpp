#pragma once

#include "kbi/kernels.hpp"
#include "kbi/linalg.hpp"
#include "kbi/noise_models.hpp"
#include "kbi/oracles.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace kbi {

/// One linear-Gaussian regression problem with a mixture test input.
struct LinearSettings {
  std::size_t n = 500;         // training pairs
  std::size_t l = 500;         // draws for the input kernel mean
  double box = 10.0;           // training inputs uniform on [-box, box]^m
  double kernel_x_var = 0.1;   // input kernel R_X = kernel_x_var * I
  double kernel_y_var = 1.0;   // output kernel R_Y = kernel_y_var * I
  Matrix a = Matrix::Identity(2, 2);
  Matrix sigma = Matrix::Identity(2, 2);
  GaussianMixture mixture = benchmark_mixture();
};

struct GroundTruthParams {
  LinearSettings linear;
  std::vector<double> epsilons;
};

struct MisspecificationParams {
  LinearSettings linear;
  std::vector<double> scales;
};

struct ChainParams {
  std::size_t n = 500;
  std::size_t l = 500;
  double box = 10.0;
  double kernel_x_var = 0.1;
  double kernel_y_var = 0.1;
  double kernel_z_var = 1.0;
  Matrix a1 = Matrix::Identity(2, 2);
  Matrix sigma1 = Matrix::Identity(2, 2);
  Matrix a2 = Matrix::Identity(2, 2);
  Matrix sigma2 = Matrix::Identity(2, 2);
  GaussianMixture mixture = benchmark_mixture();
  std::vector<double> epsilons;
};

struct FilterBenchParams {
  SsmConfig ssm;
  std::vector<std::size_t> sizes;
  std::vector<std::string> methods;  // "proposed", "fkbf"
  std::vector<double> cv_epsilons;
  std::vector<double> cv_deltas;
  std::vector<double> cv_sigma_x;
  std::vector<double> cv_sigma_z;
  std::uint64_t cv_seed = 0;
  std::string estimator = "preimage";  // or "argmax"
};

struct RateCheckParams {
  std::vector<std::size_t> sizes;
  double kernel_y_var = 1.0;
  Matrix a = Matrix::Identity(2, 2);
  Matrix sigma = Matrix::Identity(2, 2);
  GaussianMixture mixture = benchmark_mixture();
};

using ExperimentParams = std::variant<GroundTruthParams, MisspecificationParams, ChainParams,
                                      FilterBenchParams, RateCheckParams>;

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  std::string output;
  ExperimentParams params;
  nlohmann::json raw;  // full config after overrides

  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

inline constexpr int kSchemaVersion = 1;

/// Names accepted in the "experiment" field.
std::vector<std::string> experiment_kinds();

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Reads `path`, applies `key=value` overrides on dotted paths, then parses.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Sets a dotted path. The value is parsed as JSON when possible and
/// otherwise stored as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// {"family":"gaussian","R":[[...]]}, {"family":"laplace","lambda":x} or
/// {"family":"cauchy","sigma":x}. `path` prefixes error field names.
KernelSpec kernel_from_json(const nlohmann::json& doc, const std::string& path = "kernel");
nlohmann::json kernel_to_json(const KernelSpec& spec);

/// {"f": {"name": ..., <params>}, "noise": {"kind": "gaussian", "Sigma": ...}}
/// with noise kinds gaussian, mixture (weights, means, covs), laplace
/// (lambda) and cauchy (sigma).
NoiseModel noise_model_from_json(const nlohmann::json& doc, const std::string& path = "model");

}  // namespace kbi
