#pragma once

#include "kbi/config.hpp"
#include "kbi/csv.hpp"
#include "kbi/filter.hpp"
#include "kbi/oracles.hpp"

#include <json.hpp>

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace kbi {

/// Worker count from KB_THREADS, else the hardware concurrency (at least 1).
unsigned thread_count();

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots. The exception of the lowest failing index
/// is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  nlohmann::json summary = nlohmann::json::object();
};

ExperimentOutput run_experiment(const ExperimentConfig& config, unsigned threads);

// Building blocks shared with the tests and the acceptance checks.

/// Filter model for the synthetic state space model. "proposed" uses the
/// model-based transition with angle step `eta`; "fkbf" learns it from the
/// consecutive training states.
FilterModel make_ssm_filter_model(const SsmConfig& ssm, const std::string& method,
                                  const PointSet& states, const PointSet& observations,
                                  const HyperParams& p, double eta);

/// Mean over t of ||estimate_t - x_t||^2.
double filter_mse(const KbrFilter& filter, const PointSet& states, const PointSet& observations,
                  PointEstimator estimator);

/// Twofold contiguous-half cross-validation of one filter method on a
/// training trajectory.
CvResult cross_validate_filter(const SsmConfig& ssm, const std::string& method,
                               const SsmTrajectory& train, const std::vector<HyperParams>& grid,
                               PointEstimator estimator);

}  // namespace kbi
