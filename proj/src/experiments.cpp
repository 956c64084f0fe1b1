#include "kbi/experiments.hpp"

#include "kbi/errors.hpp"
#include "kbi/rules.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <string>

namespace kbi {

using nlohmann::json;

unsigned thread_count() {
  if (const char* env = std::getenv("KB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  std::vector<std::exception_ptr> errors(count);
  const auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

Matrix isotropic(double var, int dim) { return var * Matrix::Identity(dim, dim); }

PointSet uniform_box(RngStream& rng, std::size_t n, int dim, double box) {
  PointSet out(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = rng.uniform(-box, box);
  return out;
}

EmpiricalMean uniform_mean(const KernelSpec& k, const PointSet& anchors) {
  const auto n = anchors.rows();
  return EmpiricalMean(k, anchors, Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

std::vector<std::vector<ResultRow>> run_replicates(
    std::size_t count, unsigned threads, const std::function<std::vector<ResultRow>(std::size_t)>& fn) {
  std::vector<std::vector<ResultRow>> out(count);
  parallel_for(count, threads, [&](std::size_t r) { out[r] = fn(r); });
  return out;
}

std::vector<ResultRow> flatten(std::vector<std::vector<ResultRow>> parts) {
  std::vector<ResultRow> rows;
  for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
  return rows;
}

// Means over replicates, keyed by metric then axis value, for the manifest.
json summarize(const std::vector<ResultRow>& rows) {
  std::map<std::string, std::map<double, std::pair<double, std::size_t>>> acc;
  for (const auto& r : rows) {
    auto& cell = acc[r.metric][r.axis_value];
    cell.first += r.value;
    ++cell.second;
  }
  json out = json::object();
  for (const auto& [metric, cells] : acc) {
    json arr = json::array();
    for (const auto& [x, cell] : cells) {
      arr.push_back({{"axis_value", x}, {"mean", cell.first / static_cast<double>(cell.second)},
                     {"count", cell.second}});
    }
    out[metric] = arr;
  }
  return out;
}

ExperimentOutput ground_truth(const ExperimentConfig& c, const GroundTruthParams& p, unsigned threads) {
  const LinearSettings& s = p.linear;
  const int dim = static_cast<int>(s.a.cols());
  const LinearGaussianModel truth(s.a, s.sigma);
  const KernelSpec kx = KernelSpec::gaussian(isotropic(s.kernel_x_var, dim));
  const KernelSpec ky = KernelSpec::gaussian(isotropic(s.kernel_y_var, static_cast<int>(s.a.rows())));

  auto parts = run_replicates(c.replicates, threads, [&](std::size_t r) {
    RngStream rng(c.seed, "ground-truth", r);
    const PointSet xs = uniform_box(rng, s.n, dim, s.box);
    const PointSet ys = truth.sample(rng, xs);
    const PointSet inputs = s.mixture.sample(rng, s.l);
    const EmpiricalMean input = uniform_mean(kx, inputs);
    const TrainingPairs train(xs, ys, kx, ky);

    std::vector<ResultRow> rows;
    for (double eps : p.epsilons) {
      const EmpiricalMean est = non_ksr(train, input, eps);
      rows.push_back({r, "epsilon", eps, "nonksr", error_nonksr(est, truth, s.mixture)});
    }
    rows.push_back({r, "none", 0.0, "mbksr", error_mbksr(input, truth, truth, s.mixture, ky.covariance())});
    const LinearGaussianModel fitted = fit_linear_gaussian(xs, ys);
    rows.push_back({r, "none", 0.0, "mbksr_est", error_mbksr(input, fitted, truth, s.mixture, ky.covariance())});
    return rows;
  });
  ExperimentOutput out;
  out.rows = flatten(std::move(parts));
  out.summary = summarize(out.rows);
  return out;
}

ExperimentOutput misspecification(const ExperimentConfig& c, const MisspecificationParams& p,
                                  unsigned threads) {
  const LinearSettings& s = p.linear;
  const int dim = static_cast<int>(s.a.cols());
  const LinearGaussianModel truth(s.a, s.sigma);
  const KernelSpec kx = KernelSpec::gaussian(isotropic(s.kernel_x_var, dim));
  const Matrix ry = isotropic(s.kernel_y_var, static_cast<int>(s.a.rows()));

  auto parts = run_replicates(c.replicates, threads, [&](std::size_t r) {
    RngStream rng(c.seed, "misspecification", r);
    const EmpiricalMean input = uniform_mean(kx, s.mixture.sample(rng, s.l));
    std::vector<ResultRow> rows;
    for (double scale : p.scales) {
      const LinearGaussianModel scaled_a(scale * s.a, s.sigma);
      const LinearGaussianModel scaled_sigma(s.a, scale * s.sigma);
      rows.push_back({r, "sigma", scale, "scale_A", error_mbksr(input, scaled_a, truth, s.mixture, ry)});
      rows.push_back({r, "sigma", scale, "scale_Sigma", error_mbksr(input, scaled_sigma, truth, s.mixture, ry)});
    }
    return rows;
  });
  ExperimentOutput out;
  out.rows = flatten(std::move(parts));
  out.summary = summarize(out.rows);
  return out;
}

ExperimentOutput chain_experiment(const ExperimentConfig& c, const ChainParams& p, unsigned threads) {
  const int dim = static_cast<int>(p.a1.cols());
  const LinearGaussianModel first(p.a1, p.sigma1);
  const LinearGaussianModel second(p.a2, p.sigma2);
  const KernelSpec kx = KernelSpec::gaussian(isotropic(p.kernel_x_var, dim));
  const KernelSpec ky = KernelSpec::gaussian(isotropic(p.kernel_y_var, first.output_dim()));
  const KernelSpec kz = KernelSpec::gaussian(isotropic(p.kernel_z_var, second.output_dim()));

  auto parts = run_replicates(c.replicates, threads, [&](std::size_t r) {
    RngStream rng(c.seed, "chain", r);
    const PointSet xs = uniform_box(rng, p.n, dim, p.box);
    const PointSet ys = first.sample(rng, xs);
    const PointSet zs = second.sample(rng, ys);
    const EmpiricalMean input = uniform_mean(kx, p.mixture.sample(rng, p.l));
    const TrainingPairs train1(xs, ys, kx, ky);
    const TrainingPairs train2(ys, zs, ky, kz);

    std::vector<ResultRow> rows;
    for (double eps : p.epsilons) {
      const NonParamStep step1{train1, eps};
      const NonParamStep step2{train2, eps};
      const ModelBasedStep model1{first.noise_model(), ky};
      const ModelBasedStep model2{second.noise_model(), kz};

      const auto nn = std::get<EmpiricalMean>(chain({step1, step2}, input));
      rows.push_back({r, "epsilon", eps, to_string(ChainVariant::NonNon),
                      error_chain_empirical(nn, first, second, p.mixture)});

      const auto nm = std::get<ModelMean>(chain({step1, model2}, input));
      rows.push_back({r, "epsilon", eps, to_string(ChainVariant::NonThenModel),
                      error_chain_non_then_model(nm.weights, ys, second, first, second, p.mixture,
                                                 kz.covariance())});

      const auto mn = std::get<EmpiricalMean>(chain({model1, step2}, input));
      rows.push_back({r, "epsilon", eps, to_string(ChainVariant::ModelThenNon),
                      error_chain_empirical(mn, first, second, p.mixture)});
    }
    return rows;
  });
  ExperimentOutput out;
  out.rows = flatten(std::move(parts));
  out.summary = summarize(out.rows);
  return out;
}

PointSet rows_of(const PointSet& m, Eigen::Index begin, Eigen::Index end) {
  return m.middleRows(begin, end - begin);
}

}  // namespace

FilterModel make_ssm_filter_model(const SsmConfig& ssm, const std::string& method,
                                  const PointSet& states, const PointSet& observations,
                                  const HyperParams& p, double eta) {
  const KernelSpec kx = KernelSpec::gaussian_isotropic(p.sigma_x, 2);
  const KernelSpec kz = KernelSpec::gaussian_isotropic(p.sigma_z, 2);
  TrainingPairs train(states, observations, kx, kz);
  const RegParams reg(p.epsilon, p.delta);
  KernelMean prior = uniform_mean(kx, states);
  if (method == "proposed") {
    return FilterModel{std::move(train), ModelTransition{ssm_transition_model(ssm, eta), {}}, reg,
                       std::move(prior)};
  }
  if (method == "fkbf") {
    const auto n = states.rows();
    NonParamTransition pairs{rows_of(states, 0, n - 1), rows_of(states, 1, n)};
    return FilterModel{std::move(train), std::move(pairs), reg, std::move(prior)};
  }
  throw InputError("unknown filter method '" + method + "'");
}

double filter_mse(const KbrFilter& filter, const PointSet& states, const PointSet& observations,
                  PointEstimator estimator) {
  const auto steps = run_filter(filter, observations, estimator);
  double sum = 0.0;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    sum += (states.row(static_cast<Eigen::Index>(t)).transpose() - steps[t].estimate).squaredNorm();
  }
  return sum / static_cast<double>(steps.size());
}

CvResult cross_validate_filter(const SsmConfig& ssm, const std::string& method,
                               const SsmTrajectory& train, const std::vector<HyperParams>& grid,
                               PointEstimator estimator) {
  const Eigen::Index n = train.states.rows();
  const Eigen::Index half = n / 2;
  return cross_validate(grid, [&](const HyperParams& p, int fold) {
    const Eigen::Index tb = fold == 0 ? 0 : half;
    const Eigen::Index te = fold == 0 ? half : n;
    const Eigen::Index vb = fold == 0 ? half : 0;
    const Eigen::Index ve = fold == 0 ? n : half;
    const KbrFilter filter(make_ssm_filter_model(ssm, method, rows_of(train.states, tb, te),
                                                 rows_of(train.observations, tb, te), p, ssm.eta));
    return filter_mse(filter, rows_of(train.states, vb, ve), rows_of(train.observations, vb, ve),
                      estimator);
  });
}

namespace {

ExperimentOutput filter_bench(const ExperimentConfig& c, const FilterBenchParams& p, unsigned threads) {
  const auto grid = make_grid(p.cv_epsilons, p.cv_deltas, p.cv_sigma_x, p.cv_sigma_z);
  const PointEstimator estimator =
      p.estimator == "argmax" ? PointEstimator::ArgmaxWeight : PointEstimator::Preimage;

  struct Cell {
    std::size_t n;
    std::string method;
    CvResult cv;
  };
  std::vector<Cell> cells;
  for (auto n : p.sizes)
    for (const auto& m : p.methods) cells.push_back({n, m, {}});

  parallel_for(cells.size(), threads, [&](std::size_t i) {
    SsmConfig ssm = p.ssm;
    ssm.train_size = cells[i].n;
    const SsmData data = simulate_ssm(ssm, p.cv_seed, 1'000'000 + cells[i].n);
    cells[i].cv = cross_validate_filter(ssm, cells[i].method, data.train, grid, estimator);
  });

  const std::size_t runs = c.replicates * cells.size();
  std::vector<std::vector<ResultRow>> parts(runs);
  parallel_for(runs, threads, [&](std::size_t k) {
    const std::size_t rep = k / cells.size();
    const Cell& cell = cells[k % cells.size()];
    SsmConfig ssm = p.ssm;
    ssm.train_size = cell.n;
    const SsmData data = simulate_ssm(ssm, c.seed, rep);
    const KbrFilter filter(make_ssm_filter_model(ssm, cell.method, data.train.states,
                                                 data.train.observations, cell.cv.best,
                                                 ssm.test_eta()));
    const double mse = filter_mse(filter, data.test.states, data.test.observations, estimator);
    parts[k] = {{rep, "n", static_cast<double>(cell.n), cell.method, mse}};
  });

  ExperimentOutput out;
  out.rows = flatten(std::move(parts));
  out.summary = summarize(out.rows);
  json sel = json::array();
  for (const auto& cell : cells) {
    sel.push_back({{"n", cell.n},
                   {"method", cell.method},
                   {"epsilon", cell.cv.best.epsilon},
                   {"delta", cell.cv.best.delta},
                   {"sigma_x", cell.cv.best.sigma_x},
                   {"sigma_z", cell.cv.best.sigma_z},
                   {"cv_score", cell.cv.score},
                   {"cv_failures", cell.cv.failures.size()}});
  }
  out.summary["cv_selection"] = sel;
  return out;
}

ExperimentOutput rate_experiment(const ExperimentConfig& c, const RateCheckParams& p, unsigned threads) {
  const LinearGaussianModel truth(p.a, p.sigma);
  const int dim = truth.input_dim();
  const KernelSpec kx = KernelSpec::gaussian(Matrix::Identity(dim, dim));
  const Matrix ry = isotropic(p.kernel_y_var, truth.output_dim());

  const std::size_t cells = p.sizes.size() * c.replicates;
  std::vector<double> errors(cells);
  parallel_for(cells, threads, [&](std::size_t k) {
    const std::size_t l = p.sizes[k / c.replicates];
    const std::size_t rep = k % c.replicates;
    RngStream rng(c.seed, "rate-check/" + std::to_string(l), rep);
    const EmpiricalMean input = uniform_mean(kx, p.mixture.sample(rng, l));
    errors[k] = std::sqrt(std::max(0.0, error_mbksr(input, truth, truth, p.mixture, ry)));
  });

  const RateResult rate = rate_check(
      [&](std::size_t l, std::size_t rep) {
        const auto s = static_cast<std::size_t>(
            std::find(p.sizes.begin(), p.sizes.end(), l) - p.sizes.begin());
        return errors[s * c.replicates + rep];
      },
      p.sizes, c.replicates);

  ExperimentOutput out;
  for (std::size_t rep = 0; rep < c.replicates; ++rep) {
    for (std::size_t s = 0; s < p.sizes.size(); ++s) {
      out.rows.push_back({rep, "l", static_cast<double>(p.sizes[s]), "mbksr_error",
                          errors[s * c.replicates + rep]});
    }
  }
  out.summary = summarize(out.rows);
  out.summary["slope"] = rate.slope;
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, unsigned threads) {
  return std::visit(
      [&](const auto& p) -> ExperimentOutput {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GroundTruthParams>) return ground_truth(config, p, threads);
        if constexpr (std::is_same_v<T, MisspecificationParams>) return misspecification(config, p, threads);
        if constexpr (std::is_same_v<T, ChainParams>) return chain_experiment(config, p, threads);
        if constexpr (std::is_same_v<T, FilterBenchParams>) return filter_bench(config, p, threads);
        if constexpr (std::is_same_v<T, RateCheckParams>) return rate_experiment(config, p, threads);
      },
      config.params);
}

}  // namespace kbi
