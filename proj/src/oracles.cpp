#include "kbi/oracles.hpp"

#include "kbi/errors.hpp"
#include "kbi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kbi {

namespace {

void require_spd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || !is_symmetric(m)) throw InputError(std::string(what) + " must be symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw InputError(std::string(what) + " must be positive definite");
}

// Density of N(0, cov) at `offset`.
double density_at(const Vector& offset, const Matrix& cov) {
  return GaussianDensity(cov).at_offset(offset);
}

Matrix isotropic(double s2, int dim) { return s2 * Matrix::Identity(dim, dim); }

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> w, std::vector<Vector> mu, std::vector<Matrix> c)
    : weights(std::move(w)), means(std::move(mu)), covs(std::move(c)) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != covs.size()) {
    throw InputError("GaussianMixture: weights, means and covariances must have equal nonzero length");
  }
  double sum = 0.0;
  for (double x : weights) {
    if (!(x >= 0.0)) throw InputError("GaussianMixture: weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("GaussianMixture: weights must sum to 1");
  const auto d = means.front().size();
  for (std::size_t i = 0; i < size(); ++i) {
    if (means[i].size() != d || covs[i].rows() != d) {
      throw InputError("GaussianMixture: inconsistent dimensions");
    }
    require_spd(covs[i], "GaussianMixture covariance");
  }
}

double GaussianMixture::density(const Point& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights[i] * density_at(x - means[i], covs[i]);
  return s;
}

PointSet GaussianMixture::sample(RngStream& rng, std::size_t count) const {
  std::vector<Eigen::LLT<Matrix>> factors;
  for (const auto& c : covs) factors.emplace_back(c);
  PointSet out(static_cast<Eigen::Index>(count), dim());
  for (std::size_t r = 0; r < count; ++r) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double acc = weights[0];
    while (u >= acc && k + 1 < size()) acc += weights[++k];
    Vector z(dim());
    for (int j = 0; j < dim(); ++j) z(j) = rng.normal();
    out.row(static_cast<Eigen::Index>(r)) = (means[k] + factors[k].matrixL() * z).transpose();
  }
  return out;
}

GaussianMixture benchmark_mixture() {
  std::vector<Vector> mu(4, Vector(2));
  mu[0] << 4, 5;
  mu[1] << -3, -5;
  mu[2] << -6, 4;
  mu[3] << 5, -4;
  std::vector<Matrix> w(4, Matrix::Identity(2, 2));
  w[0](0, 0) = 2.0;
  w[0](1, 1) = 0.5;
  return GaussianMixture({0.25, 0.25, 0.25, 0.25}, mu, w);
}

LinearGaussianModel::LinearGaussianModel(Matrix a_, Matrix sigma_)
    : a(std::move(a_)), sigma(std::move(sigma_)) {
  if (sigma.rows() != a.rows()) throw InputError("LinearGaussianModel: Sigma must match output dimension");
  require_spd(sigma, "LinearGaussianModel Sigma");
}

NoiseModel LinearGaussianModel::noise_model() const {
  return NoiseModel(linear_function(a), GaussianNoise{sigma});
}

PointSet LinearGaussianModel::sample(RngStream& rng, const PointSet& inputs) const {
  if (inputs.cols() != input_dim()) throw InputError("LinearGaussianModel: input dimension mismatch");
  const Eigen::LLT<Matrix> llt(sigma);
  const Matrix lower = llt.matrixL();
  PointSet out(inputs.rows(), output_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    Vector z(output_dim());
    for (int j = 0; j < output_dim(); ++j) z(j) = rng.normal();
    out.row(i) = (a * inputs.row(i).transpose() + lower * z).transpose();
  }
  return out;
}

GaussianMixture push_forward(const LinearGaussianModel& model, const GaussianMixture& input) {
  if (model.input_dim() != input.dim()) throw InputError("push_forward: dimension mismatch");
  std::vector<Vector> mu;
  std::vector<Matrix> cov;
  for (std::size_t i = 0; i < input.size(); ++i) {
    mu.push_back(model.a * input.means[i]);
    Matrix c = model.sigma + model.a * input.covs[i] * model.a.transpose();
    cov.push_back(0.5 * (c + c.transpose()));
  }
  return GaussianMixture(input.weights, mu, cov);
}

namespace {

ModelMean mixture_kernel_mean(const GaussianMixture& q, const KernelSpec& rkhs) {
  if (rkhs.family() != KernelFamily::Gaussian || rkhs.dim() != q.dim()) {
    throw InputError("analytic output mean needs a Gaussian kernel of matching dimension");
  }
  std::vector<Atom> atoms;
  Vector w(static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    atoms.emplace_back(GaussianAtom(q.means[i], Matrix(rkhs.covariance() + q.covs[i])));
    w(static_cast<Eigen::Index>(i)) = q.weights[i];
  }
  return ModelMean(rkhs, std::move(atoms), w);
}

}  // namespace

ModelMean analytic_output_mean(const LinearGaussianModel& model, const GaussianMixture& input,
                               const KernelSpec& rkhs_y) {
  return mixture_kernel_mean(push_forward(model, input), rkhs_y);
}

ModelMean analytic_chain_output_mean(const LinearGaussianModel& first,
                                     const LinearGaussianModel& second,
                                     const GaussianMixture& input, const KernelSpec& rkhs_z) {
  return mixture_kernel_mean(push_forward(second, push_forward(first, input)), rkhs_z);
}

double output_norm_sq(const GaussianMixture& q, const Matrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      s += q.weights[i] * q.weights[j] *
           density_at(q.means[i] - q.means[j], r + q.covs[i] + q.covs[j]);
    }
  }
  return s;
}

double empirical_error_sq(const EmpiricalMean& est, const GaussianMixture& q) {
  if (est.spec.family() != KernelFamily::Gaussian || est.dim() != q.dim()) {
    throw InputError("empirical_error_sq: needs a Gaussian kernel of matching dimension");
  }
  const Matrix& r = est.spec.covariance();
  Vector m_q = Vector::Zero(est.anchors.rows());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const GaussianDensity d(Matrix(r + q.covs[j]));
    for (Eigen::Index i = 0; i < est.anchors.rows(); ++i) {
      m_q(i) += q.weights[j] * d(est.anchors.row(i).transpose(), q.means[j]);
    }
  }
  const Matrix g = gram(est.spec, est.anchors);
  return output_norm_sq(q, r) - 2.0 * est.weights.dot(m_q) + est.weights.dot(g * est.weights);
}

double model_error_sq(const Vector& gamma, const PointSet& inputs,
                      const LinearGaussianModel& assumed, const GaussianMixture& q,
                      const Matrix& r) {
  if (gamma.size() != inputs.rows()) throw InputError("model_error_sq: weight size mismatch");
  if (inputs.cols() != assumed.input_dim() || assumed.output_dim() != q.dim() || r.rows() != q.dim()) {
    throw InputError("model_error_sq: dimension mismatch");
  }
  const Eigen::Index n = inputs.rows();
  const Matrix mapped = inputs * assumed.a.transpose();  // rows A~ x_i

  double cross = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const GaussianDensity d(Matrix(r + assumed.sigma + q.covs[j]));
    double fj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      fj += gamma(i) * d(mapped.row(i).transpose(), q.means[j]);
    }
    cross += q.weights[j] * fj;
  }

  const GaussianDensity h(Matrix(r + 2.0 * assumed.sigma));
  const int dim = q.dim();
  std::vector<double> offset(static_cast<std::size_t>(dim));
  double quad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    quad += gamma(i) * gamma(i) * std::exp(h.log_peak());
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (int k = 0; k < dim; ++k) offset[static_cast<std::size_t>(k)] = mapped(i, k) - mapped(j, k);
      quad += 2.0 * gamma(i) * gamma(j) * h.at_offset(offset.data());
    }
  }
  return output_norm_sq(q, r) - 2.0 * cross + quad;
}

double error_nonksr(const EmpiricalMean& estimate, const LinearGaussianModel& truth,
                    const GaussianMixture& input) {
  return empirical_error_sq(estimate, push_forward(truth, input));
}

double error_mbksr(const EmpiricalMean& input, const LinearGaussianModel& assumed,
                   const LinearGaussianModel& truth, const GaussianMixture& truth_input,
                   const Matrix& rkhs_cov) {
  return model_error_sq(input.weights, input.anchors, assumed, push_forward(truth, truth_input),
                        rkhs_cov);
}

std::string to_string(ChainVariant v) {
  switch (v) {
    case ChainVariant::NonNon: return "non+non";
    case ChainVariant::NonThenModel: return "non+mb";
    case ChainVariant::ModelThenNon: return "mb+non";
  }
  return "unknown";
}

double error_chain_empirical(const EmpiricalMean& estimate, const LinearGaussianModel& first,
                             const LinearGaussianModel& second, const GaussianMixture& input) {
  return empirical_error_sq(estimate, push_forward(second, push_forward(first, input)));
}

double error_chain_non_then_model(const Vector& w, const PointSet& ys,
                                  const LinearGaussianModel& assumed_second,
                                  const LinearGaussianModel& first,
                                  const LinearGaussianModel& second,
                                  const GaussianMixture& input, const Matrix& rkhs_cov) {
  return model_error_sq(w, ys, assumed_second, push_forward(second, push_forward(first, input)),
                        rkhs_cov);
}

LinearGaussianModel fit_linear_gaussian(const PointSet& xs, const PointSet& ys) {
  if (xs.rows() != ys.rows() || xs.rows() <= xs.cols()) {
    throw InputError("fit_linear_gaussian: need more pairs than input dimensions");
  }
  const Matrix x = xs;
  const Matrix y = ys;
  const Matrix xtx = x.transpose() * x;
  const Matrix a = xtx.ldlt().solve(x.transpose() * y).transpose();
  const Matrix resid = y - x * a.transpose();
  Matrix sigma = resid.transpose() * resid / static_cast<double>(x.rows());
  sigma = 0.5 * (sigma + sigma.transpose());
  return LinearGaussianModel(a, sigma);
}

Point limacon_point(double b, int harmonics, double theta) {
  const double r = 1.0 + b * std::sin(harmonics * theta);
  Point p(2);
  p << r * std::cos(theta), r * std::sin(theta);
  return p;
}

Point observation_map(const Point& x) {
  Point z(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    z(i) = (x(i) > 0 ? 1.0 : (x(i) < 0 ? -1.0 : 0.0)) * std::sqrt(std::abs(x(i)));
  }
  return z;
}

namespace {

SsmTrajectory simulate_trajectory(const SsmConfig& c, double eta, std::size_t length, RngStream rng) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  SsmTrajectory out;
  out.states.resize(static_cast<Eigen::Index>(length), 2);
  out.observations.resize(static_cast<Eigen::Index>(length), 2);
  std::vector<Eigen::LLT<Matrix>> mix_factors;
  if (c.transition_mixture) {
    for (const auto& cov : c.transition_mixture->covs) mix_factors.emplace_back(cov);
  }
  const double obs_rate = c.sigma_o > 0.0 ? std::sqrt(2.0) / c.sigma_o : 0.0;

  double theta = rng.uniform(0.0, two_pi);
  Point prev;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      theta = std::fmod(std::atan2(prev(1), prev(0)) + eta, two_pi);
      if (theta < 0.0) theta += two_pi;
    }
    out.theta.push_back(theta);
    Point x = limacon_point(c.b, c.harmonics, theta);
    if (c.transition_mixture) {
      const auto& mix = *c.transition_mixture;
      const double u = rng.uniform();
      std::size_t k = 0;
      double acc = mix.weights[0];
      while (u >= acc && k + 1 < mix.weights.size()) acc += mix.weights[++k];
      Vector e(2);
      e << rng.normal(), rng.normal();
      x += mix.means[k] + mix_factors[k].matrixL() * e;
    } else {
      x(0) += c.sigma_h * rng.normal();
      x(1) += c.sigma_h * rng.normal();
    }
    Point z = observation_map(x);
    if (obs_rate > 0.0) {
      z(0) += rng.laplace(obs_rate);
      z(1) += rng.laplace(obs_rate);
    }
    out.states.row(static_cast<Eigen::Index>(t)) = x.transpose();
    prev = x;
    out.observations.row(static_cast<Eigen::Index>(t)) = z.transpose();
  }
  return out;
}

}  // namespace

SsmData simulate_ssm(const SsmConfig& c, std::uint64_t seed, std::uint64_t replicate) {
  if (c.sigma_h < 0.0 || c.sigma_o < 0.0 || c.harmonics < 1) {
    throw InputError("simulate_ssm: invalid configuration");
  }
  const RngStream root(seed, "ssm", replicate);
  SsmData d;
  d.train = simulate_trajectory(c, c.eta, c.train_size, root.split("train"));
  d.test = simulate_trajectory(c, c.test_eta(), c.horizon, root.split("test"));
  return d;
}

NoiseModel ssm_transition_model(const SsmConfig& c, double eta) {
  MeanFunction f = limacon_function(c.b, c.harmonics, eta);
  if (c.transition_mixture) return NoiseModel(std::move(f), *c.transition_mixture);
  const double var = std::max(c.sigma_h * c.sigma_h, 1e-12);
  return NoiseModel(std::move(f), GaussianNoise{isotropic(var, 2)});
}

std::string to_string(const HyperParams& p) {
  std::ostringstream os;
  os << "eps=" << p.epsilon << " delta=" << p.delta << " sigma_x=" << p.sigma_x
     << " sigma_z=" << p.sigma_z;
  return os.str();
}

std::vector<HyperParams> make_grid(const std::vector<double>& eps, const std::vector<double>& deltas,
                                   const std::vector<double>& sx, const std::vector<double>& sz) {
  std::vector<HyperParams> grid;
  for (double e : eps)
    for (double d : deltas)
      for (double a : sx)
        for (double b : sz) grid.push_back({e, d, a, b});
  return grid;
}

CvResult cross_validate(std::vector<HyperParams> grid,
                        const std::function<double(const HyperParams&, int)>& fold_score) {
  if (grid.empty()) throw InputError("cross_validate: empty grid");
  std::sort(grid.begin(), grid.end());
  CvResult result;
  bool found = false;
  for (const auto& p : grid) {
    double score = 0.0;
    try {
      score = 0.5 * (fold_score(p, 0) + fold_score(p, 1));
    } catch (const NumericError& e) {
      result.failures.push_back({p, e.what()});
      continue;
    }
    if (!std::isfinite(score)) {
      result.failures.push_back({p, "non-finite score"});
      continue;
    }
    if (!found || score < result.score) {
      result.best = p;
      result.score = score;
      found = true;
    }
  }
  if (!found) {
    std::string msg = "cross_validate: every grid point failed:";
    for (const auto& f : result.failures) msg += "\n  " + to_string(f.params) + ": " + f.message;
    throw NumericError(msg);
  }
  return result;
}

RateResult rate_check(const std::function<double(std::size_t, std::size_t)>& error,
                      const std::vector<std::size_t>& sizes, std::size_t replicates) {
  if (sizes.size() < 2 || replicates == 0) throw InputError("rate_check: need two sizes and a replicate");
  RateResult r;
  Vector lx(static_cast<Eigen::Index>(sizes.size()));
  Vector ly(lx.size());
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    double sum = 0.0;
    for (std::size_t rep = 0; rep < replicates; ++rep) sum += error(sizes[s], rep);
    const double mean = sum / static_cast<double>(replicates);
    r.mean_errors.push_back(mean);
    lx(static_cast<Eigen::Index>(s)) = std::log(static_cast<double>(sizes[s]));
    ly(static_cast<Eigen::Index>(s)) = std::log(mean);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  r.slope = (lx.array() - mx).matrix().dot((ly.array() - my).matrix()) /
            (lx.array() - mx).matrix().squaredNorm();
  return r;
}

}  // namespace kbi
