#include "kbi/csv.hpp"
#include "kbi/errors.hpp"
#include "kbi/filter.hpp"
#include "kbi/random.hpp"
#include "support/brute_force.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace kbi;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

double gauss_density(const Vector& d, const Matrix& c) {
  const double k = static_cast<double>(d.size());
  return std::exp(-0.5 * d.dot(c.inverse() * d)) / std::sqrt(std::pow(2.0 * std::numbers::pi, k) * c.determinant());
}

struct Setup {
  PointSet xs;
  PointSet zs;
  KernelSpec kx = KernelSpec::gaussian_isotropic(0.7, 2);
  KernelSpec kz = KernelSpec::gaussian_isotropic(0.5, 2);
  Matrix rotation;
  Matrix noise = 0.1 * Matrix::Identity(2, 2);
};

Setup random_setup(std::uint64_t seed, int n) {
  RngStream rng(seed, "filter-setup");
  Setup s;
  s.xs.resize(n, 2);
  s.zs.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    s.xs.row(i) = pt({rng.uniform(-2, 2), rng.uniform(-2, 2)}).transpose();
    s.zs.row(i) = (s.xs.row(i).array().cube() / 4.0).matrix() + 0.1 * pt({rng.normal(), rng.normal()}).transpose();
  }
  const double a = 0.3;
  s.rotation.resize(2, 2);
  s.rotation << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return s;
}

FilterModel model_for(const Setup& s, const RegParams& reg, KernelMean prior) {
  return FilterModel{TrainingPairs(s.xs, s.zs, s.kx, s.kz),
                     ModelTransition{NoiseModel(linear_function(s.rotation), GaussianNoise{s.noise}), {}}, reg,
                     std::move(prior)};
}

EmpiricalMean uniform_prior(const Setup& s) {
  const auto n = s.xs.rows();
  return EmpiricalMean(s.kx, s.xs, Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

}  // namespace

TEST_CASE("initial filtering matches the explicit inverse") {
  const Setup s = random_setup(1, 6);
  const RegParams reg(0.01, 1e-3);
  const KbrFilter filter(model_for(s, reg, uniform_prior(s)));
  const Point z = pt({0.2, -0.1});
  const Matrix gx = test::dense_gram(s.kx, s.xs, s.xs);
  const Matrix gz = test::dense_gram(s.kz, s.zs, s.zs);
  const Vector w = test::sum_rule_weights(gx, reg.epsilon, gx * Vector::Constant(6, 1.0 / 6.0));
  const Vector k = test::dense_gram(s.kz, s.zs, z.transpose()).col(0);
  const FilterState st = filter.init(z);
  CHECK(st.t == 1);
  CHECK((st.alpha - test::bayes_rule_weights(gz, w, reg.delta, k)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("initial filtering peaks at the matching observation") {
  Setup s;
  s.xs = stack_points({pt({0, 0}), pt({1, 0}), pt({2, 0}), pt({3, 0}), pt({4, 0})});
  s.zs = s.xs;
  s.kz = KernelSpec::gaussian_isotropic(0.05, 2);
  s.rotation = Matrix::Identity(2, 2);
  const KbrFilter filter(model_for(s, RegParams(0.01, 1e-6), uniform_prior(s)));
  for (int j = 0; j < 5; ++j) {
    Eigen::Index arg = 0;
    filter.init(s.zs.row(j).transpose()).alpha.maxCoeff(&arg);
    CHECK(arg == j);
    // Same with a uniform predictive weight in the update step.
    filter.update(FilterState{1, Vector::Zero(5)}, Vector::Constant(5, 0.2), s.zs.row(j).transpose())
        .alpha.maxCoeff(&arg);
    CHECK(arg == j);
  }
}

TEST_CASE("zero prior and zero prediction give zero weights") {
  const Setup s = random_setup(2, 5);
  const EmpiricalMean zero(s.kx, s.xs, Vector::Zero(5));
  const KbrFilter filter(model_for(s, RegParams(0.01, 1e-3), zero));
  CHECK(filter.init(pt({0, 0})).alpha.isZero(0.0));
  CHECK(filter.update(FilterState{1, Vector::Ones(5)}, Vector::Zero(5), pt({0, 0})).alpha.isZero(0.0));
}

TEST_CASE("predict and update match the explicit inverse") {
  const Setup s = random_setup(3, 6);
  const RegParams reg(0.02, 1e-3);
  const KbrFilter filter(model_for(s, reg, uniform_prior(s)));
  RngStream rng(4, "alpha");
  Vector alpha(6);
  for (int i = 0; i < 6; ++i) alpha(i) = rng.uniform(-0.2, 0.5);

  Matrix trans(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      trans(i, j) = gauss_density(s.xs.row(i).transpose() - s.rotation * s.xs.row(j).transpose(),
                                  s.noise + s.kx.covariance());
  const Matrix gx = test::dense_gram(s.kx, s.xs, s.xs);
  const Vector beta_ref = test::sum_rule_weights(gx, reg.epsilon, trans * alpha);
  const Vector beta = filter.predict(FilterState{1, alpha});
  CHECK((beta - beta_ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, beta_ref.cwiseAbs().maxCoeff()));

  const Point z = pt({-0.3, 0.4});
  const Matrix gz = test::dense_gram(s.kz, s.zs, s.zs);
  const Vector k = test::dense_gram(s.kz, s.zs, z.transpose()).col(0);
  const FilterState next = filter.update(FilterState{1, alpha}, beta, z);
  CHECK(next.t == 2);
  CHECK((next.alpha - test::bayes_rule_weights(gz, beta_ref, reg.delta, k)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("identity dynamics with vanishing noise leave the weights in place") {
  Setup s = random_setup(5, 5);
  s.xs = stack_points({pt({0, 0}), pt({3, 0}), pt({0, 3}), pt({3, 3}), pt({-3, 1})});
  s.rotation = Matrix::Identity(2, 2);
  s.noise = 1e-12 * Matrix::Identity(2, 2);
  const KbrFilter filter(model_for(s, RegParams(1e-8, 1e-3), uniform_prior(s)));
  const Vector alpha = pt({0.1, 0.5, -0.2, 0.3, 0.3});
  CHECK((filter.predict(FilterState{1, alpha}) - alpha).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("one filter step equals the composed rules") {
  const Setup s = random_setup(6, 8);
  const RegParams reg(0.01, 1e-3);
  const KbrFilter filter(model_for(s, reg, uniform_prior(s)));
  const FilterState st = filter.init(pt({0.1, 0.2}));
  const Point z = pt({0.4, -0.5});
  const FilterState next = filter.update(st, filter.predict(st), z);

  const NoiseModel transition(linear_function(s.rotation), GaussianNoise{s.noise});
  const ModelMean predicted = mb_ksr(transition, filter.posterior(st), s.kx);
  const EmpiricalMean composed = kbr_model_prior(filter.model().train, predicted, reg, z);
  CHECK((next.alpha - composed.weights).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nonparametric transition on identity pairs agrees with the model") {
  Setup s = random_setup(7, 6);
  s.rotation = Matrix::Identity(2, 2);
  s.noise = 1e-12 * Matrix::Identity(2, 2);
  const RegParams reg(1e-7, 1e-3);
  const KbrFilter model_filter(model_for(s, reg, uniform_prior(s)));
  const KbrFilter np_filter(FilterModel{TrainingPairs(s.xs, s.zs, s.kx, s.kz), NonParamTransition{s.xs, s.xs},
                                        reg, uniform_prior(s)});
  RngStream rng(8, "alpha");
  Vector alpha(6);
  for (int i = 0; i < 6; ++i) alpha(i) = rng.uniform(0.0, 0.3);
  CHECK((model_filter.predict(FilterState{1, alpha}) - np_filter.predict(FilterState{1, alpha}))
            .cwiseAbs()
            .maxCoeff() <= 1e-3);
}

TEST_CASE("a constant schedule reproduces the static filter") {
  const Setup s = random_setup(9, 20);
  const RegParams reg(0.01, 1e-3);
  const KbrFilter fixed(model_for(s, reg, uniform_prior(s)));
  FilterModel scheduled = model_for(s, reg, uniform_prior(s));
  const NoiseModel transition(linear_function(s.rotation), GaussianNoise{s.noise});
  std::get<ModelTransition>(scheduled.transition).schedule = [transition](std::size_t) { return transition; };
  const KbrFilter variant(std::move(scheduled));
  PointSet obs(6, 2);
  for (int t = 0; t < 6; ++t) obs.row(t) = s.zs.row(t);
  const auto a = run_filter(fixed, obs);
  const auto b = run_filter(variant, obs);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].state.alpha == b[t].state.alpha);
}

TEST_CASE("run_filter lengths and determinism") {
  const Setup s = random_setup(10, 15);
  const KbrFilter filter(model_for(s, RegParams(0.01, 1e-3), uniform_prior(s)));
  PointSet one = s.zs.topRows(1);
  const auto single = run_filter(filter, one);
  CHECK(single.size() == 1);
  CHECK(single[0].state.t == 1);
  PointSet obs = s.zs.topRows(7);
  const auto a = run_filter(filter, obs, PointEstimator::ArgmaxWeight);
  const auto b = run_filter(filter, obs, PointEstimator::ArgmaxWeight);
  CHECK(a.size() == 7);
  CHECK(a.back().state.t == 7);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].state.alpha == b[t].state.alpha);
    CHECK(a[t].estimate == argmax_weight_anchor(filter.posterior(a[t].state)));
  }
  CHECK_THROWS_AS(run_filter(filter, PointSet(0, 2)), InputError);
}

TEST_CASE("invalid filter models are configuration errors") {
  const Setup s = random_setup(11, 5);
  const EmpiricalMean wrong_prior(KernelSpec::gaussian_isotropic(2.0, 2), s.xs, Vector::Ones(5));
  CHECK_THROWS_AS(KbrFilter(model_for(s, RegParams(0.01, 1e-3), wrong_prior)), ConfigError);
  CHECK_THROWS_AS(KbrFilter(FilterModel{TrainingPairs(s.xs, s.zs, s.kx, s.kz),
                                        NonParamTransition{s.xs.topRows(3), s.xs.topRows(2)},
                                        RegParams(0.01, 1e-3), uniform_prior(s)}),
                  ConfigError);
}

TEST_CASE("preimage of a single feature is its anchor") {
  const auto k = KernelSpec::gaussian_isotropic(0.5, 2);
  const EmpiricalMean m(k, pt({0.7, -1.2}).transpose(), pt({1.0}));
  const PreimageResult r = preimage(m);
  CHECK(r.point == pt({0.7, -1.2}));
  CHECK(r.iterations == 1);
  CHECK_FALSE(r.fell_back);
}

TEST_CASE("preimage of two symmetric anchors") {
  const auto k = KernelSpec::gaussian_isotropic(1.0, 1);
  const EmpiricalMean m(k, stack_points({pt({-0.8}), pt({0.8})}), pt({0.5, 0.5}));
  const PreimageResult r = preimage(m);
  const double obj = preimage_objective(m, r.point);
  CHECK(obj <= preimage_objective(m, pt({-0.8})) + 1e-10);
  CHECK(obj <= preimage_objective(m, pt({0.8})) + 1e-10);
  double grid_min = 1e300;
  for (int i = -4000; i <= 4000; ++i) grid_min = std::min(grid_min, preimage_objective(m, pt({i * 1e-3})));
  CHECK(obj <= grid_min + 1e-8);
}

TEST_CASE("preimage objective never increases") {
  RngStream rng(12, "preimage");
  const auto k = KernelSpec::gaussian_isotropic(0.6, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 8;
    PointSet a(n, 2);
    Vector w(n);
    for (int i = 0; i < n; ++i) {
      a.row(i) = pt({rng.uniform(-2, 2), rng.uniform(-2, 2)}).transpose();
      w(i) = rng.uniform(-0.3, 1.0);
    }
    w(0) = std::abs(w(0)) + 0.1;
    const EmpiricalMean m(k, a, w);
    const PreimageResult r = preimage(m);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    }
    CHECK(preimage_objective(m, r.point) <= preimage_objective(m, argmax_weight_anchor(m)) + 1e-12);
  }
}

TEST_CASE("preimage needs a positive weight and a gaussian kernel") {
  const auto k = KernelSpec::gaussian_isotropic(0.6, 1);
  CHECK_THROWS_AS(preimage(EmpiricalMean(k, pt({0.0}).transpose(), pt({-1.0}))), InputError);
  CHECK_THROWS_AS(preimage(EmpiricalMean(KernelSpec::laplace(1.0), pt({0.0}).transpose(), pt({1.0}))),
                  CapabilityError);
}

TEST_CASE("preimage falls back to the anchor when the weights cancel") {
  const auto k = KernelSpec::gaussian_isotropic(0.01, 1);
  // Far anchors and a start point where every kernel value underflows.
  const EmpiricalMean m(k, stack_points({pt({0.0}), pt({1000.0})}), pt({1.0, -1.0}));
  const PreimageResult r = preimage(m);
  CHECK(r.point == pt({0.0}));
}

TEST_CASE("posterior expectation tracks the exact kalman posterior") {
  // x' = a x + N(0, q), z = x + N(0, r); test function f(x) = k_R(x, c).
  const double a = 0.9, q = 0.25, r = 0.04;
  const int n = 800;
  RngStream rng(13, "kalman");
  PointSet xs(n, 1), zs(n, 1);
  const double stationary = q / (1.0 - a * a);
  for (int i = 0; i < n; ++i) {
    xs(i, 0) = std::sqrt(stationary) * rng.normal();
    zs(i, 0) = xs(i, 0) + std::sqrt(r) * rng.normal();
  }
  const auto kx = KernelSpec::gaussian_isotropic(0.3, 1);
  const auto kz = KernelSpec::gaussian_isotropic(0.2, 1);
  const double R = 0.25;
  const auto test_kernel = KernelSpec::gaussian_isotropic(0.5, 1);
  const double c = 0.5;
  const KbrFilter filter(FilterModel{TrainingPairs(xs, zs, kx, kz),
                                     ModelTransition{NoiseModel(linear_function(Matrix::Constant(1, 1, a)),
                                                                GaussianNoise{Matrix::Constant(1, 1, q)}),
                                                     {}},
                                     RegParams(1e-4, 1e-3),
                                     EmpiricalMean(kx, xs, Vector::Constant(n, 1.0 / n))});
  // Observation sequence from the same model.
  double x = 0.0, m = 0.0, p = stationary;
  FilterState st;
  double worst = 0.0, total = 0.0;
  for (int t = 1; t <= 20; ++t) {
    x = t == 1 ? std::sqrt(stationary) * rng.normal() : a * x + std::sqrt(q) * rng.normal();
    const double z = x + std::sqrt(r) * rng.normal();
    if (t > 1) {
      m = a * m;
      p = a * a * p + q;
    }
    const double gain = p / (p + r);
    m = m + gain * (z - m);
    p = (1.0 - gain) * p;
    st = t == 1 ? filter.init(pt({z})) : filter.update(st, filter.predict(st), pt({z}));
    const double exact = std::exp(-0.5 * (c - m) * (c - m) / (R + p)) / std::sqrt(2.0 * std::numbers::pi * (R + p));
    const double est = expectation(filter.posterior(st), [&](const Point& y) { return test_kernel(y, pt({c})); });
    worst = std::max(worst, std::abs(est - exact));
    total += std::abs(est - exact);
  }
  MESSAGE("deviation from the exact posterior expectation: mean " << total / 20 << ", max " << worst);
  CHECK(total / 20 < 0.02);
  CHECK(worst < 0.05);
}

TEST_CASE("filter csv has one row per step") {
  const Setup s = random_setup(14, 10);
  const KbrFilter filter(model_for(s, RegParams(0.01, 1e-3), uniform_prior(s)));
  const PointSet obs = s.zs.topRows(3);
  const auto steps = run_filter(filter, obs);
  std::ostringstream os;
  write_filter_csv(os, s.xs.topRows(3), steps);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,true_0,true_1,estimate_0,estimate_1,sq_error");
  int count = 0;
  while (std::getline(in, line)) ++count;
  CHECK(count == 3);
}
