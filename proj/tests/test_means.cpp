#include "kbi/errors.hpp"
#include "kbi/means.hpp"
#include "kbi/random.hpp"
#include "support/quadrature.hpp"

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

Vector vec(std::initializer_list<double> v) { return pt(v); }

PointSet rows(std::initializer_list<std::initializer_list<double>> r) {
  std::vector<Point> pts;
  for (auto row : r) pts.push_back(pt(row));
  return stack_points(pts);
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

EmpiricalMean random_empirical(RngStream& rng, const KernelSpec& k, int n) {
  PointSet a(n, k.dim());
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k.dim(); ++j) a(i, j) = rng.uniform(-2, 2);
    w(i) = rng.uniform(-1, 1);
  }
  return EmpiricalMean(k, a, w);
}

}  // namespace

TEST_CASE("pointwise evaluation of empirical and model means") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(1, 1));
  const EmpiricalMean single(k, rows({{0.5}}), vec({1.0}));
  CHECK(eval_mean(single, pt({1.3})) == k(pt({0.5}), pt({1.3})));

  const ModelMean atom(k, {GaussianAtom(vec({0.0}), Matrix::Constant(1, 1, 2.0))}, vec({1.0}));
  CHECK(eval_mean(atom, pt({0.0})) == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-12));

  const EmpiricalMean zero(k, rows({{0.0}, {1.0}}), vec({0.0, 0.0}));
  CHECK(eval_mean(zero, pt({0.3})) == 0.0);
  CHECK_THROWS_AS(eval_mean(single, pt({0.0, 1.0})), InputError);
}

TEST_CASE("expectation is the weighted sum over anchors") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(1, 1));
  const EmpiricalMean m(k, rows({{0.0}, {2.0}}), vec({0.5, 0.5}));
  CHECK(expectation(m, [](const Point&) { return 1.0; }) == doctest::Approx(1.0));
  CHECK(expectation(m, [](const Point& x) { return x(0); }) == doctest::Approx(1.0));
}

TEST_CASE("reproducing property of feature inner products") {
  const auto k = KernelSpec::gaussian_isotropic(0.7, 2);
  const Point x = pt({0.1, -0.4});
  const Point y = pt({1.0, 0.5});
  const EmpiricalMean fx(k, x.transpose(), vec({1.0}));
  const EmpiricalMean fy(k, y.transpose(), vec({1.0}));
  CHECK(inner_product(fx, fx) == doctest::Approx(k.peak()).epsilon(1e-14));
  CHECK(inner_product(fx, fy) == doctest::Approx(k(x, y)).epsilon(1e-14));
}

TEST_CASE("distance between a feature and its double") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(1, 1));
  const KernelMean a = EmpiricalMean(k, rows({{0.0}}), vec({1.0}));
  const KernelMean b = EmpiricalMean(k, rows({{0.0}}), vec({2.0}));
  CHECK(rkhs_distance_sq(a, b) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(rkhs_distance_sq(a, a) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("gaussian atom inner product for the 2-D identity instance") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(2, 2));
  const Matrix c = 3.0 * Matrix::Identity(2, 2);
  const Atom a = GaussianAtom(vec({0.0, 0.0}), c);
  CHECK(atom_inner_product(a, a, k) == doctest::Approx(1.0 / (10.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("gaussian atom inner product matches quadrature") {
  RngStream rng(5, "atom-quadrature");
  const double r = 0.6;
  const auto k = KernelSpec::gaussian(Matrix::Constant(1, 1, r));
  for (int trial = 0; trial < 10; ++trial) {
    const double m1 = rng.uniform(-2.5, 2.5);
    const double m2 = rng.uniform(-2.5, 2.5);
    const double c1 = rng.uniform(0.5, 5.0) + r;
    const double c2 = rng.uniform(0.5, 5.0) + r;
    const Atom a = GaussianAtom(vec({m1}), Matrix::Constant(1, 1, c1));
    const Atom b = GaussianAtom(vec({m2}), Matrix::Constant(1, 1, c2));
    // <m_a, m_b> = integral of p_a(y) m_b(y), with p_a = N(m1, c1 - R).
    const double quad = test::integrate_line(
        [&](double y) { return normal_pdf(y, m1, c1 - r) * normal_pdf(y, m2, c2); }, {-20, m1, m2, 20});
    CHECK(std::abs(atom_inner_product(a, b, k) - quad) <= 1e-6);
  }
}

TEST_CASE("inner products are symmetric and bilinear") {
  RngStream rng(9, "bilinear");
  const auto k = KernelSpec::gaussian_isotropic(0.8, 2);
  const EmpiricalMean a = random_empirical(rng, k, 5);
  const EmpiricalMean b = random_empirical(rng, k, 4);
  const EmpiricalMean c(k, b.anchors, Vector(b.weights * -0.3));
  const ModelMean m(k,
                    {GaussianAtom(vec({0.2, 0.1}), Matrix(1.5 * Matrix::Identity(2, 2))),
                     GaussianAtom(vec({-1.0, 0.4}), Matrix(2.0 * Matrix::Identity(2, 2)))},
                    vec({0.6, -0.2}));
  CHECK(std::abs(inner_product(a, b) - inner_product(b, a)) <= 1e-12);
  CHECK(std::abs(inner_product(a, m) - inner_product(m, a)) <= 1e-12);
  // <a, 2b + 3c> with b and c sharing anchors.
  const EmpiricalMean combo(k, b.anchors, Vector(2.0 * b.weights + 3.0 * c.weights));
  CHECK(std::abs(inner_product(a, combo) - (2.0 * inner_product(a, b) + 3.0 * inner_product(a, c))) <= 1e-12);
  const ModelMean m2(k, m.atoms, Vector(2.0 * m.weights));
  CHECK(std::abs(inner_product(m2, m) - 2.0 * inner_product(m, m)) <= 1e-12);
  CHECK(rkhs_distance_sq(KernelMean(m), KernelMean(m)) <= 1e-12);
}

TEST_CASE("empirical distance equals the matrix quadratic form on shared anchors") {
  RngStream rng(13, "quadratic-form");
  const auto k = KernelSpec::gaussian_isotropic(0.5, 2);
  const EmpiricalMean a = random_empirical(rng, k, 6);
  Vector wb(6);
  for (int i = 0; i < 6; ++i) wb(i) = rng.uniform(-1, 1);
  const EmpiricalMean b(k, a.anchors, wb);
  const Vector d = a.weights - wb;
  const double form = d.dot(gram(k, a.anchors) * d);
  CHECK(std::abs(rkhs_distance_sq(KernelMean(a), KernelMean(b)) - form) <= 1e-10);
}

TEST_CASE("empirical against model inner product evaluates the atoms at the anchors") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(1, 1));
  const EmpiricalMean e(k, rows({{0.0}, {1.0}}), vec({0.3, 0.7}));
  const Atom atom = GaussianAtom(vec({0.5}), Matrix::Constant(1, 1, 2.0));
  const ModelMean m(k, {atom}, vec({2.0}));
  const double expected = 2.0 * (0.3 * eval_atom(atom, pt({0.0})) + 0.7 * eval_atom(atom, pt({1.0})));
  CHECK(inner_product(e, m) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("mixture atoms expand linearly") {
  const auto k = KernelSpec::gaussian(Matrix::Identity(1, 1));
  const GaussianAtom g1(vec({0.0}), Matrix::Constant(1, 1, 1.5));
  const GaussianAtom g2(vec({1.0}), Matrix::Constant(1, 1, 2.5));
  const Atom mix = MixtureAtom{{0.25, 0.75}, {g1, g2}};
  const Atom other = GaussianAtom(vec({-0.5}), Matrix::Constant(1, 1, 3.0));
  const double expected = 0.25 * atom_inner_product(g1, other, k) + 0.75 * atom_inner_product(g2, other, k);
  CHECK(atom_inner_product(mix, other, k) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(eval_atom(mix, pt({0.3})) ==
        doctest::Approx(0.25 * eval_atom(g1, pt({0.3})) + 0.75 * eval_atom(g2, pt({0.3}))).epsilon(1e-14));
}

TEST_CASE("unsupported atom pairs and mismatched spaces are rejected") {
  const auto lap = KernelSpec::laplace(1.0);
  const Atom a = LaplaceAtom{0.0, 2.0, 1.0};
  CHECK_THROWS_AS(atom_inner_product(a, a, lap), CapabilityError);
  const ModelMean m(lap, {a}, vec({1.0}));
  CHECK_THROWS_AS(inner_product(m, m), CapabilityError);
  const EmpiricalMean e(lap, rows({{0.5}}), vec({1.0}));
  CHECK(inner_product(e, m) == doctest::Approx(eval_atom(a, pt({0.5}))));

  const EmpiricalMean g1(KernelSpec::gaussian_isotropic(1.0, 1), rows({{0.0}}), vec({1.0}));
  const EmpiricalMean g2(KernelSpec::gaussian_isotropic(2.0, 1), rows({{0.0}}), vec({1.0}));
  CHECK_THROWS_AS(inner_product(g1, g2), InputError);
  CHECK_THROWS_AS(EmpiricalMean(lap, rows({{0.0}, {1.0}}), vec({1.0})), InputError);
  CHECK_THROWS_AS(EmpiricalMean(lap, rows({{0.0}}), vec({NAN})), InputError);
}

TEST_CASE("mean csv lists anchors and weights") {
  const auto k = KernelSpec::gaussian_isotropic(1.0, 2);
  const EmpiricalMean m(k, rows({{0.5, -1.0}, {2.0, 0.25}}), vec({0.75, -0.5}));
  std::ostringstream os;
  write_mean_csv(os, m);
  CHECK(os.str() == "x0,x1,weight\n0.5,-1,0.75\n2,0.25,-0.5\n");
}
