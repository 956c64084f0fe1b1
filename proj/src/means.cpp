#include "kbi/means.hpp"

#include "kbi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>

namespace kbi {

EmpiricalMean::EmpiricalMean(KernelSpec spec_, PointSet anchors_, Vector weights_)
    : spec(std::move(spec_)), anchors(std::move(anchors_)), weights(std::move(weights_)) {
  if (weights.size() == 0 || weights.size() != anchors.rows()) {
    throw InputError("EmpiricalMean: need at least one anchor and one weight per anchor");
  }
  if (anchors.cols() != spec.dim()) {
    throw InputError("EmpiricalMean: anchor dimension does not match kernel dimension");
  }
  if (!weights.allFinite()) throw InputError("EmpiricalMean: weights must be finite");
}

GaussianAtom::GaussianAtom(Vector mean_, std::shared_ptr<const GaussianDensity> shape_)
    : mean(std::move(mean_)), shape(std::move(shape_)) {
  if (!shape || shape->dim() != mean.size()) {
    throw InputError("GaussianAtom: mean and covariance dimensions differ");
  }
}

GaussianAtom::GaussianAtom(Vector mean_, const Matrix& cov)
    : GaussianAtom(std::move(mean_), std::make_shared<const GaussianDensity>(cov)) {}

ModelMean::ModelMean(KernelSpec rkhs_, std::vector<Atom> atoms_, Vector weights_)
    : rkhs(std::move(rkhs_)), atoms(std::move(atoms_)), weights(std::move(weights_)) {
  if (static_cast<Eigen::Index>(atoms.size()) != weights.size()) {
    throw InputError("ModelMean: one weight per atom required");
  }
  if (!weights.allFinite()) throw InputError("ModelMean: weights must be finite");
  for (const auto& atom : atoms) {
    if (atom_dim(atom) != rkhs.dim()) {
      throw InputError("ModelMean: atom dimension does not match RKHS dimension");
    }
  }
}

int atom_dim(const Atom& atom) {
  return std::visit(
      [](const auto& a) -> int {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, GaussianAtom>) {
          return static_cast<int>(a.mean.size());
        } else if constexpr (std::is_same_v<T, MixtureAtom>) {
          return a.components.empty() ? 0 : static_cast<int>(a.components.front().mean.size());
        } else {
          return 1;
        }
      },
      atom);
}

namespace {

double eval_gaussian_atom(const GaussianAtom& atom, const double* y) {
  const int d = static_cast<int>(atom.mean.size());
  double diff[16] = {};
  std::vector<double> heap;
  double* p = diff;
  if (d > 16) {
    heap.resize(static_cast<std::size_t>(d));
    p = heap.data();
  }
  for (int i = 0; i < d; ++i) p[i] = y[i] - atom.mean[i];
  return atom.shape->at_offset(p);
}

double laplace_conditional(double offset, double rate, double kernel_rate) {
  const double a = std::abs(offset);
  const double l = rate;
  const double l0 = kernel_rate;
  if (l == l0) return l0 * (1.0 + l0 * a) * std::exp(-l0 * a) / 4.0;
  return l0 * l * (l * std::exp(-l0 * a) - l0 * std::exp(-l * a)) / (2.0 * (l * l - l0 * l0));
}

}  // namespace

double eval_atom(const Atom& atom, const double* y) {
  return std::visit(
      [y](const auto& a) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, GaussianAtom>) {
          return eval_gaussian_atom(a, y);
        } else if constexpr (std::is_same_v<T, LaplaceAtom>) {
          return laplace_conditional(y[0] - a.location, a.rate, a.kernel_rate);
        } else if constexpr (std::is_same_v<T, CauchyAtom>) {
          const double u = (y[0] - a.location) / a.scale;
          return 1.0 / (std::numbers::pi * a.scale * (1.0 + u * u));
        } else {
          double s = 0.0;
          for (std::size_t k = 0; k < a.components.size(); ++k) {
            s += a.weights[k] * eval_gaussian_atom(a.components[k], y);
          }
          return s;
        }
      },
      atom);
}

double eval_atom(const Atom& atom, const Point& y) {
  if (y.size() != atom_dim(atom)) throw InputError("eval_atom: dimension mismatch");
  return eval_atom(atom, y.data());
}

double eval_mean(const EmpiricalMean& mean, const Point& y) {
  if (y.size() != mean.dim()) throw InputError("eval_mean: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < mean.weights.size(); ++i) {
    s += mean.weights[i] * mean.spec(mean.anchors.row(i).data(), y.data());
  }
  return s;
}

double eval_mean(const ModelMean& mean, const Point& y) {
  if (y.size() != mean.dim()) throw InputError("eval_mean: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < mean.atoms.size(); ++i) {
    s += mean.weights[static_cast<Eigen::Index>(i)] * eval_atom(mean.atoms[i], y.data());
  }
  return s;
}

double eval_mean(const KernelMean& mean, const Point& y) {
  return std::visit([&y](const auto& m) { return eval_mean(m, y); }, mean);
}

double expectation(const EmpiricalMean& mean, const std::function<double(const Point&)>& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < mean.weights.size(); ++i) {
    s += mean.weights[i] * f(mean.anchors.row(i).transpose());
  }
  return s;
}

namespace {

/// Caches the density with covariance C1 + C2 - R for each pair of shapes.
class GaussianPairCache {
 public:
  explicit GaussianPairCache(const KernelSpec& rkhs) : rkhs_(rkhs) {
    if (rkhs.family() != KernelFamily::Gaussian) {
      throw CapabilityError("atom inner products need a Gaussian RKHS");
    }
  }

  double operator()(const GaussianAtom& a, const GaussianAtom& b) {
    const auto key = std::make_pair(a.shape.get(), b.shape.get());
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      Matrix c = a.covariance() + b.covariance() - rkhs_.covariance();
      c = 0.5 * (c + c.transpose());
      it = cache_.emplace(key, std::make_shared<const GaussianDensity>(std::move(c))).first;
    }
    const int d = static_cast<int>(a.mean.size());
    double diff[16];
    std::vector<double> heap;
    double* p = diff;
    if (d > 16) {
      heap.resize(static_cast<std::size_t>(d));
      p = heap.data();
    }
    for (int i = 0; i < d; ++i) p[i] = a.mean[i] - b.mean[i];
    return it->second->at_offset(p);
  }

 private:
  const KernelSpec& rkhs_;
  std::map<std::pair<const GaussianDensity*, const GaussianDensity*>,
           std::shared_ptr<const GaussianDensity>>
      cache_;
};

double atom_pair(const Atom& a, const Atom& b, GaussianPairCache& cache) {
  const auto* ga = std::get_if<GaussianAtom>(&a);
  const auto* gb = std::get_if<GaussianAtom>(&b);
  const auto* ma = std::get_if<MixtureAtom>(&a);
  const auto* mb = std::get_if<MixtureAtom>(&b);
  if (ga && gb) return cache(*ga, *gb);
  if (ma) {
    double s = 0.0;
    for (std::size_t k = 0; k < ma->components.size(); ++k) {
      s += ma->weights[k] * atom_pair(Atom(ma->components[k]), b, cache);
    }
    return s;
  }
  if (mb) {
    double s = 0.0;
    for (std::size_t k = 0; k < mb->components.size(); ++k) {
      s += mb->weights[k] * atom_pair(a, Atom(mb->components[k]), cache);
    }
    return s;
  }
  throw CapabilityError(
      "inner product between these atom families has no closed form (only Gaussian and "
      "Gaussian-mixture atoms are supported)");
}

void require_same_rkhs(const KernelSpec& a, const KernelSpec& b) {
  if (a != b) throw InputError("inner_product: kernel means live in different RKHSs");
}

}  // namespace

double atom_inner_product(const Atom& a, const Atom& b, const KernelSpec& rkhs) {
  GaussianPairCache cache(rkhs);
  return atom_pair(a, b, cache);
}

double inner_product(const EmpiricalMean& a, const EmpiricalMean& b) {
  require_same_rkhs(a.spec, b.spec);
  return a.weights.dot(gram(a.spec, a.anchors, b.anchors) * b.weights);
}

double inner_product(const EmpiricalMean& a, const ModelMean& b) {
  require_same_rkhs(a.spec, b.rkhs);
  double s = 0.0;
  for (std::size_t j = 0; j < b.atoms.size(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < a.weights.size(); ++i) {
      col += a.weights[i] * eval_atom(b.atoms[j], a.anchors.row(i).data());
    }
    s += b.weights[static_cast<Eigen::Index>(j)] * col;
  }
  return s;
}

double inner_product(const ModelMean& a, const EmpiricalMean& b) { return inner_product(b, a); }

double inner_product(const ModelMean& a, const ModelMean& b) {
  require_same_rkhs(a.rkhs, b.rkhs);
  GaussianPairCache cache(a.rkhs);
  double s = 0.0;
  for (std::size_t i = 0; i < a.atoms.size(); ++i) {
    const double wi = a.weights[static_cast<Eigen::Index>(i)];
    double row = 0.0;
    for (std::size_t j = 0; j < b.atoms.size(); ++j) {
      row += b.weights[static_cast<Eigen::Index>(j)] * atom_pair(a.atoms[i], b.atoms[j], cache);
    }
    s += wi * row;
  }
  return s;
}

double inner_product(const KernelMean& a, const KernelMean& b) {
  return std::visit([](const auto& x, const auto& y) { return inner_product(x, y); }, a, b);
}

double rkhs_distance_sq(const KernelMean& a, const KernelMean& b) {
  const double d = inner_product(a, a) - 2.0 * inner_product(a, b) + inner_product(b, b);
  return std::max(0.0, d);
}

const KernelSpec& rkhs_of(const KernelMean& mean) {
  if (const auto* e = std::get_if<EmpiricalMean>(&mean)) return e->spec;
  return std::get<ModelMean>(mean).rkhs;
}

void write_mean_csv(std::ostream& out, const EmpiricalMean& mean) {
  const auto d = mean.anchors.cols();
  for (Eigen::Index k = 0; k < d; ++k) out << 'x' << k << ',';
  out << "weight\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < mean.anchors.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out << mean.anchors(i, k) << ',';
    out << mean.weights[i] << '\n';
  }
}

}  // namespace kbi
