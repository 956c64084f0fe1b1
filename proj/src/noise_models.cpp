#include "kbi/noise_models.hpp"

#include "kbi/errors.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

namespace kbi {

struct MeanFunctionRegistry::Impl {
  mutable std::mutex mutex;
  std::map<std::string, Factory> factories;
};

namespace {

Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw InputError(what + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError(what + " rows must all have the same length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

MeanFunctionRegistry::MeanFunctionRegistry() : impl_(std::make_shared<Impl>()) {
  impl_->factories["identity"] = [](const nlohmann::json& p) {
    return identity_function(p.is_object() && p.contains("dim") ? p.at("dim").get<int>() : 0);
  };
  impl_->factories["linear"] = [](const nlohmann::json& p) {
    if (!p.is_object() || !p.contains("A")) throw InputError("linear mean function needs A");
    return linear_function(matrix_from_json(p.at("A"), "A"));
  };
  impl_->factories["limacon"] = [](const nlohmann::json& p) {
    if (!p.is_object()) throw InputError("limacon mean function needs b, M, eta");
    for (const char* key : {"b", "M", "eta"}) {
      if (!p.contains(key)) throw InputError(std::string("limacon mean function needs ") + key);
    }
    return limacon_function(p.at("b").get<double>(), p.at("M").get<int>(),
                            p.at("eta").get<double>());
  };
}

MeanFunctionRegistry& MeanFunctionRegistry::instance() {
  static MeanFunctionRegistry registry;
  return registry;
}

void MeanFunctionRegistry::add(const std::string& name, Factory factory) {
  std::lock_guard lock(impl_->mutex);
  impl_->factories[name] = std::move(factory);
}

bool MeanFunctionRegistry::contains(const std::string& name) const {
  std::lock_guard lock(impl_->mutex);
  return impl_->factories.count(name) > 0;
}

MeanFunction MeanFunctionRegistry::make(const std::string& name,
                                        const nlohmann::json& params) const {
  Factory factory;
  {
    std::lock_guard lock(impl_->mutex);
    auto it = impl_->factories.find(name);
    if (it == impl_->factories.end()) throw InputError("unknown mean function '" + name + "'");
    factory = it->second;
  }
  MeanFunction f = factory(params);
  f.name = name;
  f.params = params;
  return f;
}

std::vector<std::string> MeanFunctionRegistry::names() const {
  std::lock_guard lock(impl_->mutex);
  std::vector<std::string> out;
  for (const auto& [name, _] : impl_->factories) out.push_back(name);
  return out;
}

MeanFunction identity_function(int dim) {
  MeanFunction f;
  f.name = "identity";
  f.params = dim > 0 ? nlohmann::json{{"dim", dim}} : nlohmann::json::object();
  f.input_dim = dim;
  f.output_dim = dim;
  f.fn = [](const Vector& x) { return x; };
  return f;
}

MeanFunction linear_function(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0 || !a.allFinite()) {
    throw InputError("linear mean function needs a finite non-empty matrix");
  }
  MeanFunction f;
  f.name = "linear";
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(row);
  }
  f.params = {{"A", rows}};
  f.input_dim = static_cast<int>(a.cols());
  f.output_dim = static_cast<int>(a.rows());
  f.fn = [a](const Vector& x) -> Vector { return a * x; };
  return f;
}

MeanFunction limacon_function(double b, int harmonics, double eta) {
  if (harmonics < 1) throw InputError("limacon: M must be >= 1");
  MeanFunction f;
  f.name = "limacon";
  f.params = {{"b", b}, {"M", harmonics}, {"eta", eta}};
  f.input_dim = 2;
  f.output_dim = 2;
  f.fn = [b, harmonics, eta](const Vector& x) -> Vector {
    const double theta = std::atan2(x[1], x[0]) + eta;
    const double r = 1.0 + b * std::sin(harmonics * theta);
    Vector out(2);
    out << r * std::cos(theta), r * std::sin(theta);
    return out;
  };
  return f;
}

namespace {

int noise_dim(const Noise& noise) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          return static_cast<int>(n.cov.rows());
        } else if constexpr (std::is_same_v<T, GaussianMixtureNoise>) {
          return n.covs.empty() ? 0 : static_cast<int>(n.covs.front().rows());
        } else {
          return 1;
        }
      },
      noise);
}

void validate_noise(const Noise& noise) {
  std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          GaussianDensity check(n.cov);
        } else if constexpr (std::is_same_v<T, GaussianMixtureNoise>) {
          if (n.weights.empty() || n.weights.size() != n.means.size() ||
              n.weights.size() != n.covs.size()) {
            throw InputError("mixture noise needs matching weights, means and covariances");
          }
          double total = 0.0;
          for (std::size_t k = 0; k < n.weights.size(); ++k) {
            if (!(n.weights[k] >= 0.0)) throw InputError("mixture weights must be >= 0");
            total += n.weights[k];
            GaussianDensity check(n.covs[k]);
            if (n.means[k].size() != n.covs[k].rows()) {
              throw InputError("mixture component mean/covariance dimension mismatch");
            }
            if (n.covs[k].rows() != n.covs.front().rows()) {
              throw InputError("mixture components must share a dimension");
            }
          }
          if (std::abs(total - 1.0) > 1e-9) throw InputError("mixture weights must sum to 1");
        } else if constexpr (std::is_same_v<T, LaplaceNoise>) {
          if (!(n.rate > 0.0) || !std::isfinite(n.rate)) throw InputError("Laplace noise rate must be > 0");
        } else {
          if (!(n.scale > 0.0) || !std::isfinite(n.scale)) throw InputError("Cauchy noise scale must be > 0");
        }
      },
      noise);
}

}  // namespace

NoiseModel::NoiseModel(MeanFunction mean_fn, Noise noise)
    : mean_fn_(std::move(mean_fn)), noise_(std::move(noise)) {
  if (!mean_fn_.fn) throw InputError("NoiseModel: mean function is empty");
  validate_noise(noise_);
  output_dim_ = noise_dim(noise_);
  const int declared = mean_fn_.output_dim > 0 ? mean_fn_.output_dim : mean_fn_.input_dim;
  if (declared > 0 && declared != output_dim_) {
    throw InputError("NoiseModel: mean function output dimension does not match the noise");
  }
}

namespace {

/// Per-model state shared by all atoms it produces.
struct AtomFactory {
  const NoiseModel& model;
  const KernelSpec& rkhs;
  std::shared_ptr<const GaussianDensity> gaussian_shape;
  std::vector<std::shared_ptr<const GaussianDensity>> mixture_shapes;

  AtomFactory(const NoiseModel& m, const KernelSpec& k) : model(m), rkhs(k) {
    if (model.output_dim() != rkhs.dim()) {
      throw InputError("conditional_mean: RKHS dimension does not match model output");
    }
    std::visit(
        [this](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GaussianNoise>) {
            require(KernelFamily::Gaussian, "Gaussian noise");
            gaussian_shape = std::make_shared<const GaussianDensity>(n.cov + rkhs.covariance());
          } else if constexpr (std::is_same_v<T, GaussianMixtureNoise>) {
            require(KernelFamily::Gaussian, "Gaussian mixture noise");
            for (const auto& c : n.covs) {
              mixture_shapes.push_back(
                  std::make_shared<const GaussianDensity>(c + rkhs.covariance()));
            }
          } else if constexpr (std::is_same_v<T, LaplaceNoise>) {
            require(KernelFamily::Laplace, "Laplace noise");
          } else {
            require(KernelFamily::Cauchy, "Cauchy noise");
          }
        },
        model.noise());
  }

  void require(KernelFamily family, const char* what) const {
    if (rkhs.family() != family) {
      throw CapabilityError(std::string(what) + " has no closed-form conditional kernel mean in a " +
                            to_string(rkhs.family()) + " RKHS");
    }
  }

  Vector apply(const Vector& x) const {
    const int in = model.mean_fn().input_dim;
    if (in > 0 && x.size() != in) {
      throw InputError("conditional_mean: input point has the wrong dimension for '" +
                       model.mean_fn().name + "'");
    }
    return model.mean_fn()(x);
  }

  Atom make(const Vector& fx) const {
    if (fx.size() != rkhs.dim()) throw InputError("conditional_mean: f(x) has the wrong dimension");
    return std::visit(
        [&](const auto& n) -> Atom {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GaussianNoise>) {
            return GaussianAtom(fx, gaussian_shape);
          } else if constexpr (std::is_same_v<T, GaussianMixtureNoise>) {
            MixtureAtom mix;
            mix.weights = n.weights;
            for (std::size_t k = 0; k < n.weights.size(); ++k) {
              mix.components.emplace_back(fx + n.means[k], mixture_shapes[k]);
            }
            return mix;
          } else if constexpr (std::is_same_v<T, LaplaceNoise>) {
            return LaplaceAtom{fx[0], n.rate, rkhs.rate()};
          } else {
            return CauchyAtom{fx[0], n.scale + rkhs.scale()};
          }
        },
        model.noise());
  }
};

}  // namespace

void check_compatible(const NoiseModel& model, const KernelSpec& rkhs) {
  AtomFactory factory(model, rkhs);
}

Atom conditional_mean(const NoiseModel& model, const Point& x, const KernelSpec& rkhs) {
  AtomFactory factory(model, rkhs);
  return factory.make(factory.apply(x));
}

double eval_conditional_mean(const NoiseModel& model, const Point& x, const Point& y,
                             const KernelSpec& rkhs) {
  return eval_atom(conditional_mean(model, x, rkhs), y);
}

std::vector<Atom> conditional_means(const NoiseModel& model, const PointSet& inputs,
                                    const KernelSpec& rkhs) {
  AtomFactory factory(model, rkhs);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index j = 0; j < inputs.rows(); ++j) {
    atoms.push_back(factory.make(factory.apply(inputs.row(j).transpose())));
  }
  return atoms;
}

Matrix cross_gram_model(const NoiseModel& model, const PointSet& inputs, const PointSet& evals,
                        const KernelSpec& rkhs) {
  if (evals.rows() > 0 && evals.cols() != rkhs.dim()) {
    throw InputError("cross_gram_model: evaluation points do not match RKHS dimension");
  }
  const auto atoms = conditional_means(model, inputs, rkhs);
  Matrix g(evals.rows(), inputs.rows());
  for (Eigen::Index j = 0; j < inputs.rows(); ++j) {
    const Atom& atom = atoms[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < evals.rows(); ++i) g(i, j) = eval_atom(atom, evals.row(i).data());
  }
  return g;
}

}  // namespace kbi
