#include "kbi/config.hpp"

#include "kbi/errors.hpp"
#include "kbi/random.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace kbi {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed access to one JSON object that remembers which keys were read so
// leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  const json& require_raw(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "required field is missing");
    return raw(key);
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "required field is missing");
    return convert<T>(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(path(item.key()), "unknown field");
    }
  }

 private:
  template <class T>
  T convert(const std::string& key) {
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
          throw ConfigError(path(key), "expected an integer");
        }
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && v.get<long long>() < 0) {
            throw ConfigError(path(key), "expected a non-negative integer");
          }
        }
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), std::string("wrong type: ") + e.what());
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Matrix parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) throw ConfigError(path, "expected a non-empty array of rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(path, "rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) throw ConfigError(path, "entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
    }
  }
  return m;
}

void require_spd(const Matrix& m, const std::string& path) {
  if (m.rows() != m.cols()) throw ConfigError(path, "covariance must be square");
  if (!is_symmetric(m)) throw ConfigError(path, "covariance must be symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw ConfigError(path, "covariance is not positive definite");
}

Matrix matrix_field(Fields& f, const std::string& key, const Matrix& fallback) {
  if (!f.has(key)) return fallback;
  return parse_matrix(f.raw(key), f.path(key));
}

Matrix cov_field(Fields& f, const std::string& key, const Matrix& fallback) {
  Matrix m = matrix_field(f, key, fallback);
  require_spd(m, f.path(key));
  return m;
}

Vector parse_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path, "entries must be numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

template <class T>
std::vector<T> list_field(Fields& f, const std::string& key, std::vector<T> fallback, bool required) {
  if (!f.has(key)) {
    if (required) throw ConfigError(f.path(key), "required field is missing");
    return fallback;
  }
  const json& v = f.raw(key);
  if (!v.is_array() || v.empty()) throw ConfigError(f.path(key), "expected a non-empty array");
  std::vector<T> out;
  for (const auto& item : v) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!item.is_string()) throw ConfigError(f.path(key), "entries must be strings");
    } else if constexpr (std::is_integral_v<T>) {
      if (!item.is_number_unsigned() && !(item.is_number_integer() && item.get<long long>() >= 0)) {
        throw ConfigError(f.path(key), "entries must be non-negative integers");
      }
    } else {
      if (!item.is_number()) throw ConfigError(f.path(key), "entries must be numbers");
    }
    out.push_back(item.get<T>());
  }
  return out;
}

void require_positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
}

void require_all_positive(const std::vector<double>& v, const std::string& path) {
  for (double x : v) require_positive(x, path);
}

GaussianMixture parse_mixture(const json& v, const std::string& path, int dim) {
  Fields f(v, path);
  const auto weights = list_field<double>(f, "weights", {}, true);
  const json& means_j = f.require_raw("means");
  const json& covs_j = f.require_raw("covs");
  f.finish();
  if (!means_j.is_array() || !covs_j.is_array() || means_j.size() != weights.size() ||
      covs_j.size() != weights.size()) {
    throw ConfigError(path, "weights, means and covs must have equal length");
  }
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    means.push_back(parse_vector(means_j[i], path + ".means" + idx));
    covs.push_back(parse_matrix(covs_j[i], path + ".covs" + idx));
    require_spd(covs.back(), path + ".covs" + idx);
    if (means.back().size() != dim || covs.back().rows() != dim) {
      throw ConfigError(path + ".means" + idx, "dimension does not match the model");
    }
  }
  try {
    return GaussianMixture(weights, means, covs);
  } catch (const InputError& e) {
    throw ConfigError(path, e.what());
  }
}

GaussianMixture mixture_field(Fields& f, const std::string& key, int dim) {
  if (!f.has(key)) return benchmark_mixture();
  const json& v = f.raw(key);
  if (v.is_string()) {
    if (v.get<std::string>() != "benchmark") throw ConfigError(f.path(key), "unknown named mixture");
    return benchmark_mixture();
  }
  return parse_mixture(v, f.path(key), dim);
}

void check_square_pair(const Matrix& a, const Matrix& sigma, const std::string& a_path,
                       const std::string& sigma_path) {
  if (sigma.rows() != a.rows()) throw ConfigError(sigma_path, "must match the output dimension of " + a_path);
}

LinearSettings parse_linear(Fields& f) {
  LinearSettings s;
  s.n = f.get<std::size_t>("n", s.n);
  s.l = f.get<std::size_t>("l", s.l);
  s.box = f.get<double>("box", s.box);
  s.kernel_x_var = f.get<double>("kernel_x_var", s.kernel_x_var);
  s.kernel_y_var = f.get<double>("kernel_y_var", s.kernel_y_var);
  s.a = matrix_field(f, "A", s.a);
  s.sigma = cov_field(f, "Sigma", s.sigma);
  check_square_pair(s.a, s.sigma, f.path("A"), f.path("Sigma"));
  if (s.a.rows() != s.a.cols()) throw ConfigError(f.path("A"), "must be square");
  s.mixture = mixture_field(f, "mixture", static_cast<int>(s.a.cols()));
  if (s.n < 2) throw ConfigError(f.path("n"), "must be at least 2");
  if (s.l < 1) throw ConfigError(f.path("l"), "must be at least 1");
  require_positive(s.box, f.path("box"));
  require_positive(s.kernel_x_var, f.path("kernel_x_var"));
  require_positive(s.kernel_y_var, f.path("kernel_y_var"));
  if (s.mixture.dim() != s.a.cols()) throw ConfigError(f.path("mixture"), "dimension does not match A");
  return s;
}

ExperimentParams parse_params(const std::string& kind, const json& p) {
  Fields f(p, "params");
  if (kind == "ground-truth") {
    GroundTruthParams g;
    g.linear = parse_linear(f);
    g.epsilons = list_field<double>(f, "epsilons", {}, true);
    require_all_positive(g.epsilons, f.path("epsilons"));
    f.finish();
    return g;
  }
  if (kind == "misspecification") {
    MisspecificationParams m;
    m.linear = parse_linear(f);
    m.scales = list_field<double>(f, "scales", {}, true);
    require_all_positive(m.scales, f.path("scales"));
    f.finish();
    return m;
  }
  if (kind == "chain") {
    ChainParams c;
    c.n = f.get<std::size_t>("n", c.n);
    c.l = f.get<std::size_t>("l", c.l);
    c.box = f.get<double>("box", c.box);
    c.kernel_x_var = f.get<double>("kernel_x_var", c.kernel_x_var);
    c.kernel_y_var = f.get<double>("kernel_y_var", c.kernel_y_var);
    c.kernel_z_var = f.get<double>("kernel_z_var", c.kernel_z_var);
    c.a1 = matrix_field(f, "A1", c.a1);
    c.sigma1 = cov_field(f, "Sigma1", c.sigma1);
    c.a2 = matrix_field(f, "A2", c.a2);
    c.sigma2 = cov_field(f, "Sigma2", c.sigma2);
    check_square_pair(c.a1, c.sigma1, f.path("A1"), f.path("Sigma1"));
    check_square_pair(c.a2, c.sigma2, f.path("A2"), f.path("Sigma2"));
    if (c.a2.cols() != c.a1.rows()) throw ConfigError(f.path("A2"), "columns must match rows of A1");
    c.mixture = mixture_field(f, "mixture", static_cast<int>(c.a1.cols()));
    c.epsilons = list_field<double>(f, "epsilons", {}, true);
    require_all_positive(c.epsilons, f.path("epsilons"));
    require_positive(c.box, f.path("box"));
    require_positive(c.kernel_x_var, f.path("kernel_x_var"));
    require_positive(c.kernel_y_var, f.path("kernel_y_var"));
    require_positive(c.kernel_z_var, f.path("kernel_z_var"));
    if (c.n < 2) throw ConfigError(f.path("n"), "must be at least 2");
    f.finish();
    return c;
  }
  if (kind == "filter-bench") {
    FilterBenchParams b;
    b.ssm.b = f.get<double>("b", b.ssm.b);
    b.ssm.harmonics = f.get<int>("M", b.ssm.harmonics);
    b.ssm.eta = f.require<double>("eta");
    if (f.has("eta_test")) b.ssm.eta_test = f.require<double>("eta_test");
    b.ssm.sigma_h = f.get<double>("sigma_h", b.ssm.sigma_h);
    b.ssm.sigma_o = f.get<double>("sigma_o", b.ssm.sigma_o);
    b.ssm.horizon = f.get<std::size_t>("horizon", b.ssm.horizon);
    if (f.has("transition_mixture")) {
      const GaussianMixture mix = parse_mixture(f.raw("transition_mixture"), f.path("transition_mixture"), 2);
      b.ssm.transition_mixture = GaussianMixtureNoise{mix.weights, mix.means, mix.covs};
    }
    b.sizes = list_field<std::size_t>(f, "sizes", {}, true);
    b.methods = list_field<std::string>(f, "methods", {"proposed", "fkbf"}, false);
    b.cv_epsilons = list_field<double>(f, "cv_epsilons", {}, true);
    b.cv_deltas = list_field<double>(f, "cv_deltas", {}, true);
    b.cv_sigma_x = list_field<double>(f, "cv_sigma_x", {}, true);
    b.cv_sigma_z = list_field<double>(f, "cv_sigma_z", {}, true);
    b.cv_seed = f.get<std::uint64_t>("cv_seed", b.cv_seed);
    b.estimator = f.get<std::string>("estimator", b.estimator);
    f.finish();
    if (b.ssm.sigma_h < 0.0) throw ConfigError(f.path("sigma_h"), "must be non-negative");
    if (b.ssm.sigma_o < 0.0) throw ConfigError(f.path("sigma_o"), "must be non-negative");
    if (b.ssm.harmonics < 1) throw ConfigError(f.path("M"), "must be a positive integer");
    if (b.ssm.horizon < 1) throw ConfigError(f.path("horizon"), "must be at least 1");
    for (auto n : b.sizes) {
      if (n < 8) throw ConfigError(f.path("sizes"), "training sizes must be at least 8");
    }
    for (const auto& m : b.methods) {
      if (m != "proposed" && m != "fkbf") throw ConfigError(f.path("methods"), "unknown method '" + m + "'");
    }
    if (b.estimator != "preimage" && b.estimator != "argmax") {
      throw ConfigError(f.path("estimator"), "must be 'preimage' or 'argmax'");
    }
    require_all_positive(b.cv_epsilons, f.path("cv_epsilons"));
    require_all_positive(b.cv_deltas, f.path("cv_deltas"));
    require_all_positive(b.cv_sigma_x, f.path("cv_sigma_x"));
    require_all_positive(b.cv_sigma_z, f.path("cv_sigma_z"));
    return b;
  }
  if (kind == "rate-check") {
    RateCheckParams r;
    r.sizes = list_field<std::size_t>(f, "sizes", {}, true);
    r.kernel_y_var = f.get<double>("kernel_y_var", r.kernel_y_var);
    r.a = matrix_field(f, "A", r.a);
    r.sigma = cov_field(f, "Sigma", r.sigma);
    check_square_pair(r.a, r.sigma, f.path("A"), f.path("Sigma"));
    r.mixture = mixture_field(f, "mixture", static_cast<int>(r.a.cols()));
    f.finish();
    if (r.sizes.size() < 2) throw ConfigError(f.path("sizes"), "need at least two sizes");
    for (auto n : r.sizes) {
      if (n < 1) throw ConfigError(f.path("sizes"), "sizes must be positive");
    }
    require_positive(r.kernel_y_var, f.path("kernel_y_var"));
    return r;
  }
  throw ConfigError("experiment", "unknown experiment '" + kind + "'");
}

}  // namespace

KernelSpec kernel_from_json(const json& doc, const std::string& path) {
  Fields f(doc, path);
  const auto family = f.require<std::string>("family");
  KernelSpec out = [&] {
    try {
      if (family == "gaussian") {
        const Matrix r = parse_matrix(f.require_raw("R"), f.path("R"));
        require_spd(r, f.path("R"));
        return KernelSpec::gaussian(r);
      }
      if (family == "laplace") {
        const double rate = f.require<double>("lambda");
        require_positive(rate, f.path("lambda"));
        return KernelSpec::laplace(rate);
      }
      if (family == "cauchy") {
        const double scale = f.require<double>("sigma");
        require_positive(scale, f.path("sigma"));
        return KernelSpec::cauchy(scale);
      }
    } catch (const InputError& e) {
      throw ConfigError(path, e.what());
    }
    throw ConfigError(f.path("family"), "unknown kernel family '" + family + "'");
  }();
  f.finish();
  return out;
}

json kernel_to_json(const KernelSpec& spec) {
  switch (spec.family()) {
    case KernelFamily::Gaussian: {
      json r = json::array();
      const Matrix& c = spec.covariance();
      for (Eigen::Index i = 0; i < c.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < c.cols(); ++j) row.push_back(c(i, j));
        r.push_back(row);
      }
      return {{"family", "gaussian"}, {"R", r}};
    }
    case KernelFamily::Laplace: return {{"family", "laplace"}, {"lambda", spec.rate()}};
    case KernelFamily::Cauchy: return {{"family", "cauchy"}, {"sigma", spec.scale()}};
  }
  return {};
}

NoiseModel noise_model_from_json(const json& doc, const std::string& path) {
  Fields f(doc, path);
  const json& fj = f.require_raw("f");
  if (!fj.is_object() || !fj.contains("name") || !fj.at("name").is_string()) {
    throw ConfigError(f.path("f.name"), "mean function name is required");
  }
  json fparams = fj;
  fparams.erase("name");
  const std::string fname = fj.at("name").get<std::string>();
  if (!MeanFunctionRegistry::instance().contains(fname)) {
    throw ConfigError(f.path("f.name"), "unknown mean function '" + fname + "'");
  }
  MeanFunction mean_fn = [&] {
    try {
      return MeanFunctionRegistry::instance().make(fname, fparams);
    } catch (const InputError& e) {
      throw ConfigError(f.path("f"), e.what());
    } catch (const json::exception& e) {
      throw ConfigError(f.path("f"), e.what());
    }
  }();

  Fields n(f.require_raw("noise"), f.path("noise"));
  const auto kind = n.require<std::string>("kind");
  Noise noise = [&]() -> Noise {
    if (kind == "gaussian") {
      const Matrix sigma = parse_matrix(n.require_raw("Sigma"), n.path("Sigma"));
      require_spd(sigma, n.path("Sigma"));
      return GaussianNoise{sigma};
    }
    if (kind == "mixture") {
      json body = json::object();
      for (const char* k : {"weights", "means", "covs"}) body[k] = n.require_raw(k);
      const auto& means = body["means"];
      const int dim = means.is_array() && !means.empty() && means[0].is_array()
                          ? static_cast<int>(means[0].size())
                          : 0;
      const GaussianMixture mix = parse_mixture(body, f.path("noise"), dim);
      return GaussianMixtureNoise{mix.weights, mix.means, mix.covs};
    }
    if (kind == "laplace") {
      const double rate = n.require<double>("lambda");
      require_positive(rate, n.path("lambda"));
      return LaplaceNoise{rate};
    }
    if (kind == "cauchy") {
      const double scale = n.require<double>("sigma");
      require_positive(scale, n.path("sigma"));
      return CauchyNoise{scale};
    }
    throw ConfigError(n.path("kind"), "unknown noise kind '" + kind + "'");
  }();
  n.finish();
  f.finish();
  try {
    return NoiseModel(std::move(mean_fn), std::move(noise));
  } catch (const InputError& e) {
    throw ConfigError(path, e.what());
  }
}

std::vector<std::string> experiment_kinds() {
  return {"ground-truth", "misspecification", "chain", "filter-bench", "rate-check"};
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(raw.dump())));
  return buf;
}

ExperimentConfig parse_config(const json& doc) {
  Fields f(doc, "");
  const int version = f.require<int>("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));
  }
  ExperimentConfig c;
  c.experiment = f.require<std::string>("experiment");
  c.seed = f.get<std::uint64_t>("seed", 0);
  c.replicates = f.get<std::size_t>("replicates", 1);
  c.output = f.get<std::string>("output", "");
  if (c.replicates < 1) throw ConfigError("replicates", "must be at least 1");
  bool known = false;
  for (const auto& k : experiment_kinds()) known = known || k == c.experiment;
  if (!known) throw ConfigError("experiment", "unknown experiment '" + c.experiment + "'");
  c.params = parse_params(c.experiment, f.has("params") ? f.raw("params") : json::object());
  f.finish();
  c.raw = doc;
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("", "override '" + assignment + "' must have the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("", "config file '" + path + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace kbi
