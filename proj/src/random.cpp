#include "kbi/random.hpp"

#include "kbi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kbi {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t parent, std::string_view label, std::uint64_t index) {
  std::uint64_t k = mix64(parent ^ fnv1a64(label));
  return mix64(k + (index + 1) * kGolden);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view label, std::uint64_t index)
    : key_(derive_key(mix64(master_seed), label, index)) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

double RngStream::laplace(double rate) {
  const double u = uniform() - 0.5;
  const double mag = -std::log(std::max(1.0 - 2.0 * std::abs(u), 1e-300)) / rate;
  return u < 0.0 ? -mag : mag;
}

RngStream RngStream::split(std::string_view label, std::uint64_t index) const {
  return RngStream(derive_key(key_, label, index));
}

Vector sample_gaussian(RngStream& rng, const Vector& mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InputError("sample_gaussian: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw InputError("sample_gaussian: covariance not SPD");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

}  // namespace kbi
