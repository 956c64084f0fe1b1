#include "kbi/linalg.hpp"

#include "kbi/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace kbi {

PointSet stack_points(const std::vector<Point>& points) {
  if (points.empty()) return PointSet(0, 0);
  const auto dim = points.front().size();
  PointSet out(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) {
      throw InputError("stack_points: points have differing dimensions");
    }
    out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return out;
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

namespace {

double condition_estimate(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

SpdSolver::SpdSolver(const Matrix& a) {
  if (a.rows() != a.cols()) throw InputError("SpdSolver: matrix is not square");
  if (!a.allFinite()) throw NumericError("SpdSolver: matrix has non-finite entries");

  llt_.compute(a);
  if (llt_.info() == Eigen::Success) return;

  const double mean_diag =
      a.rows() > 0 ? std::abs(a.diagonal().mean()) : 1.0;
  double jitter = 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);
  for (int retry = 0; retry < 3; ++retry) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    llt_.compute(shifted);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      return;
    }
    jitter *= 10.0;
  }
  std::ostringstream msg;
  msg << "SpdSolver: Cholesky failed after jitter escalation (n=" << a.rows()
      << ", condition estimate " << condition_estimate(a) << ")";
  throw NumericError(msg.str());
}

Vector SpdSolver::solve(const Vector& rhs) const {
  if (rhs.size() != llt_.rows()) throw InputError("SpdSolver::solve: size mismatch");
  return llt_.solve(rhs);
}

Matrix SpdSolver::solve(const Matrix& rhs) const {
  if (rhs.rows() != llt_.rows()) throw InputError("SpdSolver::solve: size mismatch");
  return llt_.solve(rhs);
}

Vector solve_general(const Matrix& a, const Vector& rhs) {
  if (a.rows() != a.cols() || a.rows() != rhs.size()) {
    throw InputError("solve_general: dimension mismatch");
  }
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    std::ostringstream msg;
    msg << "solve_general: system is singular to working precision (rcond "
        << rcond << ", n=" << a.rows() << ")";
    throw NumericError(msg.str());
  }
  Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw NumericError("solve_general: non-finite solution");
  return x;
}

}  // namespace kbi
