#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace kbi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Point = Eigen::VectorXd;

/// A list of points, one per row. Row-major so each point is contiguous.
using PointSet =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Builds a PointSet from a list of equally sized points.
PointSet stack_points(const std::vector<Point>& points);

/// Returns true if `m` is square and symmetric up to a relative tolerance.
bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

/// Cholesky factorization of a symmetric positive-definite system matrix.
///
/// The first attempt is made on the matrix as given. If it fails, a
/// diagonal jitter starting at 1e-10 times the mean diagonal is added and
/// multiplied by 10 on each of up to three retries. After that the solver
/// gives up with a NumericError carrying a condition estimate.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const Matrix& a);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

  std::size_t size() const { return static_cast<std::size_t>(llt_.rows()); }
  double jitter() const { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

/// Solves a general square system with partial-pivoting LU. Throws
/// NumericError when the reciprocal condition estimate falls below
/// machine precision or the solution is not finite.
Vector solve_general(const Matrix& a, const Vector& rhs);

}  // namespace kbi
