#include "dppvfx/linalg.hpp"

#include <cmath>

#include "dppvfx/errors.hpp"

namespace dppvfx {

namespace {

// Eigen's tridiagonal QR allows 30 sweeps per eigenvalue.
constexpr long kSweepsPerEigenvalue = 30;

void require_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("matrix must be square");
  const double tol = 1e-8 * std::max(1.0, max_abs(m));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i + 1; j < m.cols(); ++j)
      if (std::fabs(m(i, j) - m(j, i)) > tol) {
        throw InvalidInput("matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
}

}  // namespace

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

SymEig sym_eig(const Matrix& m) {
  require_symmetric(m);
  SymEig out;
  if (m.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericError("symmetric eigensolver did not converge", kSweepsPerEigenvalue * m.rows());
  }
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Vector sym_eigenvalues(const Matrix& m) {
  require_symmetric(m);
  if (m.rows() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("symmetric eigensolver did not converge", kSweepsPerEigenvalue * m.rows());
  }
  return solver.eigenvalues().reverse();
}

PinvSqrt psd_pinv_sqrt(const Matrix& m, double rel_tol) {
  const SymEig eig = sym_eig(m);
  PinvSqrt out;
  const Index n = m.rows();
  out.value = Matrix::Zero(n, n);
  if (n == 0 || eig.values[0] <= 0.0) {
    out.rank_zero = true;
    return out;
  }
  const double cutoff = rel_tol * eig.values[0];
  Vector scale = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (eig.values[i] > cutoff) {
      scale[i] = 1.0 / std::sqrt(eig.values[i]);
      ++out.rank;
    }
  }
  out.value.noalias() = eig.vectors * scale.asDiagonal() * eig.vectors.transpose();
  out.value = 0.5 * (out.value + out.value.transpose()).eval();
  return out;
}

double log_det_spd(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization failed: matrix not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix solve_spd(const Matrix& m, const Matrix& b) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorization failed: matrix not positive definite");
  return llt.solve(b);
}

}  // namespace dppvfx
