#pragma once

#include "dppvfx/kernel.hpp"

namespace dppvfx {

/// Eigenpairs of a symmetric matrix: values descending, vectors as
/// orthonormal columns in the same order.
struct SymEig {
  Vector values;
  Matrix vectors;
};

/// Symmetric eigendecomposition. Throws InvalidInput if `m` is not symmetric
/// within 1e-8·max(1, ‖m‖_max); NumericError (with the iteration budget) if
/// the QR iteration fails to converge.
SymEig sym_eig(const Matrix& m);

/// Eigenvalues only, descending.
Vector sym_eigenvalues(const Matrix& m);

struct PinvSqrt {
  Matrix value;     ///< M^{+/2}
  Index rank = 0;   ///< number of retained eigenvalues
  bool rank_zero = false;
};

/// M^{+/2} = V diag(a_i^{-1/2} if a_i > rel_tol·a_max else 0) Vᵀ.
PinvSqrt psd_pinv_sqrt(const Matrix& m, double rel_tol = 1e-10);

/// log det(M) for symmetric positive definite M via Cholesky; NumericError if
/// the factorization fails.
double log_det_spd(const Matrix& m);

/// Solves M X = B for symmetric positive definite M.
Matrix solve_spd(const Matrix& m, const Matrix& b);

/// max_ij |m_ij|.
double max_abs(const Matrix& m);

}  // namespace dppvfx
