#pragma once

// Data-parallel kernels. Every routine exists twice: `omp::` (OpenMP over
// row blocks or bitmask ranges, used by the library) and `serial::` (plain
// loops, kept as the reference for tests and the benchmark). Each output
// element is computed by exactly one thread in a fixed order, so the two
// agree bitwise except where a BLAS-style product is blocked differently.

#include <span>
#include <vector>

#include "dppvfx/kernel.hpp"

namespace dppvfx {

/// Lower Cholesky factor of I + A_mm as stored in a sketch.
using LowerFactor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

namespace omp {

/// Full Gaussian Gram matrix by direct differences; diagonal exactly 1.
Matrix rbf_gram(const Matrix& points, double sigma);

/// n×|cols| Gaussian kernel columns via the ‖x‖² + ‖y‖² − 2⟨x,y⟩ expansion.
Matrix rbf_columns(const Matrix& points, const Vector& sq_norms, std::span<const Index> cols, double sigma);

/// a·b, parallel over row blocks of a.
Matrix multiply(const Matrix& a, const Matrix& b);

/// l_i = max(floor, (diag_i − ‖f_i‖²) + ‖T⁻¹ f_iᵀ‖²) for every row f_i of `factor`.
Vector leverage_rows(const Matrix& factor, const LowerFactor& chol, const Vector& diag, double floor);

/// det(L_S) for every subset S ⊆ [n], indexed by bitmask.
std::vector<double> subset_determinants(const Matrix& kernel);

}  // namespace omp

namespace serial {

Matrix rbf_gram(const Matrix& points, double sigma);
Matrix rbf_columns(const Matrix& points, const Vector& sq_norms, std::span<const Index> cols, double sigma);
Matrix multiply(const Matrix& a, const Matrix& b);
Vector leverage_rows(const Matrix& factor, const LowerFactor& chol, const Vector& diag, double floor);
std::vector<double> subset_determinants(const Matrix& kernel);

}  // namespace serial

/// Gaussian kernel block by direct differences (for small t×t intermediate kernels).
Matrix rbf_block(const Matrix& points, std::span<const Index> rows, std::span<const Index> cols, double sigma);

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace dppvfx
