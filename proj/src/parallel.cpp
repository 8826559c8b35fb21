#include "dppvfx/parallel.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dppvfx {

namespace {

constexpr Index kRowBlock = 256;

inline double gauss(double sq_dist, double inv_two_sigma_sq) {
  return std::exp(-std::max(sq_dist, 0.0) * inv_two_sigma_sq);
}

inline double direct_sq_dist(const Matrix& points, Index i, Index j) {
  return (points.row(i) - points.row(j)).squaredNorm();
}

void gram_row(const Matrix& points, Index i, double inv, Matrix& out) {
  out(i, i) = 1.0;
  for (Index j = i + 1; j < points.rows(); ++j) out(i, j) = gauss(direct_sq_dist(points, i, j), inv);
}

void columns_block(const Matrix& points, const Vector& sq_norms, std::span<const Index> cols, const Matrix& selected,
                   double inv, Index row_begin, Index row_end, Matrix& out) {
  const Index rows = row_end - row_begin;
  out.middleRows(row_begin, rows).noalias() = points.middleRows(row_begin, rows) * selected.transpose();
  for (Index i = row_begin; i < row_end; ++i) {
    for (Index c = 0; c < static_cast<Index>(cols.size()); ++c) {
      if (cols[c] == i) {
        out(i, c) = 1.0;
      } else {
        out(i, c) = gauss(sq_norms[i] + sq_norms[cols[c]] - 2.0 * out(i, c), inv);
      }
    }
  }
}

Matrix gather_rows(const Matrix& points, std::span<const Index> cols) {
  Matrix selected(static_cast<Index>(cols.size()), points.cols());
  for (Index c = 0; c < selected.rows(); ++c) selected.row(c) = points.row(cols[c]);
  return selected;
}

double leverage_row(const Matrix& factor, const LowerFactor& chol, const Vector& diag, double floor, Index i) {
  Vector y = factor.row(i).transpose();
  const double captured = y.squaredNorm();
  chol.triangularView<Eigen::Lower>().solveInPlace(y);
  return std::max(floor, (diag[i] - captured) + y.squaredNorm());
}

double mask_determinant(const Matrix& kernel, unsigned mask) {
  const int size = __builtin_popcount(mask);
  if (size == 0) return 1.0;
  std::vector<Index> members;
  members.reserve(size);
  for (Index i = 0; i < kernel.rows(); ++i)
    if (mask & (1u << i)) members.push_back(i);
  Eigen::MatrixXd sub(size, size);
  for (int a = 0; a < size; ++a)
    for (int b = 0; b < size; ++b) sub(a, b) = kernel(members[a], members[b]);
  return std::max(0.0, sub.partialPivLu().determinant());
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix rbf_block(const Matrix& points, std::span<const Index> rows, std::span<const Index> cols, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (Index a = 0; a < out.rows(); ++a)
    for (Index b = 0; b < out.cols(); ++b)
      out(a, b) = rows[a] == cols[b] ? 1.0 : gauss(direct_sq_dist(points, rows[a], cols[b]), inv);
  return out;
}

namespace omp {

Matrix rbf_gram(const Matrix& points, double sigma) {
  const Index n = points.rows();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix out(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Index i = 0; i < n; ++i) gram_row(points, i, inv, out);
  out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

Matrix rbf_columns(const Matrix& points, const Vector& sq_norms, std::span<const Index> cols, double sigma) {
  const Index n = points.rows();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const Matrix selected = gather_rows(points, cols);
  Matrix out(n, static_cast<Index>(cols.size()));
  const Index blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    columns_block(points, sq_norms, cols, selected, inv, b * kRowBlock, std::min(n, (b + 1) * kRowBlock), out);
  }
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  const Index blocks = (a.rows() + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const Index begin = blk * kRowBlock;
    const Index rows = std::min(a.rows(), begin + kRowBlock) - begin;
    out.middleRows(begin, rows).noalias() = a.middleRows(begin, rows) * b;
  }
  return out;
}

Vector leverage_rows(const Matrix& factor, const LowerFactor& chol, const Vector& diag, double floor) {
  Vector out(factor.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < factor.rows(); ++i) out[i] = leverage_row(factor, chol, diag, floor, i);
  return out;
}

std::vector<double> subset_determinants(const Matrix& kernel) {
  const long count = 1L << kernel.rows();
  std::vector<double> dets(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (long mask = 0; mask < count; ++mask) dets[mask] = mask_determinant(kernel, static_cast<unsigned>(mask));
  return dets;
}

}  // namespace omp

namespace serial {

Matrix rbf_gram(const Matrix& points, double sigma) {
  const Index n = points.rows();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      out(i, j) = i == j ? 1.0 : gauss(direct_sq_dist(points, std::min(i, j), std::max(i, j)), inv);
    }
  }
  return out;
}

Matrix rbf_columns(const Matrix& points, const Vector& sq_norms, std::span<const Index> cols, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix out(points.rows(), static_cast<Index>(cols.size()));
  columns_block(points, sq_norms, cols, gather_rows(points, cols), inv, 0, points.rows(), out);
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out = a * b;
  return out;
}

Vector leverage_rows(const Matrix& factor, const LowerFactor& chol, const Vector& diag, double floor) {
  Vector out(factor.rows());
  for (Index i = 0; i < factor.rows(); ++i) out[i] = leverage_row(factor, chol, diag, floor, i);
  return out;
}

std::vector<double> subset_determinants(const Matrix& kernel) {
  const unsigned count = 1u << kernel.rows();
  std::vector<double> dets(count);
  for (unsigned mask = 0; mask < count; ++mask) dets[mask] = mask_determinant(kernel, mask);
  return dets;
}

}  // namespace serial

}  // namespace dppvfx
