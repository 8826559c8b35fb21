#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace dppvfx {

using Index = Eigen::Index;
/// Row-major dense storage; the canonical layout for kernels, factors and files.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Ordered index list; duplicates allowed. Submatrices indexed by a sequence
/// repeat rows/columns literally (no multiplicity rescaling).
using IndexSequence = std::vector<Index>;

/// Throws BoundsError if any entry is outside [0, n).
void check_indices(std::span<const Index> indices, Index n, const char* what = "index");

/// n points in d dimensions, one per row. Finite entries only.
class PointCloud {
 public:
  explicit PointCloud(Matrix points);

  Index size() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  const Vector& squared_norms() const noexcept { return sq_norms_; }

 private:
  Matrix points_;
  Vector sq_norms_;
};

enum class SymmetryPolicy {
  average,  ///< replace L by (L + Lᵀ)/2
  strict,   ///< reject asymmetry above 1e-6, then average
};

/// The n×n PSD likelihood kernel L.
///
/// Either stored densely or evaluated on demand as a Gaussian RBF over a
/// point cloud. Instances are immutable and cheap to copy (storage is shared);
/// `scaled(alpha)` yields alpha·L over the same storage.
class PsdKernel {
 public:
  /// Dense kernel; `entries` must be square. Symmetry is enforced by averaging.
  static PsdKernel dense(Matrix entries, SymmetryPolicy policy = SymmetryPolicy::average);

  /// Implicit kernel L_ij = exp(-‖x_i - x_j‖² / (2σ²)) over `cloud`.
  static PsdKernel rbf(std::shared_ptr<const PointCloud> cloud, double sigma);

  Index size() const noexcept;
  double trace() const noexcept { return scale_ * base_trace_; }
  double scale() const noexcept { return scale_; }
  bool is_dense() const noexcept { return dense_ != nullptr; }

  double operator()(Index i, Index j) const;
  double diag(Index i) const;
  Vector diagonal() const;

  /// M_ab = L[rows_a, cols_b]. Throws BoundsError on bad indices.
  Matrix block(std::span<const Index> rows, std::span<const Index> cols) const;

  /// The n×|cols| matrix L_{I,C}. Parallel over rows.
  Matrix columns(std::span<const Index> cols) const;

  /// Materializes L (refused above `max_n`).
  Matrix to_dense(Index max_n = 20000) const;

  PsdKernel scaled(double alpha) const;

  /// Largest / smallest eigenvalue of the dense form; for PSD checks on small n.
  bool is_psd(double rel_tol = 1e-8) const;

  const Matrix* dense_storage() const noexcept { return dense_.get(); }
  const PointCloud* cloud() const noexcept { return cloud_.get(); }
  double sigma() const noexcept { return sigma_; }

 private:
  PsdKernel() = default;

  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<const PointCloud> cloud_;
  double sigma_ = 0.0;
  double scale_ = 1.0;
  double base_trace_ = 0.0;
};

/// Dense Gaussian Gram matrix over `cloud`. Diagonal exactly 1.
PsdKernel rbf_gram(const PointCloud& cloud, double sigma);

/// Default bandwidth for d-dimensional data: √(3d).
double default_sigma(Index dim);

/// L[rows, cols] with literal repetition of duplicated indices.
Matrix principal_submatrix(const PsdKernel& kernel, std::span<const Index> rows, std::span<const Index> cols);

enum class KernelFormat { text_csv, binary_f64 };

/// Text: optional header line `n`, then n comma-separated rows of n reals.
/// Binary: magic "DPPK", u32 LE n, n² f64 LE row-major.
PsdKernel load_dense_kernel(const std::filesystem::path& path, KernelFormat format,
                            SymmetryPolicy policy = SymmetryPolicy::average);
void save_dense_kernel(const std::filesystem::path& path, const Matrix& entries, KernelFormat format);

/// Guess the format from the first four bytes.
KernelFormat sniff_kernel_format(const std::filesystem::path& path);

/// Header `n d`, then n rows of d comma-separated reals.
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace dppvfx
