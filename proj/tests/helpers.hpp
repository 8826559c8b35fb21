#pragma once

#include <cmath>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

#include "dppvfx/kernel.hpp"
#include "dppvfx/rng.hpp"
#include "dppvfx/synthetic.hpp"

namespace testing {

using dppvfx::Index;
using dppvfx::Matrix;

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dppvfx-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& body) const {
    std::ofstream(file(name), std::ios::binary) << body;
    return file(name);
  }

 private:
  std::filesystem::path path_;
};

inline Matrix fixed_psd(Index n, std::uint64_t seed, double scale = 1.0) {
  dppvfx::Philox rng(seed, 77);
  return scale * dppvfx::random_psd(n, n, rng);
}

/// Determinant by Laplace expansion along the first row.
inline double cofactor_det(const Matrix& m) {
  const Index n = m.rows();
  if (n == 0) return 1.0;
  if (n == 1) return m(0, 0);
  double det = 0.0;
  for (Index j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (Index r = 1; r < n; ++r) {
      for (Index c = 0, cc = 0; c < n; ++c) {
        if (c != j) minor(r - 1, cc++) = m(r, c);
      }
    }
    det += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * cofactor_det(minor);
  }
  return det;
}

inline Matrix submatrix(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = m(idx[a], idx[b]);
  }
  return out;
}

inline std::vector<Index> members_of(std::uint32_t mask) {
  std::vector<Index> out;
  for (Index i = 0; i < 32; ++i) {
    if (mask >> i & 1u) out.push_back(i);
  }
  return out;
}

/// Dense L̂ = L_{I,C} L_C⁺ L_{C,I} by the textbook formula.
inline Matrix nystrom_dense(const Matrix& l, const std::vector<Index>& c) {
  Matrix cols(l.rows(), static_cast<Index>(c.size()));
  for (std::size_t b = 0; b < c.size(); ++b) cols.col(static_cast<Index>(b)) = l.col(c[b]);
  const Eigen::MatrixXd lc = submatrix(l, c);
  const Eigen::MatrixXd pinv = lc.completeOrthogonalDecomposition().pseudoInverse();
  return cols * pinv * cols.transpose();
}

inline double binomial_sd(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace testing

namespace testing {

inline double max_abs_diff(const dppvfx::Matrix& a, const dppvfx::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing
