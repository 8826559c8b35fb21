#include "dppvfx/kernel.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"
#include "dppvfx/parallel.hpp"

namespace dppvfx {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void check_indices(std::span<const Index> indices, Index n, const char* what) {
  for (std::size_t a = 0; a < indices.size(); ++a) {
    if (indices[a] < 0 || indices[a] >= n) {
      throw BoundsError(std::string(what) + " " + std::to_string(indices[a]) + " at position " + std::to_string(a) +
                        " is outside [0, " + std::to_string(n) + ")");
    }
  }
}

PointCloud::PointCloud(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw InvalidInput("point cloud must have n ≥ 1 and d ≥ 1");
  if (!points_.allFinite()) {
    for (Index i = 0; i < points_.rows(); ++i)
      for (Index j = 0; j < points_.cols(); ++j)
        if (!std::isfinite(points_(i, j))) throw ParseError("non-finite point coordinate", i + 1, j + 1);
  }
  sq_norms_ = points_.rowwise().squaredNorm();
}

PsdKernel PsdKernel::dense(Matrix entries, SymmetryPolicy policy) {
  if (entries.rows() != entries.cols()) throw InvalidInput("kernel matrix must be square");
  if (entries.rows() < 1) throw InvalidInput("kernel must have n ≥ 1");
  if (!entries.allFinite()) throw InvalidInput("kernel entries must be finite");
  const Index n = entries.rows();
  if (policy == SymmetryPolicy::strict) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (std::fabs(entries(i, j) - entries(j, i)) > 1e-6) {
          throw InvalidInput("kernel is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (entries(i, j) + entries(j, i));
      entries(i, j) = avg;
      entries(j, i) = avg;
    }
  }
  PsdKernel k;
  k.base_trace_ = entries.trace();
  k.dense_ = std::make_shared<const Matrix>(std::move(entries));
  return k;
}

PsdKernel PsdKernel::rbf(std::shared_ptr<const PointCloud> cloud, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be positive, got " + std::to_string(sigma));
  if (!cloud) throw InvalidInput("null point cloud");
  PsdKernel k;
  k.base_trace_ = static_cast<double>(cloud->size());
  k.cloud_ = std::move(cloud);
  k.sigma_ = sigma;
  return k;
}

Index PsdKernel::size() const noexcept { return dense_ ? dense_->rows() : cloud_->size(); }

double PsdKernel::operator()(Index i, Index j) const {
  const Index n = size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw BoundsError("kernel entry (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
  if (dense_) return scale_ * (*dense_)(i, j);
  if (i == j) return scale_;
  const double d2 = (cloud_->points().row(i) - cloud_->points().row(j)).squaredNorm();
  return scale_ * std::exp(-d2 / (2.0 * sigma_ * sigma_));
}

double PsdKernel::diag(Index i) const {
  if (i < 0 || i >= size()) throw BoundsError("diagonal index " + std::to_string(i) + " out of range");
  return dense_ ? scale_ * (*dense_)(i, i) : scale_;
}

Vector PsdKernel::diagonal() const {
  if (dense_) return scale_ * dense_->diagonal();
  return Vector::Constant(size(), scale_);
}

Matrix PsdKernel::block(std::span<const Index> rows, std::span<const Index> cols) const {
  check_indices(rows, size(), "row index");
  check_indices(cols, size(), "column index");
  if (!dense_) {
    Matrix out = rbf_block(cloud_->points(), rows, cols, sigma_);
    if (scale_ != 1.0) out *= scale_;
    return out;
  }
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (Index a = 0; a < out.rows(); ++a)
    for (Index b = 0; b < out.cols(); ++b) out(a, b) = scale_ * (*dense_)(rows[a], cols[b]);
  return out;
}

Matrix PsdKernel::columns(std::span<const Index> cols) const {
  check_indices(cols, size(), "column index");
  Matrix out;
  if (dense_) {
    out.resize(size(), static_cast<Index>(cols.size()));
    for (Index c = 0; c < out.cols(); ++c) out.col(c) = dense_->col(cols[c]);
  } else {
    out = omp::rbf_columns(cloud_->points(), cloud_->squared_norms(), cols, sigma_);
  }
  if (scale_ != 1.0) out *= scale_;
  return out;
}

Matrix PsdKernel::to_dense(Index max_n) const {
  if (size() > max_n) {
    throw InvalidInput("refusing to materialize a " + std::to_string(size()) + "×" + std::to_string(size()) + " kernel");
  }
  if (dense_) return scale_ * (*dense_);
  Matrix out = omp::rbf_gram(cloud_->points(), sigma_);
  if (scale_ != 1.0) out *= scale_;
  return out;
}

PsdKernel PsdKernel::scaled(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("kernel scale must be positive");
  PsdKernel k = *this;
  k.scale_ = scale_ * alpha;
  return k;
}

bool PsdKernel::is_psd(double rel_tol) const {
  const SymEig eig = sym_eig(to_dense(5000));
  const double top = std::max(eig.values[0], 0.0);
  return eig.values[eig.values.size() - 1] >= -rel_tol * top;
}

double default_sigma(Index dim) { return std::sqrt(3.0 * static_cast<double>(dim)); }

PsdKernel rbf_gram(const PointCloud& cloud, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be positive, got " + std::to_string(sigma));
  return PsdKernel::dense(omp::rbf_gram(cloud.points(), sigma));
}

Matrix principal_submatrix(const PsdKernel& kernel, std::span<const Index> rows, std::span<const Index> cols) {
  return kernel.block(rows, cols);
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::vector<std::string_view> split_fields(std::string_view line, bool allow_space) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    const bool sep = i == line.size() || line[i] == ',' || (allow_space && (line[i] == ' ' || line[i] == '\t'));
    if (!sep) continue;
    std::string_view field = line.substr(start, i - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    if (!(allow_space && field.empty())) fields.push_back(field);
    start = i + 1;
  }
  return fields;
}

double parse_real(std::string_view field, std::size_t row, std::size_t col) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("cannot parse '" + std::string(field) + "' as a real", row, col);
  }
  if (!std::isfinite(value)) throw ParseError("non-finite entry '" + std::string(field) + "'", row, col);
  return value;
}

long parse_count(std::string_view field, std::size_t row) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value < 1) {
    throw ParseError("expected a positive integer, got '" + std::string(field) + "'", row, 1);
  }
  return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && split_fields(lines.back(), true).empty()) lines.pop_back();
  return lines;
}

Matrix parse_text_kernel(const std::vector<std::string>& lines) {
  if (lines.empty()) throw ParseError("empty kernel file");
  std::size_t first = 0;
  long n = 0;
  const auto head = split_fields(lines[0], false);
  if (head.size() == 1 && lines.size() > 1) {
    n = parse_count(head[0], 1);
    first = 1;
  } else {
    n = static_cast<long>(head.size());
  }
  if (static_cast<long>(lines.size() - first) != n) {
    throw ParseError("expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size() - first),
                     lines.size() + 1);
  }
  Matrix m(n, n);
  for (long r = 0; r < n; ++r) {
    const std::size_t file_row = first + r + 1;
    const auto fields = split_fields(lines[first + r], false);
    if (static_cast<long>(fields.size()) != n) {
      throw ParseError("expected " + std::to_string(n) + " columns, found " + std::to_string(fields.size()), file_row);
    }
    for (long c = 0; c < n; ++c) m(r, c) = parse_real(fields[c], file_row, c + 1);
  }
  return m;
}

Matrix parse_binary_kernel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[4];
  std::uint32_t n = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, "DPPK", 4) != 0) throw ParseError("bad magic, expected DPPK");
  if (!in.read(reinterpret_cast<char*>(&n), 4) || n == 0) throw ParseError("missing or zero dimension");
  Matrix m(n, n);
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double)) * n * n)) {
    throw ParseError("payload shorter than n² = " + std::to_string(std::uint64_t{n} * n) + " doubles");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after payload");
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j))) throw ParseError("non-finite entry", i + 1, j + 1);
  return m;
}

}  // namespace

KernelFormat sniff_kernel_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, "DPPK", 4) == 0 ? KernelFormat::binary_f64 : KernelFormat::text_csv;
}

PsdKernel load_dense_kernel(const std::filesystem::path& path, KernelFormat format, SymmetryPolicy policy) {
  Matrix m = format == KernelFormat::text_csv ? parse_text_kernel(read_lines(path)) : parse_binary_kernel(path);
  return PsdKernel::dense(std::move(m), policy);
}

void save_dense_kernel(const std::filesystem::path& path, const Matrix& entries, KernelFormat format) {
  if (format == KernelFormat::binary_f64) {
    std::ofstream out(path, std::ios::binary);
    const auto n = static_cast<std::uint32_t>(entries.rows());
    out.write("DPPK", 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(entries.data()), static_cast<std::streamsize>(sizeof(double)) * n * n);
    if (!out) throw InvalidInput("failed writing " + path.string());
    return;
  }
  std::ofstream out(path);
  out << entries.rows() << '\n';
  out.precision(17);
  for (Index i = 0; i < entries.rows(); ++i) {
    for (Index j = 0; j < entries.cols(); ++j) out << (j ? "," : "") << entries(i, j);
    out << '\n';
  }
  if (!out) throw InvalidInput("failed writing " + path.string());
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError("empty point file");
  const auto head = split_fields(lines[0], true);
  if (head.size() != 2) throw ParseError("header must be 'n d'", 1);
  const long n = parse_count(head[0], 1);
  const long d = parse_count(head[1], 1);
  if (static_cast<long>(lines.size()) - 1 != n) {
    throw ParseError("expected " + std::to_string(n) + " point rows, found " + std::to_string(lines.size() - 1));
  }
  Matrix pts(n, d);
  for (long r = 0; r < n; ++r) {
    const auto fields = split_fields(lines[r + 1], false);
    if (static_cast<long>(fields.size()) != d) {
      throw ParseError("expected " + std::to_string(d) + " coordinates, found " + std::to_string(fields.size()), r + 2);
    }
    for (long c = 0; c < d; ++c) pts(r, c) = parse_real(fields[c], r + 2, c + 1);
  }
  return PointCloud(std::move(pts));
}

void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  out << cloud.size() << ' ' << cloud.dim() << '\n';
  out.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index j = 0; j < cloud.dim(); ++j) out << (j ? "," : "") << cloud.points()(i, j);
    out << '\n';
  }
  if (!out) throw InvalidInput("failed writing " + path.string());
}

}  // namespace dppvfx
