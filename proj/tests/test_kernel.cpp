#include <doctest.h>

#include <cmath>

#include "dppvfx/errors.hpp"
#include "dppvfx/kernel.hpp"
#include "dppvfx/linalg.hpp"
#include "helpers.hpp"

using namespace dppvfx;

TEST_SUITE("kernel") {
  TEST_CASE("csv identity loads with and without header") {
    testing::TempDir dir;
    const auto plain = dir.write("i2.csv", "1,0\n0,1\n");
    const auto headed = dir.write("i2h.csv", "2\n1,0\n0,1\n");
    for (const auto& path : {plain, headed}) {
      const PsdKernel k = load_dense_kernel(path, KernelFormat::text_csv);
      CHECK(k.size() == 2);
      CHECK(k.to_dense().isApprox(Matrix::Identity(2, 2)));
      CHECK(k.trace() == doctest::Approx(2.0));
    }
  }

  TEST_CASE("asymmetric input is averaged, or rejected under the strict policy") {
    testing::TempDir dir;
    const auto path = dir.write("asym.csv", "1,0\n0.5,1\n");
    const PsdKernel k = load_dense_kernel(path, KernelFormat::text_csv);
    CHECK(k(0, 1) == doctest::Approx(0.25));
    CHECK(k(1, 0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(load_dense_kernel(path, KernelFormat::text_csv, SymmetryPolicy::strict), InvalidInput);
  }

  TEST_CASE("parse errors carry row and column") {
    testing::TempDir dir;
    const auto path = dir.write("nan.csv", "1,0\n0,nan\n");
    try {
      load_dense_kernel(path, KernelFormat::text_csv);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 2);
      CHECK(e.col() == 2);
    }
    CHECK_THROWS_AS(load_dense_kernel(dir.write("ragged.csv", "1,0\n0\n"), KernelFormat::text_csv), ParseError);
    CHECK_THROWS_AS(load_dense_kernel(dir.write("rect.csv", "1,0,0\n0,1,0\n"), KernelFormat::text_csv), ParseError);
  }

  TEST_CASE("binary round trip is bit exact") {
    testing::TempDir dir;
    const Matrix m = testing::fixed_psd(9, 3);
    const auto path = dir.file("k.bin");
    save_dense_kernel(path, m, KernelFormat::binary_f64);
    CHECK(sniff_kernel_format(path) == KernelFormat::binary_f64);
    const Matrix back = load_dense_kernel(path, KernelFormat::binary_f64).to_dense();
    CHECK(back == m);
    const auto csv = dir.file("k.csv");
    save_dense_kernel(csv, m, KernelFormat::text_csv);
    CHECK(sniff_kernel_format(csv) == KernelFormat::text_csv);
    CHECK(load_dense_kernel(csv, KernelFormat::text_csv).to_dense() == m);
  }

  TEST_CASE("rbf on coincident points is all ones") {
    Matrix pts(2, 3);
    pts << 1, 2, 3, 1, 2, 3;
    const PsdKernel k = PsdKernel::rbf(std::make_shared<PointCloud>(pts), 0.7);
    CHECK(k.to_dense().isApprox(Matrix::Ones(2, 2)));
  }

  TEST_CASE("rbf at distance sigma·√2 is 1/e") {
    const double sigma = 1.3;
    Matrix pts(2, 1);
    pts << 0.0, sigma * std::sqrt(2.0);
    const auto cloud = std::make_shared<PointCloud>(pts);
    const PsdKernel implicit = PsdKernel::rbf(cloud, sigma);
    const PsdKernel dense = rbf_gram(*cloud, sigma);
    CHECK(implicit(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(dense(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(dense(0, 0) == 1.0);
  }

  TEST_CASE("high-dimensional rbf gram is psd and matches the implicit form") {
    Philox rng(7, 10);
    const PointCloud cloud = gaussian_blobs({.n = 100, .dim = 784, .clusters = 10}, rng);
    const double sigma = default_sigma(784);
    CHECK(sigma == doctest::Approx(std::sqrt(3.0 * 784)));
    const Matrix g = rbf_gram(cloud, sigma).to_dense();
    const Vector eigs = sym_eigenvalues(g);
    CHECK(eigs.minCoeff() >= -1e-8);

    // Independent check on the smallest eigenvalue: power iteration on cI − G.
    const double c = eigs.maxCoeff() + 1.0;
    Vector v = Vector::Ones(100).normalized();
    for (int it = 0; it < 5000; ++it) v = (c * v - g * v).normalized();
    CHECK(c - v.dot(c * v - g * v) >= -1e-8);

    const PsdKernel implicit = PsdKernel::rbf(std::make_shared<PointCloud>(cloud), sigma);
    CHECK(testing::max_abs_diff(implicit.to_dense(), g) < 1e-10);
  }

  TEST_CASE("principal submatrix repeats duplicated indices and checks bounds") {
    const Matrix m = testing::fixed_psd(5, 4);
    const PsdKernel k = PsdKernel::dense(m);
    const std::vector<Index> idx{3, 1, 3};
    const Matrix sub = principal_submatrix(k, idx, idx);
    CHECK(sub.rows() == 3);
    CHECK(sub(0, 2) == doctest::Approx(m(3, 3)));
    CHECK(sub(0, 1) == doctest::Approx(m(3, 1)));
    CHECK(sub.row(0) == sub.row(2));
    const std::vector<Index> bad{0, 5};
    CHECK_THROWS_AS(principal_submatrix(k, bad, bad), BoundsError);
    const std::vector<Index> negative{-1};
    CHECK_THROWS_AS(k.block(negative, negative), BoundsError);
  }

  TEST_CASE("scaled kernels share storage and multiply every entry") {
    const Matrix m = testing::fixed_psd(4, 5);
    const PsdKernel k = PsdKernel::dense(m);
    const PsdKernel k3 = k.scaled(3.0);
    CHECK(k3.dense_storage() == k.dense_storage());
    CHECK(k3.to_dense().isApprox(3.0 * m));
    CHECK(k3.trace() == doctest::Approx(3.0 * m.trace()));
    CHECK(k.is_psd());
  }

  TEST_CASE("point cloud files round trip") {
    testing::TempDir dir;
    Matrix pts(3, 2);
    pts << 0.5, -1, 2, 3.25, 1e-3, 7;
    save_point_cloud(dir.file("p.csv"), PointCloud(pts));
    CHECK(load_point_cloud(dir.file("p.csv")).points() == pts);
    CHECK_THROWS_AS(load_point_cloud(dir.write("bad.csv", "3\n1,2\n")), ParseError);
  }
}
