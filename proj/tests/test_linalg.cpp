#include <doctest.h>

#include <cmath>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"
#include "helpers.hpp"

using namespace dppvfx;

TEST_SUITE("linalg") {
  TEST_CASE("eigenvalues come out descending") {
    Matrix d(2, 2);
    d << 1, 0, 0, 3;
    const SymEig e = sym_eig(d);
    CHECK(e.values(0) == doctest::Approx(3.0));
    CHECK(e.values(1) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1.0));

    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    const SymEig f = sym_eig(m);
    CHECK(f.values(0) == doctest::Approx(3.0));
    CHECK(f.values(1) == doctest::Approx(1.0));
    CHECK(std::abs(f.vectors(0, 0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  }

  TEST_CASE("decomposition reconstructs the input") {
    const Matrix m = testing::fixed_psd(10, 11) - 0.3 * Matrix::Identity(10, 10);
    const SymEig e = sym_eig(m);
    const Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK(testing::max_abs_diff(back, m) < 1e-12);
    CHECK((e.vectors.transpose() * e.vectors).isIdentity(1e-12));
  }

  TEST_CASE("asymmetric input is rejected") {
    Matrix m(2, 2);
    m << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(sym_eig(m), InvalidInput);
  }

  TEST_CASE("pseudo-inverse square root") {
    const PinvSqrt id = psd_pinv_sqrt(Matrix::Identity(3, 3));
    CHECK(id.value.isIdentity(1e-14));
    CHECK(id.rank == 3);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    const PinvSqrt half = psd_pinv_sqrt(d);
    CHECK(half.value(0, 0) == doctest::Approx(0.5));
    CHECK(half.value(1, 1) == 0.0);
    CHECK(half.rank == 1);

    CHECK(psd_pinv_sqrt(Matrix::Zero(3, 3)).rank_zero);

    // Rank-3 5×5: M^{+/2} M M^{+/2} is the projector onto range(M).
    Philox rng(12);
    const Matrix low = random_psd(5, 3, rng);
    const Matrix p = psd_pinv_sqrt(low).value;
    const Matrix proj = p * low * p;
    CHECK(testing::max_abs_diff(proj * proj, proj) < 1e-9);
    CHECK(proj.trace() == doctest::Approx(3.0).epsilon(1e-9));
  }

  TEST_CASE("log det and solves") {
    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    CHECK(log_det_spd(m) == doctest::Approx(std::log(3.0)));
    const Matrix x = solve_spd(m, Matrix::Identity(2, 2));
    CHECK((m * x).isIdentity(1e-14));
    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(log_det_spd(indefinite), NumericError);
    CHECK(max_abs(indefinite) == 2.0);
  }
}
