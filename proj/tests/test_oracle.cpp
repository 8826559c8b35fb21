#include <doctest.h>

#include <bit>
#include <cmath>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"
#include "dppvfx/oracle.hpp"
#include "helpers.hpp"

using namespace dppvfx;

TEST_SUITE("oracle") {
  TEST_CASE("zero kernel puts all mass on the empty set") {
    const ExactDistribution d = enumerate_dpp(Matrix::Zero(3, 3));
    CHECK(d.probs[0] == doctest::Approx(1.0));
    CHECK(d.normalizer == doctest::Approx(1.0));
  }

  TEST_CASE("identity is four fair coins") {
    const ExactDistribution d = enumerate_dpp(Matrix::Identity(2, 2));
    for (const double p : d.probs) CHECK(p == doctest::Approx(0.25));
    CHECK(d.normalizer == doctest::Approx(4.0));
  }

  TEST_CASE("probabilities match cofactor expansion") {
    const Matrix l = testing::fixed_psd(4, 40);
    const ExactDistribution d = enumerate_dpp(l);
    const double z = testing::cofactor_det(l + Matrix::Identity(4, 4));
    CHECK(d.normalizer == doctest::Approx(z).epsilon(1e-10));
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < 16; ++mask) {
      const double expected = testing::cofactor_det(testing::submatrix(l, testing::members_of(mask))) / z;
      CHECK(d.probs[mask] == doctest::Approx(expected).epsilon(1e-10));
      total += d.probs[mask];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("marginals and expected size follow from the kernel") {
    const Matrix l = testing::fixed_psd(7, 41);
    const ExactDistribution d = enumerate_dpp(l);
    const RidgeLeverage r = exact_rls(l, 1.0);
    Vector marg = Vector::Zero(7);
    double size = 0.0;
    for (std::size_t mask = 0; mask < d.probs.size(); ++mask) {
      size += d.probs[mask] * std::popcount(static_cast<unsigned>(mask));
      for (Index i = 0; i < 7; ++i) {
        if (mask >> i & 1u) marg[i] += d.probs[mask];
      }
    }
    for (Index i = 0; i < 7; ++i) CHECK(marg[i] == doctest::Approx(r.tau[i]).epsilon(1e-10));
    CHECK(size == doctest::Approx(r.d_eff).epsilon(1e-10));
    const Matrix k = l * (l + Matrix::Identity(7, 7)).inverse();
    CHECK(r.d_eff == doctest::Approx(k.trace()).epsilon(1e-10));
  }

  TEST_CASE("k-DPP enumeration") {
    const Matrix l = testing::fixed_psd(5, 42);
    const KdppDistribution d = enumerate_kdpp(l, 2);
    CHECK(d.masks.size() == 10);
    double total = 0.0, weight = 0.0;
    for (std::size_t j = 0; j < d.masks.size(); ++j) {
      CHECK(std::popcount(d.masks[j]) == 2);
      total += d.probs[j];
    }
    for (const auto mask : d.masks) weight += testing::cofactor_det(testing::submatrix(l, testing::members_of(mask)));
    CHECK(total == doctest::Approx(1.0));
    CHECK(d.probs[0] == doctest::Approx(testing::cofactor_det(testing::submatrix(l, testing::members_of(d.masks[0]))) / weight));
    CHECK_THROWS_AS(enumerate_kdpp(l, 6), InvalidInput);
    Matrix rank1 = Matrix::Ones(3, 3);
    CHECK_THROWS_AS(enumerate_kdpp(rank1, 2), NumericError);
  }

  TEST_CASE("ridge leverage of simple kernels") {
    const RidgeLeverage id = exact_rls(Matrix::Identity(5, 5), 1.0);
    for (Index i = 0; i < 5; ++i) CHECK(id.tau[i] == doctest::Approx(0.5));
    CHECK(id.d_eff == doctest::Approx(2.5));
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3.0;
    const RidgeLeverage r = exact_rls(d, 1.0);
    CHECK(r.tau[0] == doctest::Approx(0.75));
    CHECK(r.tau[1] == 0.0);
    CHECK(exact_rls(d, 3.0).tau[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(exact_rls(d, 0.0), InvalidInput);
  }

  TEST_CASE("size pmf by the Poisson-binomial recursion") {
    const SizePmf one = size_pmf(Vector::Ones(2));
    CHECK(one.pmf[0] == doctest::Approx(0.25));
    CHECK(one.pmf[1] == doctest::Approx(0.5));
    CHECK(one.pmf[2] == doctest::Approx(0.25));
    CHECK(one.mean == doctest::Approx(1.0));
    CHECK(one.variance == doctest::Approx(0.5));
    CHECK(one.mode == 1);

    Vector e(3);
    e << 3.0, 1.0, 0.0;
    const SizePmf scaled = size_pmf(e, 2.0);
    CHECK(scaled.pmf[0] == doctest::Approx(1.0 / 7.0 * 1.0 / 3.0));
    CHECK(scaled.pmf[3] == 0.0);
    CHECK(scaled.mean == doctest::Approx(6.0 / 7.0 + 2.0 / 3.0));
  }

  TEST_CASE("size pmf agrees with independent coin flips") {
    Philox rng(43);
    Vector e(20);
    for (Index i = 0; i < 20; ++i) e[i] = 3.0 * rng.uniform();
    const SizePmf pmf = size_pmf(e);
    std::vector<double> freq(21, 0.0);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
      int size = 0;
      for (Index i = 0; i < 20; ++i) size += rng.uniform() < e[i] / (1.0 + e[i]) ? 1 : 0;
      freq[size] += 1.0 / reps;
    }
    for (int j = 0; j <= 20; ++j) CHECK(std::abs(freq[j] - pmf.pmf[j]) <= 4.0 * testing::binomial_sd(pmf.pmf[j], reps) + 1e-9);
  }

  TEST_CASE("mode classification") {
    CHECK(classify_mode(3.1, 10).which == ModeCase::floor_of_mean);
    CHECK(classify_mode(3.1, 10).floor_mean == 3);
    CHECK(classify_mode(3.95, 10).which == ModeCase::ceil_of_mean);
    CHECK(classify_mode(3.5, 10).which == ModeCase::either);
  }

  TEST_CASE("mask helpers and exact draws") {
    const std::vector<Index> members{0, 3, 5};
    CHECK(subset_mask(members) == 0b101001u);
    const std::vector<Index> big{32};
    CHECK_THROWS_AS(subset_mask(big), BoundsError);
    const ExactDistribution d = enumerate_dpp(Matrix::Identity(2, 2));
    Philox rng(44);
    std::vector<int> counts(4, 0);
    for (int r = 0; r < 4000; ++r) ++counts[sample_exact(d, rng)];
    for (const int c : counts) CHECK(std::abs(c - 1000) < 4 * std::sqrt(750.0));
  }

  TEST_CASE("enumeration is refused above the size limit") {
    CHECK_THROWS_AS(enumerate_dpp(Matrix::Identity(kMaxEnumerationSize + 1, kMaxEnumerationSize + 1)), InvalidInput);
    CHECK_NOTHROW(enumerate_dpp(Matrix::Identity(kMaxEnumerationSize, kMaxEnumerationSize)));
  }
}
