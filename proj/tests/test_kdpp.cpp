#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dppvfx/errors.hpp"
#include "dppvfx/kdpp.hpp"
#include "dppvfx/linalg.hpp"
#include "dppvfx/oracle.hpp"
#include "dppvfx/stats.hpp"
#include "helpers.hpp"

using namespace dppvfx;

namespace {

IndexSequence all_indices(Index n) {
  IndexSequence all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

PsdKernel planar(Index n, double side, double sigma, std::uint64_t stream) {
  Philox rng(66, stream);
  Matrix pts(n, 2);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = side * rng.uniform();
  return PsdKernel::dense(rbf_gram(PointCloud(pts), sigma).to_dense());
}

}  // namespace

TEST_SUITE("kdpp") {
  TEST_CASE("size target") {
    CHECK(kdpp_size_target(1) == doctest::Approx(9.0 / 8.0));
    CHECK(kdpp_size_target(5) == doctest::Approx(81.0 / 16.0));
    for (Index k = 1; k < 50; ++k) {
      CHECK(kdpp_size_target(k) > static_cast<double>(k));
      CHECK(kdpp_size_target(k) < static_cast<double>(k) + 1.0 / static_cast<double>(k + 2));
    }
  }

  TEST_CASE("calibration on identities") {
    const PsdKernel id10 = PsdKernel::dense(Matrix::Identity(10, 10));
    const KdppCalibration c = find_alpha_star(id10.trace(), NystromSketch::build(id10, all_indices(10)), 5);
    CHECK(c.alpha_star == doctest::Approx(81.0 / 79.0).epsilon(1e-8));
    CHECK(c.alpha_star == doctest::Approx(1.02532).epsilon(1e-5));
    CHECK(std::abs(c.s_alpha_achieved - c.target) <= 1e-9 * c.target);
    CHECK(c.alpha_lo <= c.alpha_star);
    CHECK(c.alpha_star <= c.alpha_hi);

    const PsdKernel id2 = PsdKernel::dense(Matrix::Identity(2, 2));
    CHECK(find_alpha_star(2.0, NystromSketch::build(id2, {0, 1}), 1).alpha_star == doctest::Approx(9.0 / 7.0).epsilon(1e-8));
  }

  TEST_CASE("calibration refuses impossible targets") {
    const PsdKernel id = PsdKernel::dense(Matrix::Identity(4, 4));
    CHECK_THROWS_AS(find_alpha_star(4.0, NystromSketch::build(id, all_indices(4)), 0), InvalidInput);
    CHECK_THROWS_AS(find_alpha_star(4.0, NystromSketch::build(id, {0, 1}), 3), InvalidInput);
    // Rank 2 captured exactly: s_α < 2 for every α, target 2.1.
    Matrix l = Matrix::Zero(4, 4);
    l(0, 0) = l(1, 1) = 1.0;
    const PsdKernel low = PsdKernel::dense(l);
    CHECK_THROWS_AS(find_alpha_star(2.0, NystromSketch::build(low, {0, 1}), 2), CalibrationError);
  }

  TEST_CASE("s_alpha matches the dense formula") {
    const Matrix l = testing::fixed_psd(20, 21);
    const PsdKernel k = PsdKernel::dense(l);
    const IndexSequence c{0, 4, 9, 13, 18};
    const NystromSketch s = NystromSketch::build(k, c);
    const Matrix lhat = testing::nystrom_dense(l, c);
    const double alpha = 2.0;
    const Matrix scaled = alpha * lhat;
    const double expected = alpha * (l.trace() - lhat.trace()) +
                            (scaled * (Matrix::Identity(20, 20) + scaled).inverse()).trace();
    CHECK(s_alpha(k.trace(), s, alpha) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(s_alpha(k.trace(), s, 1e-12) < 1e-9);
    CHECK_THROWS_AS(s_alpha(k.trace(), s, 0.0), InvalidInput);

    double previous = 0.0;
    for (double a = 0.01; a < 100.0; a *= 1.5) {
      const double v = s_alpha(k.trace(), s, a);
      CHECK(v > previous);
      previous = v;
    }
  }

  TEST_CASE("scaling the kernel scales α* inversely") {
    const PsdKernel k = planar(40, 4.0, 0.8, 1);
    const IndexSequence c{1, 5, 9, 14, 20, 27, 33, 39};
    const double a = find_alpha_star(k.trace(), NystromSketch::build(k, c), 3).alpha_star;
    const PsdKernel k4 = k.scaled(4.0);
    const double b = find_alpha_star(k4.trace(), NystromSketch::build(k4, c), 3).alpha_star;
    CHECK(b == doctest::Approx(a / 4.0).epsilon(1e-8));
  }

  TEST_CASE("one out of two identical items is a fair coin") {
    const PsdKernel k = PsdKernel::dense(Matrix::Identity(2, 2));
    KdppSampler sampler(VfxSampler(k, NystromSketch::build(k, {0, 1})), 1);
    Philox rng(2);
    std::vector<std::uint64_t> counts(2, 0);
    for (int r = 0; r < 20000; ++r) {
      const DppSubset s = sampler.sample(rng);
      REQUIRE(s.members.size() == 1);
      ++counts[s.members[0]];
    }
    CHECK(chi_square_gof(counts, {0.5, 0.5}).p_value > 0.001);
  }

  TEST_CASE("conditional law does not depend on α") {
    const Matrix l = testing::fixed_psd(6, 22);
    const PsdKernel k = PsdKernel::dense(l);
    const VfxSampler base(k, NystromSketch::build(k, {0, 2, 4}));
    const KdppDistribution exact = enumerate_kdpp(l, 2);
    const double star = KdppSampler(base, 2).alpha();
    std::vector<std::vector<std::uint64_t>> groups;
    Philox rng(3);
    for (const double a : {star / 2.0, star, 2.0 * star}) {
      KdppSampler sampler(base, 2, a);
      std::vector<std::uint64_t> counts(exact.masks.size(), 0);
      for (int r = 0; r < 20000; ++r) {
        const std::uint32_t mask = subset_mask(sampler.sample(rng).members);
        const auto it = std::find(exact.masks.begin(), exact.masks.end(), mask);
        REQUIRE(it != exact.masks.end());
        ++counts[static_cast<std::size_t>(it - exact.masks.begin())];
      }
      CHECK(chi_square_gof(counts, exact.probs).p_value > 0.001);
      groups.push_back(counts);
    }
    CHECK(chi_square_homogeneity(groups).p_value > 0.001);
  }

  TEST_CASE("size k is likely at α*") {
    const PsdKernel k = planar(100, 5.0, 0.8, 4);
    Philox rng(4);
    RlsConfig config;
    config.qbar_d = 10.0;
    KdppSampler sampler = KdppSampler::build(k, config, 5, rng);
    const SizePmf pmf = size_pmf(sym_eigenvalues(k.to_dense()), sampler.alpha());
    CHECK(pmf.pmf[5] >= 0.08);

    const int draws = 3000;
    int hits = 0;
    for (int r = 0; r < draws; ++r) {
      if (sampler.scaled_sampler().sample(rng).members.size() == 5) ++hits;
    }
    const double freq = static_cast<double>(hits) / draws;
    CHECK(std::abs(freq - pmf.pmf[5]) <= 4.0 * testing::binomial_sd(pmf.pmf[5], draws));

    const DppSubset s = sampler.sample(rng);
    CHECK(s.members.size() == 5);
  }

  TEST_CASE("k is the mode once the exact size mean hits the target") {
    const PsdKernel k = planar(50, 5.0, 0.7, 5);
    const NystromSketch full = NystromSketch::build(k, all_indices(50));
    const Vector eigs = sym_eigenvalues(k.to_dense());
    for (const Index target : {1, 3, 6, 10}) {
      CAPTURE(target);
      const KdppCalibration c = find_alpha_star(k.trace(), full, target);
      const SizePmf pmf = size_pmf(eigs, c.alpha_star);
      CHECK(pmf.mean >= static_cast<double>(target));
      CHECK(pmf.mean < static_cast<double>(target) + 1.0 / static_cast<double>(target + 2));
      CHECK(pmf.mode_class.which == ModeCase::floor_of_mean);
      CHECK(pmf.mode == target);
    }
  }

  TEST_CASE("size budget") {
    const PsdKernel k = PsdKernel::dense(Matrix::Identity(6, 6));
    KdppSampler sampler(VfxSampler(k, NystromSketch::build(k, all_indices(6))), 3, 1e-4);
    KdppLimits limits;
    limits.max_size_rejections = 5;
    Philox rng(6);
    try {
      sampler.sample(rng, limits);
      FAIL("expected SizeBudgetError");
    } catch (const SizeBudgetError& e) {
      CHECK(e.histogram()[0] >= 1);
      CHECK(e.exit_code() == 4);
    }
  }
}
