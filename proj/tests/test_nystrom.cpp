#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dppvfx/errors.hpp"
#include "dppvfx/nystrom.hpp"
#include "dppvfx/linalg.hpp"
#include "dppvfx/oracle.hpp"
#include "helpers.hpp"

using namespace dppvfx;

namespace {

IndexSequence all_indices(Index n) {
  IndexSequence all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

PsdKernel planar(Index n, double sigma, std::uint64_t stream) {
  Philox rng(55, stream);
  Matrix pts(n, 2);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = 4.0 * rng.uniform();
  return PsdKernel::rbf(std::make_shared<PointCloud>(pts), sigma);
}

}  // namespace

TEST_SUITE("nystrom") {
  TEST_CASE("config resolution and validation") {
    RlsConfig c;
    CHECK(c.resolved_m0(1000) == 10 * static_cast<Index>(std::ceil(std::log(1000.0))));
    CHECK(c.resolved_m0(5) == 5);
    CHECK(c.resolved_m_cap(50) == 50);
    c.qbar_d = 0.5;
    CHECK_THROWS_AS(c.validate(10), InvalidInput);
    c.qbar_d = 2.0;
    c.m_cap = 20;
    CHECK_THROWS_AS(c.validate(10), InvalidInput);
  }

  TEST_CASE("single item gets the trivial dictionary") {
    Philox rng(1);
    const Dictionary d = build_dictionary(PsdKernel::dense(Matrix::Constant(1, 1, 2.0)), {}, rng);
    CHECK(d.indices == IndexSequence{0});
  }

  TEST_CASE("identity with enough oversampling keeps every index") {
    Philox rng(2);
    RlsConfig c;
    c.qbar_d = 2.0;
    const Dictionary d = build_dictionary(PsdKernel::dense(Matrix::Identity(12, 12)), c, rng);
    CHECK(d.indices == all_indices(12));
  }

  TEST_CASE("dictionary size follows the Bernoulli law") {
    const PsdKernel k = PsdKernel::dense(testing::fixed_psd(60, 3));
    Vector scores(60);
    for (Index i = 0; i < 60; ++i) scores[i] = 0.02 + 0.01 * static_cast<double>(i % 7);
    const double qbar = 3.0;
    double mean = 0.0, var = 0.0;
    for (Index i = 0; i < 60; ++i) {
      const double p = std::min(1.0, qbar * scores[i]);
      mean += p;
      var += p * (1.0 - p);
    }
    Philox rng(3);
    double total = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
      const Dictionary d = resample_dictionary(k, scores, qbar, 60, rng);
      CHECK(std::is_sorted(d.indices.begin(), d.indices.end()));
      CHECK(std::adjacent_find(d.indices.begin(), d.indices.end()) == d.indices.end());
      total += static_cast<double>(d.indices.size());
    }
    CHECK(std::abs(total / reps - mean) <= 4.0 * std::sqrt(var / reps));
  }

  TEST_CASE("m_cap truncates and doubling grows") {
    const PsdKernel k = PsdKernel::dense(Matrix::Identity(30, 30));
    Philox rng(4);
    const Dictionary d = resample_dictionary(k, Vector::Constant(30, 1.0), 1.0, 7, rng);
    CHECK(d.indices.size() == 7);
    const Dictionary twice = double_dictionary(k, d, rng);
    CHECK(twice.m_cap == 14);
    CHECK(twice.qbar_d == 2.0);
    CHECK(twice.indices.size() == 14);
  }

  TEST_CASE("uniform subsets are sorted and distinct") {
    Philox rng(5);
    const IndexSequence s = uniform_subset(20, 8, rng);
    CHECK(s.size() == 8);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK_THROWS_AS(uniform_subset(3, 4, rng), InvalidInput);
  }

  TEST_CASE("full dictionary reproduces the kernel") {
    const Matrix l = testing::fixed_psd(20, 6);
    const NystromSketch s = NystromSketch::build(PsdKernel::dense(l), all_indices(20));
    CHECK(testing::max_abs_diff(s.factor() * s.factor().transpose(), l) < 1e-7);
    const Vector eigs = sym_eigenvalues(l);
    double logdet = 0.0, st = 0.0;
    for (Index i = 0; i < eigs.size(); ++i) {
      logdet += std::log1p(eigs[i]);
      st += eigs[i] / (1.0 + eigs[i]);
    }
    CHECK(s.logdet_ihat() == doctest::Approx(logdet).epsilon(1e-9));
    CHECK(s.s_tilde() == doctest::Approx(st).epsilon(1e-9));
  }

  TEST_CASE("identity with one column") {
    const NystromSketch s = NystromSketch::build(PsdKernel::dense(Matrix::Identity(5, 5)), {2});
    REQUIRE(s.inner_eigs().size() == 1);
    CHECK(s.inner_eigs()[0] == doctest::Approx(1.0));
    CHECK(s.logdet_ihat() == doctest::Approx(std::log(2.0)));
    CHECK(s.s_tilde() == doctest::Approx(0.5));
    CHECK(s.captured_trace() == doctest::Approx(1.0));
  }

  TEST_CASE("sketch matches the dense Nyström formula") {
    const Matrix l = testing::fixed_psd(8, 7);
    const IndexSequence c{1, 4};
    const NystromSketch s = NystromSketch::build(PsdKernel::dense(l), c);
    const Matrix lhat = testing::nystrom_dense(l, c);
    CHECK(testing::max_abs_diff(s.factor() * s.factor().transpose(), lhat) < 1e-10);
    const Vector eigs = sym_eigenvalues(lhat);
    CHECK(s.inner_eigs()[0] == doctest::Approx(eigs[0]).epsilon(1e-10));
    CHECK(s.inner_eigs()[1] == doctest::Approx(eigs[1]).epsilon(1e-10));
  }

  TEST_CASE("zero columns are degenerate") {
    Matrix l = Matrix::Identity(3, 3);
    l(1, 1) = 0.0;
    CHECK_THROWS_AS(NystromSketch::build(PsdKernel::dense(l), {1}), DegenerateSketchError);
  }

  TEST_CASE("leverage profile of the identity") {
    const PsdKernel k = PsdKernel::dense(Matrix::Identity(4, 4));
    const NystromSketch s = NystromSketch::build(k, {0});
    const LeverageProfile p = compute_leverage_profile(k, s);
    CHECK(p.l[0] == doctest::Approx(0.5));
    for (Index i = 1; i < 4; ++i) CHECK(p.l[i] == doctest::Approx(1.0));
    CHECK(p.s_hat == doctest::Approx(3.5));
    CHECK(p.q == doctest::Approx(3.5 * 3.5));
    CHECK(p.cdf.back() == 1.0);
    CHECK(p.lookup(0.1) == 0);
    CHECK(p.lookup(0.5 / 3.5 + 1e-9) == 1);
    CHECK(p.lookup(1.0) == 3);
  }

  TEST_CASE("leverage profile matches dense inversion") {
    const Matrix l = testing::fixed_psd(10, 8);
    const IndexSequence c{0, 3, 7};
    const PsdKernel k = PsdKernel::dense(l);
    const NystromSketch s = NystromSketch::build(k, c);
    const Matrix lhat = testing::nystrom_dense(l, c);
    const Matrix inv = (lhat + Matrix::Identity(10, 10)).inverse();
    const Vector expected = (l - lhat).diagonal() + (lhat * inv).diagonal();
    const LeverageProfile p = compute_leverage_profile(k, s);
    const LeverageProfile spectral = leverage_profile_spectral(k, s);
    for (Index i = 0; i < 10; ++i) {
      CHECK(p.l[i] == doctest::Approx(expected[i]).epsilon(1e-10));
      CHECK(spectral.l[i] == doctest::Approx(expected[i]).epsilon(1e-10));
    }
    const LeverageProfile manual = compute_leverage_profile(k, s, QPolicy::manual(7.0));
    CHECK(manual.q == 7.0);
  }

  TEST_CASE("profile invariants on random sketches") {
    const PsdKernel k = planar(60, 0.8, 9);
    const RidgeLeverage exact = exact_rls(k.to_dense(), 1.0);
    Philox rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const NystromSketch s = NystromSketch::build(k, uniform_subset(60, 4 + 4 * trial, rng));
      const LeverageProfile p = compute_leverage_profile(k, s);
      CHECK(p.s_hat == doctest::Approx(p.l.sum()));
      CHECK(p.q >= p.s_hat);
      CHECK(p.q >= p.s_hat * p.s_hat - 1e-9);
      // L̂ ⪯ L: the sketch undercounts d_eff through s̃ and overcounts it through ŝ.
      CHECK(s.s_tilde() <= exact.d_eff + 1e-9);
      CHECK(exact.d_eff <= p.s_hat + 1e-9);
      for (Index i = 0; i < 60; ++i) {
        CHECK(p.l[i] > 0.0);
        CHECK(p.l[i] <= k.diag(i) + 1e-12);
      }
    }
  }

  TEST_CASE("scaling a sketch equals sketching the scaled kernel") {
    const PsdKernel k = planar(40, 0.9, 10);
    const IndexSequence c{2, 11, 19, 33};
    const NystromSketch scaled = NystromSketch::build(k, c).scaled(2.5);
    const NystromSketch direct = NystromSketch::build(k.scaled(2.5), c);
    CHECK(scaled.logdet_ihat() == doctest::Approx(direct.logdet_ihat()).epsilon(1e-10));
    CHECK(scaled.s_tilde() == doctest::Approx(direct.s_tilde()).epsilon(1e-10));
    CHECK(scaled.kernel_scale() == doctest::Approx(2.5));
  }

  TEST_CASE("precondition gap") {
    const Index n = 9;
    const PsdKernel id = PsdKernel::dense(Matrix::Identity(n, n));
    CHECK(precondition_gap(id, NystromSketch::build(id, all_indices(n))) == doctest::Approx(0.0).scale(1.0));
    CHECK(precondition_gap(id, NystromSketch::build(id, {0})) == doctest::Approx(n / 2.0 - 0.5));

    // Larger dictionaries shrink the gap (compare medians over random draws).
    const PsdKernel k = planar(80, 0.7, 11);
    Philox rng(11);
    double previous = HUGE_VAL;
    for (const Index m : {5, 15, 40, 80}) {
      std::vector<double> gaps;
      for (int r = 0; r < 9; ++r) gaps.push_back(precondition_gap(k, NystromSketch::build(k, uniform_subset(80, m, rng))));
      std::nth_element(gaps.begin(), gaps.begin() + 4, gaps.end());
      CHECK(gaps[4] <= previous + 1e-9);
      CHECK(gaps[4] >= -1e-8);
      previous = gaps[4];
    }
    CHECK(previous == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
    CHECK_THROWS_AS(precondition_gap(k, NystromSketch::build(k, {0}), 50), InvalidInput);
  }

  TEST_CASE("sketch files round trip bit for bit") {
    testing::TempDir dir;
    const PsdKernel k = planar(25, 1.0, 12);
    const NystromSketch s = NystromSketch::build(k, {0, 6, 13, 24});
    save_sketch(dir.file("s.bin"), s);
    const NystromSketch back = load_sketch(dir.file("s.bin"));
    CHECK(back.dictionary() == s.dictionary());
    CHECK(back.factor() == s.factor());
    CHECK(back.inner_eigs() == s.inner_eigs());
    CHECK(back.logdet_ihat() == s.logdet_ihat());
    CHECK(back.s_tilde() == s.s_tilde());
    CHECK_THROWS_AS(load_sketch(dir.write("junk.bin", "DPPK1234")), ParseError);
  }
}
