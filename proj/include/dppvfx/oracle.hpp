#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dppvfx/kernel.hpp"
#include "dppvfx/rng.hpp"

namespace dppvfx {

/// Largest ground set the enumeration oracle accepts.
inline constexpr Index kMaxEnumerationSize = 12;

/// Pr(S) = det(L_S)/det(I+L) for every S ⊆ [n], indexed by bitmask.
struct ExactDistribution {
  Index n = 0;
  std::vector<double> probs;
  double normalizer = 1.0;  ///< det(I + L)
};

/// Brute-force DPP law. Refused for n > 12.
ExactDistribution enumerate_dpp(const Matrix& kernel);

/// Law of a k-DPP: size-k masks with probability ∝ det(L_S).
struct KdppDistribution {
  Index k = 0;
  std::vector<std::uint32_t> masks;
  std::vector<double> probs;
};
KdppDistribution enumerate_kdpp(const Matrix& kernel, Index k);

struct RidgeLeverage {
  Vector tau;
  double d_eff = 0.0;
};

/// τ_i(λ) = [L(λI + L)⁻¹]_ii by dense solve; d_eff(λ) = Σ τ_i.
RidgeLeverage exact_rls(const Matrix& kernel, double lambda);

/// Which branch of Darroch's mode theorem the mean falls in.
enum class ModeCase {
  floor_of_mean,  ///< k ≤ μ < k + 1/(k+2): mode is k
  either,         ///< mode is k or k + 1
  ceil_of_mean,   ///< k + 1 − 1/(n−k+1) < μ: mode is k + 1
};

/// Mode of a Poisson-binomial over `trials` Bernoullis with mean `mean`.
struct ModeClass {
  ModeCase which;
  Index floor_mean;  ///< k = ⌊μ⌋
};
ModeClass classify_mode(double mean, Index trials);

/// Size distribution of DPP(αL): Poisson binomial over Bernoulli(αλ_i/(1+αλ_i)).
struct SizePmf {
  std::vector<double> pmf;  ///< pmf[j] = Pr(|S| = j), j = 0..n
  double mean = 0.0;
  double variance = 0.0;
  Index mode = 0;  ///< argmax of the pmf
  ModeClass mode_class{ModeCase::floor_of_mean, 0};
};
SizePmf size_pmf(const Vector& eigenvalues, double alpha = 1.0);

std::uint32_t subset_mask(std::span<const Index> members);

/// Inverse-cdf draw of a bitmask from `dist` (used to calibrate the tests).
std::uint32_t sample_exact(const ExactDistribution& dist, Philox& rng);

}  // namespace dppvfx
