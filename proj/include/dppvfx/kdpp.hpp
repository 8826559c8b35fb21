#pragma once

#include <cstdint>
#include <optional>

#include "dppvfx/sampler.hpp"

namespace dppvfx {

/// Result of solving s_α = (2k² + 6k + 1)/(2k + 6) for α.
struct KdppCalibration {
  Index k = 0;
  double alpha_star = 0.0;
  double s_alpha_achieved = 0.0;
  double target = 0.0;
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  int iterations = 0;
};

/// Size target whose attainment places k_α in [k, k + 1/(k+2)), i.e. makes k
/// the mode of |S_α|.
double kdpp_size_target(Index k);

/// s_α = α·(tr L − Σa_i) + Σ α a_i / (α a_i + 1). O(m); strictly increasing in α.
double s_alpha(double kernel_trace, const NystromSketch& sketch, double alpha);

/// Bisection for α* on the sketch-based size proxy. The bracket starts at
/// (1/2, 1) and is widened by factors of two until it encloses the target.
/// Converges to |s_α − target| ≤ 1e-9·target within 200 iterations.
KdppCalibration find_alpha_star(double kernel_trace, const NystromSketch& sketch, Index k);

struct KdppLimits {
  /// 0 means 200·ceil(√k).
  std::uint64_t max_size_rejections = 0;
  SamplerLimits inner;
};

/// Fixed-size sampler: DPP(αL) draws are kept only when |S| = k. The
/// conditional law does not depend on α; α* only makes acceptance likely.
class KdppSampler {
 public:
  /// Calibrates α* on `base`'s sketch and rescales its cached state.
  KdppSampler(const VfxSampler& base, Index k, QPolicy policy = QPolicy::guaranteed());
  /// Uses the given α instead of α* (calibration is still reported).
  KdppSampler(const VfxSampler& base, Index k, double alpha, QPolicy policy = QPolicy::guaranteed());

  static KdppSampler build(PsdKernel kernel, const RlsConfig& config, Index k, Philox& rng,
                           QPolicy policy = QPolicy::guaranteed());

  DppSubset sample(Philox& rng, const KdppLimits& limits = {});

  const KdppCalibration& calibration() const noexcept { return calibration_; }
  double alpha() const noexcept { return alpha_; }
  Index k() const noexcept { return k_; }
  VfxSampler& scaled_sampler() noexcept { return scaled_; }
  std::uint64_t size_rejections() const noexcept { return size_rejections_; }

 private:
  KdppSampler(const VfxSampler& base, Index k, std::optional<double> alpha, QPolicy policy);

  Index k_;
  KdppCalibration calibration_;
  double alpha_;
  VfxSampler scaled_;
  std::uint64_t size_rejections_ = 0;
};

}  // namespace dppvfx
