#include "dppvfx/kdpp.hpp"

#include <cmath>

#include "dppvfx/errors.hpp"

namespace dppvfx {

double kdpp_size_target(Index k) {
  const double kk = static_cast<double>(k);
  return (2.0 * kk * kk + 6.0 * kk + 1.0) / (2.0 * kk + 6.0);
}

namespace {

double residual_trace(double kernel_trace, const NystromSketch& sketch) {
  return std::max(0.0, kernel_trace - sketch.captured_trace());
}

}  // namespace

double s_alpha(double kernel_trace, const NystromSketch& sketch, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be positive, got " + std::to_string(alpha));
  const Eigen::ArrayXd scaled = alpha * sketch.inner_eigs().array();
  return alpha * residual_trace(kernel_trace, sketch) + (scaled / (scaled + 1.0)).sum();
}

KdppCalibration find_alpha_star(double kernel_trace, const NystromSketch& sketch, Index k) {
  if (k < 1) throw InvalidInput("k must be at least 1");
  if (k > sketch.m() || k > sketch.n()) {
    throw InvalidInput("k = " + std::to_string(k) + " exceeds the dictionary size m = " + std::to_string(sketch.m()) +
                       "; use a larger dictionary");
  }
  KdppCalibration cal;
  cal.k = k;
  cal.target = kdpp_size_target(k);

  const double residual = residual_trace(kernel_trace, sketch);
  const auto positive = (sketch.inner_eigs().array() > 0.0).count();
  if (residual <= 1e-12 * std::max(kernel_trace, 1e-300) && static_cast<double>(positive) <= cal.target) {
    throw CalibrationError("size target " + std::to_string(cal.target) + " is unreachable: the sketch has rank " +
                           std::to_string(positive) + " and captures the whole trace; double the dictionary size m");
  }

  auto eval = [&](double a) { return s_alpha(kernel_trace, sketch, a); };
  double lo = 0.5;
  double hi = 1.0;
  for (int widen = 0; eval(hi) < cal.target; ++widen) {
    if (widen > 2000) throw CalibrationError("could not bracket the size target from above");
    lo = hi;
    hi *= 2.0;
  }
  for (int widen = 0; eval(lo) > cal.target; ++widen) {
    if (widen > 2000) throw CalibrationError("could not bracket the size target from below");
    hi = lo;
    lo *= 0.5;
  }

  const double tol = 1e-9 * cal.target;
  for (cal.iterations = 1; cal.iterations <= 200; ++cal.iterations) {
    const double mid = 0.5 * (lo + hi);
    const double value = eval(mid);
    if (std::fabs(value - cal.target) <= tol) {
      cal.alpha_star = mid;
      cal.s_alpha_achieved = value;
      cal.alpha_lo = lo;
      cal.alpha_hi = hi;
      return cal;
    }
    (value < cal.target ? lo : hi) = mid;
  }
  throw NumericError("alpha bisection did not converge", 200);
}

// ---------------------------------------------------------------------------

KdppSampler::KdppSampler(const VfxSampler& base, Index k, QPolicy policy)
    : KdppSampler(base, k, std::nullopt, policy) {}

KdppSampler::KdppSampler(const VfxSampler& base, Index k, double alpha, QPolicy policy)
    : KdppSampler(base, k, std::optional<double>(alpha), policy) {}

namespace {

VfxSampler rescale(const VfxSampler& base, double alpha, QPolicy policy) {
  PsdKernel kernel = base.kernel().scaled(alpha);
  NystromSketch sketch = base.sketch().scaled(alpha);
  LeverageProfile profile = leverage_profile_spectral(kernel, sketch, policy);
  return VfxSampler(std::move(kernel), std::move(sketch), std::move(profile), policy);
}

KdppCalibration calibrate(const VfxSampler& base, Index k) {
  if (base.is_zero()) throw InvalidInput("a zero kernel has no subsets of size k ≥ 1");
  return find_alpha_star(base.kernel().trace(), base.sketch(), k);
}

}  // namespace

KdppSampler::KdppSampler(const VfxSampler& base, Index k, std::optional<double> alpha, QPolicy policy)
    : k_(k),
      calibration_(calibrate(base, k)),
      alpha_(alpha.value_or(calibration_.alpha_star)),
      scaled_(rescale(base, alpha_, policy)) {}

KdppSampler KdppSampler::build(PsdKernel kernel, const RlsConfig& config, Index k, Philox& rng, QPolicy policy) {
  const VfxSampler base = VfxSampler::build(std::move(kernel), config, policy, rng);
  return KdppSampler(base, k, policy);
}

DppSubset KdppSampler::sample(Philox& rng, const KdppLimits& limits) {
  const std::uint64_t budget =
      limits.max_size_rejections > 0
          ? limits.max_size_rejections
          : 200 * static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(k_))));
  std::vector<std::uint64_t> histogram;
  std::uint64_t rejections = 0;
  for (std::uint64_t attempt = 0; attempt < budget; ++attempt) {
    DppSubset s = scaled_.sample(rng, limits.inner);
    rejections += s.rejections;
    const std::size_t size = s.members.size();
    if (static_cast<Index>(size) == k_) {
      s.rejections = rejections;
      return s;
    }
    ++size_rejections_;
    if (histogram.size() <= size) histogram.resize(size + 1, 0);
    ++histogram[size];
  }
  throw SizeBudgetError("no sample of size " + std::to_string(k_) + " in " + std::to_string(budget) +
                            " draws; α* = " + std::to_string(alpha_) + " is likely miscalibrated",
                        std::move(histogram));
}

}  // namespace dppvfx
