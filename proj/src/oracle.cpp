#include "dppvfx/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"
#include "dppvfx/parallel.hpp"

namespace dppvfx {

namespace {

void require_enumerable(const Matrix& kernel) {
  if (kernel.rows() != kernel.cols()) throw InvalidInput("kernel must be square");
  if (kernel.rows() > kMaxEnumerationSize) {
    throw InvalidInput("enumeration oracle refuses n = " + std::to_string(kernel.rows()) + " > " +
                       std::to_string(kMaxEnumerationSize));
  }
}

}  // namespace

ExactDistribution enumerate_dpp(const Matrix& kernel) {
  require_enumerable(kernel);
  const Index n = kernel.rows();
  ExactDistribution out;
  out.n = n;
  out.probs = omp::subset_determinants(kernel);
  Matrix shifted = kernel;
  shifted.diagonal().array() += 1.0;
  out.normalizer = std::exp(log_det_spd(shifted));
  for (double& p : out.probs) p /= out.normalizer;
  return out;
}

KdppDistribution enumerate_kdpp(const Matrix& kernel, Index k) {
  require_enumerable(kernel);
  const Index n = kernel.rows();
  if (k < 1 || k > n) throw InvalidInput("k must lie in [1, n]");
  const std::vector<double> dets = omp::subset_determinants(kernel);
  KdppDistribution out;
  out.k = k;
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < dets.size(); ++mask) {
    if (std::popcount(mask) != k) continue;
    out.masks.push_back(mask);
    out.probs.push_back(dets[mask]);
    total += dets[mask];
  }
  if (!(total > 0.0)) throw NumericError("every size-k principal minor vanishes; the k-DPP is undefined");
  for (double& p : out.probs) p /= total;
  return out;
}

RidgeLeverage exact_rls(const Matrix& kernel, double lambda) {
  if (kernel.rows() != kernel.cols()) throw InvalidInput("kernel must be square");
  if (!(lambda > 0.0)) throw InvalidInput("ridge parameter must be positive");
  Matrix shifted = kernel;
  shifted.diagonal().array() += lambda;
  // L(λI + L)⁻¹ = I − λ(λI + L)⁻¹, and the diagonal of the inverse is all we need.
  const Matrix inv = solve_spd(shifted, Matrix::Identity(kernel.rows(), kernel.cols()));
  RidgeLeverage out;
  out.tau = (1.0 - lambda * inv.diagonal().array()).max(0.0).min(1.0);
  out.d_eff = out.tau.sum();
  return out;
}

ModeClass classify_mode(double mean, Index trials) {
  const auto k = static_cast<Index>(std::floor(mean));
  const double kd = static_cast<double>(k);
  if (mean < kd + 1.0 / (kd + 2.0)) return {ModeCase::floor_of_mean, k};
  if (mean > kd + 1.0 - 1.0 / (static_cast<double>(trials - k) + 1.0)) return {ModeCase::ceil_of_mean, k};
  return {ModeCase::either, k};
}

SizePmf size_pmf(const Vector& eigenvalues, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  const Index n = eigenvalues.size();
  SizePmf out;
  out.pmf.assign(static_cast<std::size_t>(n) + 1, 0.0);
  out.pmf[0] = 1.0;
  for (Index i = 0; i < n; ++i) {
    const double x = alpha * std::max(eigenvalues[i], 0.0);
    const double p = x / (1.0 + x);
    out.mean += p;
    out.variance += p * (1.0 - p);
    for (Index j = i + 1; j >= 1; --j) out.pmf[j] = out.pmf[j] * (1.0 - p) + out.pmf[j - 1] * p;
    out.pmf[0] *= 1.0 - p;
  }
  out.mode = std::max_element(out.pmf.begin(), out.pmf.end()) - out.pmf.begin();
  out.mode_class = classify_mode(out.mean, n);
  return out;
}

std::uint32_t subset_mask(std::span<const Index> members) {
  std::uint32_t mask = 0;
  for (const Index i : members) {
    if (i < 0 || i >= 32) throw BoundsError("subset index " + std::to_string(i) + " does not fit a 32-bit mask");
    mask |= std::uint32_t{1} << i;
  }
  return mask;
}

std::uint32_t sample_exact(const ExactDistribution& dist, Philox& rng) {
  double u = rng.uniform();
  for (std::uint32_t mask = 0; mask < dist.probs.size(); ++mask) {
    u -= dist.probs[mask];
    if (u <= 0.0) return mask;
  }
  return static_cast<std::uint32_t>(dist.probs.size() - 1);
}

}  // namespace dppvfx
