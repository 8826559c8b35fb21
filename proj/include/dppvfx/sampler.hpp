#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dppvfx/kernel.hpp"
#include "dppvfx/nystrom.hpp"
#include "dppvfx/rng.hpp"

namespace dppvfx {

/// Proposals whose log acceptance exceeds this are treated as a broken
/// invariant: the acceptance probability can never exceed 1.
inline constexpr double kLogAcceptTolerance = 1e-12;

/// One pass of the rejection loop.
struct ProposalDraw {
  std::uint64_t t = 0;
  IndexSequence sigma;
  double log_accept = 0.0;
  bool accepted = false;
};

struct DppSubset {
  std::vector<Index> members;  ///< sorted, unique
  std::uint64_t rejections = 0;
  std::uint64_t t_final = 0;
  std::uint64_t seed = 0;
};

struct SamplerStats {
  std::uint64_t samples = 0;
  std::uint64_t proposals = 0;
  std::uint64_t rejections = 0;
  std::uint64_t doublings = 0;
  std::uint64_t duplicate_coselections = 0;
  double max_log_accept = -std::numeric_limits<double>::infinity();
  double wall_time_precompute = 0.0;
  double wall_time_sample = 0.0;

  double acceptance_estimate() const noexcept {
    return proposals == 0 ? 0.0 : static_cast<double>(proposals - rejections) / static_cast<double>(proposals);
  }
};

struct SamplerLimits {
  std::uint64_t max_rejections = 1000;
  /// Double the dictionary (and restart) instead of failing when the budget runs out.
  bool auto_double = false;
  int max_doublings = 10;
  /// Evaluate det(I + L̃_σ) by eigendecomposition instead of the stabilized form.
  bool naive_accept = false;
  /// Test hook: negate the log acceptance after the bound check. Breaks exactness.
  bool flip_accept_sign = false;
  std::function<void(const ProposalDraw&)> on_proposal;
};

/// Process-wide record of every acceptance value computed by `VfxSampler`.
struct AcceptanceAudit {
  std::uint64_t proposals = 0;
  std::uint64_t violations = 0;
  double max_log_accept = -std::numeric_limits<double>::infinity();
};
AcceptanceAudit acceptance_audit();
void reset_acceptance_audit();
/// Records `log_accept`; returns false if it breaks the ≤ 1 bound.
bool audit_log_accept(double log_accept);

/// q·exp(ŝ/q); InvalidInput if not finite.
double proposal_mean(const LeverageProfile& profile);

/// t ~ Poisson(q·e^{ŝ/q}), then σ_1..σ_t i.i.d. from l_i/ŝ.
/// Draws: the Poisson variate, then one uniform per index.
IndexSequence draw_proposal(const LeverageProfile& profile, Philox& rng);

/// L̃_σ with entries (ŝ/q)·L[σ_a,σ_b]/√(l_{σ_a} l_{σ_b}).
Matrix intermediate_kernel(const PsdKernel& kernel, const LeverageProfile& profile, std::span<const Index> sigma);

/// s̃ − tŝ/q + log det(I + L̃_σ) − log det(I + L̂), with the determinant taken
/// as Σ −log w_a + log det(W_σ + L_σ), w_a = q·l_{σ_a}/ŝ.
double log_acceptance(const PsdKernel& kernel, const NystromSketch& sketch, const LeverageProfile& profile,
                      std::span<const Index> sigma);

/// Same quantity with det(I + L̃_σ) from an eigendecomposition (debug path).
double log_acceptance_naive(const PsdKernel& kernel, const NystromSketch& sketch, const LeverageProfile& profile,
                            std::span<const Index> sigma);

/// Exact L-ensemble sample over the rows of `m` (spectral algorithm):
/// keep eigenvector j with probability λ_j/(1+λ_j), then project-and-sample.
/// Draws: one uniform per eigenvalue (descending order), then one per selected item.
std::vector<Index> exact_dpp_sample(const Matrix& m, Philox& rng);

/// Rejection sampler over a fixed kernel and sketch. Owns no RNG; callers
/// pass one per call so independent streams can share a sampler's state.
class VfxSampler {
 public:
  VfxSampler(PsdKernel kernel, NystromSketch sketch, QPolicy policy = QPolicy::guaranteed());
  /// Adopts a precomputed profile (it must belong to this kernel and sketch).
  VfxSampler(PsdKernel kernel, NystromSketch sketch, LeverageProfile profile, QPolicy policy);

  /// Builds dictionary, sketch and profile. L = 0 yields a sampler that always returns ∅.
  static VfxSampler build(PsdKernel kernel, const RlsConfig& config, QPolicy policy, Philox& rng);

  /// One exact draw from DPP(L).
  DppSubset sample(Philox& rng, const SamplerLimits& limits = {});
  /// Further draws reuse every precomputed quantity; same law as `sample`.
  DppSubset resample(Philox& rng, const SamplerLimits& limits = {}) { return sample(rng, limits); }

  /// Redraws the dictionary with doubled oversampling and rebuilds the sketch.
  void double_sketch(Philox& rng);

  const PsdKernel& kernel() const noexcept { return kernel_; }
  const NystromSketch& sketch() const;
  const LeverageProfile& profile() const;
  const Dictionary& dictionary() const;
  bool is_zero() const noexcept { return !sketch_.has_value(); }
  const SamplerStats& stats() const noexcept { return stats_; }
  SamplerStats& stats() noexcept { return stats_; }

 private:
  explicit VfxSampler(PsdKernel kernel) : kernel_(std::move(kernel)) {}

  PsdKernel kernel_;
  QPolicy policy_;
  std::optional<Dictionary> dictionary_;
  std::optional<NystromSketch> sketch_;
  std::optional<LeverageProfile> profile_;
  SamplerStats stats_;
};

}  // namespace dppvfx
