#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dppvfx/kernel.hpp"
#include "dppvfx/parallel.hpp"
#include "dppvfx/rng.hpp"

namespace dppvfx {

/// Dictionary construction knobs.
struct RlsConfig {
  double qbar_b = 3.0;  ///< oversampling of the optional refinement level
  double qbar_d = 3.0;  ///< oversampling of the final dictionary
  Index m0 = 0;         ///< bootstrap size; 0 means 10·ceil(log n)
  Index m_cap = 0;      ///< ceiling on |C|; 0 means n
  std::uint64_t seed = 0;
  /// Insert one q̄_B-driven resampling level between the uniform bootstrap
  /// and the final draw, i.e. a two-level leverage-score cascade.
  bool refine_bootstrap = false;

  Index resolved_m0(Index n) const;
  Index resolved_m_cap(Index n) const;
  /// Throws InvalidInput unless q̄_B, q̄_D ≥ 1 and m0 ≤ m_cap ≤ n after resolution.
  void validate(Index n) const;
};

/// Result of dictionary sampling. `scores` are the approximate leverage
/// values the final Bernoulli draw used; they are kept so a doubled
/// dictionary can be redrawn without recomputing them.
struct Dictionary {
  IndexSequence indices;  ///< sorted, unique, non-empty
  Vector scores;
  double qbar_d = 0.0;
  Index m_cap = 0;
};

/// Nyström sketch L̂ = B̄B̄ᵀ with B̄ = L_{I,C} L_C^{+/2} and every quantity the
/// sampler precomputes from it. Immutable once built.
class NystromSketch {
 public:
  /// O(n·m² + m³). Throws DegenerateSketchError if L_C is numerically zero.
  static NystromSketch build(const PsdKernel& kernel, IndexSequence dictionary);

  /// Rebuild the cached quantities from an exported factor; `inner_eigs`
  /// are taken verbatim.
  static NystromSketch from_factor(IndexSequence dictionary, Matrix factor, Vector inner_eigs, double kernel_scale = 1.0);

  Index n() const noexcept { return factor_.rows(); }
  Index m() const noexcept { return static_cast<Index>(dictionary_.size()); }
  const IndexSequence& dictionary() const noexcept { return dictionary_; }
  /// B̄, n×m.
  const Matrix& factor() const noexcept { return factor_; }
  /// B̄V where A_mm = V diag(a) Vᵀ; rows give leverage values in O(m).
  const Matrix& rotated_factor() const noexcept { return rotated_; }
  /// Eigenvalues a_1 ≥ … ≥ a_m ≥ 0 of A_mm = B̄ᵀB̄.
  const Vector& inner_eigs() const noexcept { return inner_eigs_; }
  /// Eigenvectors V of A_mm, columns ordered like `inner_eigs()`.
  const Matrix& inner_vectors() const noexcept { return inner_vecs_; }
  /// Lower Cholesky factor of I + A_mm.
  const LowerFactor& chol_factor() const noexcept { return chol_; }
  /// log det(I + L̂) = Σ log(1 + a_i).
  double logdet_ihat() const noexcept { return logdet_ihat_; }
  /// tr(L̂(I + L̂)⁻¹) = Σ a_i / (1 + a_i).
  double s_tilde() const noexcept { return s_tilde_; }
  /// tr(L̂) = Σ a_i.
  double captured_trace() const noexcept { return captured_trace_; }
  /// Scale of the kernel this sketch approximates, relative to its storage.
  double kernel_scale() const noexcept { return kernel_scale_; }

  /// Sketch of alpha·L over the same dictionary (Nyström commutes with
  /// positive scaling): B̄ ← √α B̄, a ← α a. O(n·m + m³).
  NystromSketch scaled(double alpha) const;

 private:
  NystromSketch() = default;
  void finish();

  IndexSequence dictionary_;
  Matrix factor_;
  Matrix rotated_;
  Matrix inner_vecs_;
  Vector inner_eigs_;
  LowerFactor chol_;
  double logdet_ihat_ = 0.0;
  double s_tilde_ = 0.0;
  double captured_trace_ = 0.0;
  double kernel_scale_ = 1.0;
};

/// How the intermediate-size parameter q is chosen.
struct QPolicy {
  enum class Kind { guaranteed, manual };
  Kind kind = Kind::guaranteed;
  double value = 0.0;

  static QPolicy guaranteed() { return {}; }
  static QPolicy manual(double q) { return {Kind::manual, q}; }
};

/// Approximate DPP marginals l_i and the categorical proposal they define.
struct LeverageProfile {
  Vector l;
  double s_hat = 0.0;
  double q = 0.0;
  double floor = 0.0;
  std::vector<double> cdf;  ///< cdf[i] = Σ_{j≤i} l_j / ŝ; cdf.back() == 1

  Index size() const noexcept { return l.size(); }
  /// Smallest i with cdf[i] ≥ u.
  Index lookup(double u) const;
};

/// l_i = max(floor, (L_ii − ‖b̄_i‖²) + ‖T⁻¹ b̄_iᵀ‖²), T the Cholesky factor of I + A_mm.
LeverageProfile compute_leverage_profile(const PsdKernel& kernel, const NystromSketch& sketch,
                                         QPolicy policy = QPolicy::guaranteed());

/// Same values through the eigenbasis of A_mm: Σ_j (B̄V)_ij² / (1 + a_j). O(n·m);
/// used after rescaling a sketch.
LeverageProfile leverage_profile_spectral(const PsdKernel& kernel, const NystromSketch& sketch,
                                          QPolicy policy = QPolicy::guaranteed());

/// Positivity clamp applied to every l_i: 1e-12·max_i L_ii.
double leverage_floor(const PsdKernel& kernel);

/// Uniform bootstrap, leverage estimate, then Bernoulli(min(1, q̄_D·l⁰_i))
/// inclusion truncated uniformly to m_cap. RNG draws: bootstrap selection,
/// then one uniform per index in order 0..n−1, then the truncation shuffle.
Dictionary build_dictionary(const PsdKernel& kernel, const RlsConfig& config, Philox& rng);

/// Stage A alone: leverage estimates from a uniform bootstrap sketch (plus
/// the optional refinement level). Σ of the result estimates d_eff(1).
Vector bootstrap_leverage(const PsdKernel& kernel, const RlsConfig& config, Philox& rng);

/// `count` distinct indices of [n], uniformly, sorted. Draws: one below() per pick.
IndexSequence uniform_subset(Index n, Index count, Philox& rng);

/// Final stage only, from given scores.
Dictionary resample_dictionary(const PsdKernel& kernel, const Vector& scores, double qbar_d, Index m_cap, Philox& rng);

/// Doubling schedule: redraw with q̄_D and m_cap doubled (m_cap ≤ n), reusing
/// the previous scores.
Dictionary double_dictionary(const PsdKernel& kernel, const Dictionary& previous, Philox& rng);

/// Exact tr(L(I+L)⁻¹L − L̂(I+L)⁻¹L̂) by dense solves. Values ≤ 1 certify the
/// e⁻² acceptance bound. Refused above `max_n`.
double precondition_gap(const PsdKernel& kernel, const NystromSketch& sketch, Index max_n = 5000);

/// Sketch container: "DPPS", u32 n, u32 m, m × u32 indices, n·m f64 B̄ row-major, m f64 eigenvalues.
void save_sketch(const std::filesystem::path& path, const NystromSketch& sketch);
NystromSketch load_sketch(const std::filesystem::path& path);

}  // namespace dppvfx
