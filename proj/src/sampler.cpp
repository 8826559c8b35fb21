#include "dppvfx/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"

namespace dppvfx {

namespace {

std::mutex audit_mutex;
AcceptanceAudit audit_state;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_floor(const LeverageProfile& profile, std::span<const Index> sigma) {
  for (const Index i : sigma) {
    if (!(profile.l[i] > 0.0) || profile.l[i] < profile.floor) {
      throw NumericError("leverage value below the positivity floor at index " + std::to_string(i));
    }
  }
}

/// L[σ, σ] with each distinct index evaluated once; repeats are copied.
Matrix sequence_block(const PsdKernel& kernel, std::span<const Index> sigma) {
  IndexSequence unique(sigma.begin(), sigma.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() == sigma.size() && std::is_sorted(sigma.begin(), sigma.end())) return kernel.block(sigma, sigma);
  const Matrix core = kernel.block(unique, unique);
  std::vector<Index> slot(sigma.size());
  for (std::size_t a = 0; a < sigma.size(); ++a) {
    slot[a] = std::lower_bound(unique.begin(), unique.end(), sigma[a]) - unique.begin();
  }
  const auto t = static_cast<Index>(sigma.size());
  Matrix out(t, t);
  for (Index a = 0; a < t; ++a) {
    for (Index b = 0; b < t; ++b) out(a, b) = core(slot[a], slot[b]);
  }
  return out;
}

}  // namespace

AcceptanceAudit acceptance_audit() {
  std::lock_guard lock(audit_mutex);
  return audit_state;
}

void reset_acceptance_audit() {
  std::lock_guard lock(audit_mutex);
  audit_state = {};
}

bool audit_log_accept(double log_accept) {
  std::lock_guard lock(audit_mutex);
  ++audit_state.proposals;
  audit_state.max_log_accept = std::max(audit_state.max_log_accept, log_accept);
  const bool ok = log_accept <= kLogAcceptTolerance;
  if (!ok) ++audit_state.violations;
  return ok;
}

double proposal_mean(const LeverageProfile& profile) {
  const double mean = profile.q * std::exp(profile.s_hat / profile.q);
  if (!std::isfinite(mean)) {
    throw InvalidInput("Poisson mean q·exp(ŝ/q) is not finite (ŝ = " + std::to_string(profile.s_hat) +
                       ", q = " + std::to_string(profile.q) + ")");
  }
  return mean;
}

IndexSequence draw_proposal(const LeverageProfile& profile, Philox& rng) {
  const std::uint64_t t = poisson(rng, proposal_mean(profile));
  IndexSequence sigma(t);
  for (auto& s : sigma) s = profile.lookup(rng.uniform());
  return sigma;
}

Matrix intermediate_kernel(const PsdKernel& kernel, const LeverageProfile& profile, std::span<const Index> sigma) {
  check_indices(sigma, kernel.size(), "proposal index");
  require_floor(profile, sigma);
  Matrix m = sequence_block(kernel, sigma);
  const double ratio = profile.s_hat / profile.q;
  for (Index a = 0; a < m.rows(); ++a) {
    for (Index b = 0; b < m.cols(); ++b) m(a, b) *= ratio / std::sqrt(profile.l[sigma[a]] * profile.l[sigma[b]]);
  }
  return m;
}

double log_acceptance(const PsdKernel& kernel, const NystromSketch& sketch, const LeverageProfile& profile,
                      std::span<const Index> sigma) {
  check_indices(sigma, kernel.size(), "proposal index");
  require_floor(profile, sigma);
  const auto t = static_cast<Index>(sigma.size());
  Matrix shifted = sequence_block(kernel, sigma);
  double neg_log_w = 0.0;
  for (Index a = 0; a < t; ++a) {
    const double w = profile.q * profile.l[sigma[a]] / profile.s_hat;
    shifted(a, a) += w;
    neg_log_w -= std::log(w);
  }
  double logdet = 0.0;
  if (t > 0) {
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) {
      std::cerr << "W_sigma + L_sigma factorization failed for t = " << t << ":\n" << shifted << '\n';
      throw NumericError("Cholesky of W_σ + L_σ failed");
    }
    logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  return sketch.s_tilde() - static_cast<double>(t) * profile.s_hat / profile.q + (neg_log_w + logdet) -
         sketch.logdet_ihat();
}

double log_acceptance_naive(const PsdKernel& kernel, const NystromSketch& sketch, const LeverageProfile& profile,
                            std::span<const Index> sigma) {
  const Matrix tilde = intermediate_kernel(kernel, profile, sigma);
  double logdet = 0.0;
  if (tilde.rows() > 0) logdet = sym_eigenvalues(tilde).array().max(0.0).log1p().sum();
  return sketch.s_tilde() - static_cast<double>(sigma.size()) * profile.s_hat / profile.q + logdet -
         sketch.logdet_ihat();
}

std::vector<Index> exact_dpp_sample(const Matrix& m, Philox& rng) {
  std::vector<Index> out;
  if (m.rows() == 0) return out;
  const SymEig eig = sym_eig(m);
  std::vector<Index> keep;
  for (Index j = 0; j < eig.values.size(); ++j) {
    const double lambda = std::max(eig.values[j], 0.0);
    if (rng.uniform() < lambda / (1.0 + lambda)) keep.push_back(j);
  }
  const Index rows = m.rows();
  Eigen::MatrixXd basis(rows, static_cast<Index>(keep.size()));
  for (Index c = 0; c < basis.cols(); ++c) basis.col(c) = eig.vectors.col(keep[c]);

  Eigen::VectorXd weight(rows);
  while (basis.cols() > 0) {
    const Index k = basis.cols();
    weight = basis.rowwise().squaredNorm();
    const double total = weight.sum();
    double target = rng.uniform() * total;
    Index pick = rows - 1;
    for (Index i = 0; i < rows; ++i) {
      target -= weight[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    out.push_back(pick);

    Index pivot = 0;
    basis.row(pick).cwiseAbs().maxCoeff(&pivot);
    const Eigen::VectorXd pivot_col = basis.col(pivot) / basis(pick, pivot);
    for (Index c = 0; c < k; ++c) {
      if (c != pivot) basis.col(c) -= pivot_col * basis(pick, c);
    }
    if (pivot != k - 1) basis.col(pivot) = basis.col(k - 1);
    basis.conservativeResize(Eigen::NoChange, k - 1);

    // Modified Gram-Schmidt, applied twice for stability.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index c = 0; c < basis.cols(); ++c) {
        for (Index p = 0; p < c; ++p) basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
        const double norm = basis.col(c).norm();
        if (norm > 0.0) basis.col(c) /= norm;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

VfxSampler::VfxSampler(PsdKernel kernel, NystromSketch sketch, QPolicy policy)
    : kernel_(std::move(kernel)), policy_(policy) {
  const auto start = std::chrono::steady_clock::now();
  profile_ = compute_leverage_profile(kernel_, sketch, policy_);
  dictionary_ = Dictionary{sketch.dictionary(), profile_->l, 3.0, sketch.m()};
  sketch_ = std::move(sketch);
  stats_.wall_time_precompute = seconds_since(start);
}

VfxSampler::VfxSampler(PsdKernel kernel, NystromSketch sketch, LeverageProfile profile, QPolicy policy)
    : kernel_(std::move(kernel)), policy_(policy) {
  if (profile.size() != kernel_.size() || sketch.n() != kernel_.size()) {
    throw InvalidInput("profile, sketch and kernel sizes disagree");
  }
  dictionary_ = Dictionary{sketch.dictionary(), profile.l, 3.0, sketch.m()};
  profile_ = std::move(profile);
  sketch_ = std::move(sketch);
}

VfxSampler VfxSampler::build(PsdKernel kernel, const RlsConfig& config, QPolicy policy, Philox& rng) {
  const auto start = std::chrono::steady_clock::now();
  if (kernel.trace() <= 0.0 && kernel.diagonal().maxCoeff() <= 0.0) {
    VfxSampler zero(std::move(kernel));
    zero.policy_ = policy;
    return zero;
  }
  Dictionary dict = build_dictionary(kernel, config, rng);
  NystromSketch sketch = NystromSketch::build(kernel, dict.indices);
  VfxSampler out(std::move(kernel), std::move(sketch), policy);
  out.dictionary_ = std::move(dict);
  out.stats_.wall_time_precompute = seconds_since(start);
  return out;
}

const NystromSketch& VfxSampler::sketch() const {
  if (!sketch_) throw InvalidInput("zero kernel has no sketch");
  return *sketch_;
}

const LeverageProfile& VfxSampler::profile() const {
  if (!profile_) throw InvalidInput("zero kernel has no leverage profile");
  return *profile_;
}

const Dictionary& VfxSampler::dictionary() const {
  if (!dictionary_) throw InvalidInput("zero kernel has no dictionary");
  return *dictionary_;
}

void VfxSampler::double_sketch(Philox& rng) {
  const auto start = std::chrono::steady_clock::now();
  Dictionary next = double_dictionary(kernel_, dictionary(), rng);
  // The redraw is random; make sure the doubled dictionary actually grows.
  for (const Index c : sketch_->dictionary()) {
    if (!std::binary_search(next.indices.begin(), next.indices.end(), c)) {
      next.indices.insert(std::upper_bound(next.indices.begin(), next.indices.end(), c), c);
    }
  }
  NystromSketch sketch = NystromSketch::build(kernel_, next.indices);
  profile_ = compute_leverage_profile(kernel_, sketch, policy_);
  sketch_ = std::move(sketch);
  dictionary_ = std::move(next);
  ++stats_.doublings;
  stats_.wall_time_precompute += seconds_since(start);
}

DppSubset VfxSampler::sample(Philox& rng, const SamplerLimits& limits) {
  const auto start = std::chrono::steady_clock::now();
  DppSubset result;
  result.seed = rng.seed();
  ++stats_.samples;
  if (!sketch_) {
    stats_.wall_time_sample += seconds_since(start);
    return result;
  }

  std::uint64_t budget_used = 0;
  IndexSequence sigma;
  for (;;) {
    sigma = draw_proposal(*profile_, rng);
    double log_accept = limits.naive_accept ? log_acceptance_naive(kernel_, *sketch_, *profile_, sigma)
                                            : log_acceptance(kernel_, *sketch_, *profile_, sigma);
    ++stats_.proposals;
    stats_.max_log_accept = std::max(stats_.max_log_accept, log_accept);
    if (!audit_log_accept(log_accept)) {
      throw NumericError("acceptance probability exceeds 1: log value " + std::to_string(log_accept));
    }
    if (limits.flip_accept_sign) log_accept = -log_accept;
    const bool accepted = std::log(rng.uniform()) < log_accept;
    if (limits.on_proposal) limits.on_proposal(ProposalDraw{sigma.size(), sigma, log_accept, accepted});
    if (accepted) break;

    ++stats_.rejections;
    ++result.rejections;
    if (++budget_used < limits.max_rejections) continue;
    if (limits.auto_double && static_cast<int>(stats_.doublings) < limits.max_doublings && sketch_->m() < kernel_.size()) {
      double_sketch(rng);
      budget_used = 0;
      continue;
    }
    throw RejectionBudgetError("rejection budget of " + std::to_string(limits.max_rejections) +
                                   " exhausted (ŝ = " + std::to_string(profile_->s_hat) +
                                   ", s̃ = " + std::to_string(sketch_->s_tilde()) +
                                   "); the sketch is likely too coarse, try a larger dictionary",
                               profile_->s_hat, sketch_->s_tilde(), result.rejections);
  }

  const std::vector<Index> local = exact_dpp_sample(intermediate_kernel(kernel_, *profile_, sigma), rng);
  result.members.reserve(local.size());
  for (const Index a : local) result.members.push_back(sigma[a]);
  std::sort(result.members.begin(), result.members.end());
  const auto unique_end = std::unique(result.members.begin(), result.members.end());
  if (unique_end != result.members.end()) {
    ++stats_.duplicate_coselections;
    std::cerr << "warning: duplicate proposal index co-selected; intermediate kernel is numerically rank deficient\n";
    result.members.erase(unique_end, result.members.end());
  }
  result.t_final = sigma.size();
  stats_.wall_time_sample += seconds_since(start);
  return result;
}

}  // namespace dppvfx
