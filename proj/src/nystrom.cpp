#include "dppvfx/nystrom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dppvfx/errors.hpp"
#include "dppvfx/linalg.hpp"

namespace dppvfx {

Index RlsConfig::resolved_m_cap(Index n) const { return m_cap > 0 ? std::min(m_cap, n) : n; }

Index RlsConfig::resolved_m0(Index n) const {
  Index m = m0 > 0 ? m0 : 10 * static_cast<Index>(std::ceil(std::log(static_cast<double>(n))));
  return std::clamp<Index>(m, 1, resolved_m_cap(n));
}

void RlsConfig::validate(Index n) const {
  if (n < 1) throw InvalidInput("dictionary construction needs n ≥ 1");
  if (!(qbar_b >= 1.0) || !(qbar_d >= 1.0)) throw InvalidInput("oversampling factors q̄_B, q̄_D must be ≥ 1");
  if (m0 < 0 || m_cap < 0) throw InvalidInput("m0 and m_cap must be nonnegative");
  if (m_cap > n) throw InvalidInput("m_cap = " + std::to_string(m_cap) + " exceeds n = " + std::to_string(n));
  if (m0 > 0 && m0 > resolved_m_cap(n)) throw InvalidInput("m0 must not exceed m_cap");
}

// ---------------------------------------------------------------------------

NystromSketch NystromSketch::build(const PsdKernel& kernel, IndexSequence dictionary) {
  if (dictionary.empty()) throw InvalidInput("sketch dictionary must be non-empty");
  check_indices(dictionary, kernel.size(), "dictionary index");
  std::sort(dictionary.begin(), dictionary.end());
  if (std::adjacent_find(dictionary.begin(), dictionary.end()) != dictionary.end()) {
    throw InvalidInput("sketch dictionary must not contain duplicates");
  }

  const Matrix cross = kernel.columns(dictionary);
  const Index m = static_cast<Index>(dictionary.size());
  Matrix inner(m, m);
  for (Index a = 0; a < m; ++a) inner.row(a) = cross.row(dictionary[a]);
  inner = (0.5 * (inner + inner.transpose())).eval();

  const PinvSqrt root = psd_pinv_sqrt(inner);
  if (root.rank_zero) throw DegenerateSketchError("L_C is numerically rank-zero; choose a different dictionary");

  NystromSketch s;
  s.dictionary_ = std::move(dictionary);
  s.factor_ = omp::multiply(cross, root.value);
  s.kernel_scale_ = kernel.scale();
  s.finish();
  return s;
}

NystromSketch NystromSketch::from_factor(IndexSequence dictionary, Matrix factor, Vector inner_eigs, double kernel_scale) {
  if (factor.cols() != static_cast<Index>(dictionary.size()) || inner_eigs.size() != factor.cols()) {
    throw InvalidInput("sketch parts have inconsistent sizes");
  }
  check_indices(dictionary, factor.rows(), "dictionary index");
  NystromSketch s;
  s.dictionary_ = std::move(dictionary);
  s.factor_ = std::move(factor);
  s.kernel_scale_ = kernel_scale;
  s.finish();
  s.inner_eigs_ = std::move(inner_eigs);
  s.captured_trace_ = s.inner_eigs_.sum();
  s.logdet_ihat_ = s.inner_eigs_.array().log1p().sum();
  s.s_tilde_ = (s.inner_eigs_.array() / (1.0 + s.inner_eigs_.array())).sum();
  return s;
}

void NystromSketch::finish() {
  const Index m = factor_.cols();
  Matrix gram = factor_.transpose() * factor_;
  gram = (0.5 * (gram + gram.transpose())).eval();

  SymEig eig = sym_eig(gram);
  const double top = std::max(eig.values.size() ? eig.values[0] : 0.0, 0.0);
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values[i] < 0.0) {
      if (eig.values[i] < -1e-8 * std::max(top, 1e-300)) {
        throw NumericError("A_mm has a negative eigenvalue " + std::to_string(eig.values[i]));
      }
      eig.values[i] = 0.0;
    }
  }
  inner_eigs_ = eig.values;
  inner_vecs_ = std::move(eig.vectors);
  rotated_ = omp::multiply(factor_, inner_vecs_);

  Matrix shifted = gram + Matrix::Identity(m, m);
  Eigen::LLT<LowerFactor> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky of I + A_mm failed");
  chol_ = llt.matrixL();

  captured_trace_ = inner_eigs_.sum();
  logdet_ihat_ = inner_eigs_.array().log1p().sum();
  s_tilde_ = (inner_eigs_.array() / (1.0 + inner_eigs_.array())).sum();
}

NystromSketch NystromSketch::scaled(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("sketch scale must be positive");
  NystromSketch s;
  const double root = std::sqrt(alpha);
  s.dictionary_ = dictionary_;
  s.factor_ = root * factor_;
  s.rotated_ = root * rotated_;
  s.inner_vecs_ = inner_vecs_;
  s.inner_eigs_ = alpha * inner_eigs_;
  s.kernel_scale_ = alpha * kernel_scale_;

  const Index m = inner_eigs_.size();
  Matrix shifted = inner_vecs_ * s.inner_eigs_.asDiagonal() * inner_vecs_.transpose();
  shifted = (0.5 * (shifted + shifted.transpose())).eval();
  shifted += Matrix::Identity(m, m);
  Eigen::LLT<LowerFactor> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky of I + αA_mm failed");
  s.chol_ = llt.matrixL();

  s.captured_trace_ = s.inner_eigs_.sum();
  s.logdet_ihat_ = s.inner_eigs_.array().log1p().sum();
  s.s_tilde_ = (s.inner_eigs_.array() / (1.0 + s.inner_eigs_.array())).sum();
  return s;
}

// ---------------------------------------------------------------------------

Index LeverageProfile::lookup(double u) const {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return static_cast<Index>(cdf.size()) - 1;
  return static_cast<Index>(it - cdf.begin());
}

double leverage_floor(const PsdKernel& kernel) {
  const Vector d = kernel.diagonal();
  return 1e-12 * std::max(d.maxCoeff(), 0.0);
}

namespace {

void require_matching(const PsdKernel& kernel, const NystromSketch& sketch) {
  if (kernel.size() != sketch.n()) throw InvalidInput("sketch was built for a kernel of a different size");
  const double rel = std::fabs(kernel.scale() - sketch.kernel_scale()) / std::max(kernel.scale(), sketch.kernel_scale());
  if (rel > 1e-12) throw InvalidInput("sketch and kernel are scaled differently");
}

LeverageProfile finish_profile(Vector l, double floor, QPolicy policy) {
  LeverageProfile p;
  p.l = std::move(l);
  p.floor = floor;
  p.s_hat = p.l.sum();
  if (!(p.s_hat > 0.0)) throw NumericError("leverage scores sum to zero; the kernel is zero");
  if (policy.kind == QPolicy::Kind::manual) {
    if (!(policy.value > 0.0) || !std::isfinite(policy.value)) {
      throw InvalidInput("manual q must be positive, got " + std::to_string(policy.value));
    }
    p.q = policy.value;
  } else {
    p.q = std::max(p.s_hat * p.s_hat, p.s_hat);
  }
  p.cdf.resize(static_cast<std::size_t>(p.l.size()));
  double running = 0.0;
  for (Index i = 0; i < p.l.size(); ++i) {
    running += p.l[i];
    p.cdf[i] = running / p.s_hat;
  }
  p.cdf.back() = 1.0;
  return p;
}

}  // namespace

LeverageProfile compute_leverage_profile(const PsdKernel& kernel, const NystromSketch& sketch, QPolicy policy) {
  require_matching(kernel, sketch);
  const double floor = leverage_floor(kernel);
  return finish_profile(omp::leverage_rows(sketch.factor(), sketch.chol_factor(), kernel.diagonal(), floor), floor,
                        policy);
}

LeverageProfile leverage_profile_spectral(const PsdKernel& kernel, const NystromSketch& sketch, QPolicy policy) {
  require_matching(kernel, sketch);
  const double floor = leverage_floor(kernel);
  const Vector diag = kernel.diagonal();
  const Eigen::ArrayXd shrink = 1.0 / (1.0 + sketch.inner_eigs().array());
  const Matrix& r = sketch.rotated_factor();
  Vector l(r.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < r.rows(); ++i) {
    const Eigen::ArrayXd sq = r.row(i).transpose().array().square();
    l[i] = std::max(floor, (diag[i] - sq.sum()) + (sq * shrink).sum());
  }
  return finish_profile(std::move(l), floor, policy);
}

// ---------------------------------------------------------------------------

namespace {

Index argmax_diagonal(const PsdKernel& kernel) {
  Index best = 0;
  kernel.diagonal().maxCoeff(&best);
  return best;
}

/// First `count` entries of a partial Fisher–Yates shuffle of `pool`, sorted.
IndexSequence choose_subset(IndexSequence pool, Index count, Philox& rng) {
  const auto size = static_cast<Index>(pool.size());
  count = std::min(count, size);
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(size - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Vector bootstrap_scores(const PsdKernel& kernel, IndexSequence dictionary) {
  try {
    return compute_leverage_profile(kernel, NystromSketch::build(kernel, dictionary)).l;
  } catch (const DegenerateSketchError&) {
    const Index best = argmax_diagonal(kernel);
    if (std::find(dictionary.begin(), dictionary.end(), best) != dictionary.end()) throw;
    dictionary.push_back(best);
    return compute_leverage_profile(kernel, NystromSketch::build(kernel, std::move(dictionary))).l;
  }
}

}  // namespace

IndexSequence uniform_subset(Index n, Index count, Philox& rng) {
  if (count < 0 || count > n) throw InvalidInput("subset size out of range");
  IndexSequence all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return choose_subset(std::move(all), count, rng);
}

Dictionary resample_dictionary(const PsdKernel& kernel, const Vector& scores, double qbar_d, Index m_cap, Philox& rng) {
  const Index n = kernel.size();
  if (scores.size() != n) throw InvalidInput("score vector length does not match the kernel");
  if (m_cap < 1 || m_cap > n) throw InvalidInput("m_cap must lie in [1, n]");
  IndexSequence chosen;
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < std::min(1.0, qbar_d * scores[i])) chosen.push_back(i);
  }
  if (static_cast<Index>(chosen.size()) > m_cap) chosen = choose_subset(std::move(chosen), m_cap, rng);
  if (chosen.empty()) chosen.push_back(argmax_diagonal(kernel));
  return Dictionary{std::move(chosen), scores, qbar_d, m_cap};
}

Vector bootstrap_leverage(const PsdKernel& kernel, const RlsConfig& config, Philox& rng) {
  const Index n = kernel.size();
  config.validate(n);
  if (n == 1) return kernel.diagonal();
  Vector scores = bootstrap_scores(kernel, uniform_subset(n, config.resolved_m0(n), rng));
  if (config.refine_bootstrap) {
    Dictionary level = resample_dictionary(kernel, scores, config.qbar_b, config.resolved_m_cap(n), rng);
    scores = bootstrap_scores(kernel, std::move(level.indices));
  }
  return scores;
}

Dictionary build_dictionary(const PsdKernel& kernel, const RlsConfig& config, Philox& rng) {
  const Index n = kernel.size();
  const Index m_cap = config.resolved_m_cap(n);
  Vector scores = bootstrap_leverage(kernel, config, rng);
  if (n == 1) return Dictionary{{0}, std::move(scores), config.qbar_d, m_cap};
  return resample_dictionary(kernel, scores, config.qbar_d, m_cap, rng);
}

Dictionary double_dictionary(const PsdKernel& kernel, const Dictionary& previous, Philox& rng) {
  const Index m_cap = std::min(kernel.size(), 2 * previous.m_cap);
  return resample_dictionary(kernel, previous.scores, 2.0 * previous.qbar_d, m_cap, rng);
}

double precondition_gap(const PsdKernel& kernel, const NystromSketch& sketch, Index max_n) {
  require_matching(kernel, sketch);
  if (kernel.size() > max_n) {
    throw InvalidInput("precondition_gap is an O(n³) diagnostic; refused for n = " + std::to_string(kernel.size()) +
                       " > " + std::to_string(max_n));
  }
  const Matrix l = kernel.to_dense(max_n);
  const Index n = l.rows();
  const Matrix shifted = l + Matrix::Identity(n, n);
  const Matrix approx = sketch.factor() * sketch.factor().transpose();
  const Matrix exact_term = solve_spd(shifted, l);
  const Matrix approx_term = solve_spd(shifted, approx);
  return l.cwiseProduct(exact_term.transpose()).sum() - approx.cwiseProduct(approx_term.transpose()).sum();
}

}  // namespace dppvfx
