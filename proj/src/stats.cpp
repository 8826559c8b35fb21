#include "dppvfx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "dppvfx/errors.hpp"

namespace dppvfx {

double tv_distance(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs) {
  if (counts.size() != probs.size()) throw InvalidInput("count and probability vectors differ in length");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  if (total == 0.0) throw InvalidInput("no samples");
  double tv = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) tv += std::abs(static_cast<double>(counts[i]) / total - probs[i]);
  return 0.5 * tv;
}

double tv_distance(const std::vector<std::uint64_t>& counts, const ExactDistribution& exact) {
  return tv_distance(counts, exact.probs);
}

double chi_square_sf(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  if (!(statistic > 0.0)) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs,
                               double min_expected) {
  if (counts.size() != probs.size()) throw InvalidInput("count and probability vectors differ in length");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  if (total == 0.0) throw InvalidInput("no samples");
  ChiSquareResult out;
  std::vector<double> obs, exp;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = total * probs[i];
    const auto observed = static_cast<double>(counts[i]);
    if (expected <= 0.0 && observed > 0.0) {
      out.statistic = std::numeric_limits<double>::infinity();  // mass on an impossible outcome
      out.p_value = 0.0;
      return out;
    }
    if (expected < min_expected) {
      pooled_obs += observed;
      pooled_exp += expected;
    } else {
      obs.push_back(observed);
      exp.push_back(expected);
    }
  }
  if (pooled_exp > 0.0) {
    if (pooled_exp >= min_expected || exp.empty()) {
      obs.push_back(pooled_obs);
      exp.push_back(pooled_exp);
    } else {
      const auto smallest = std::min_element(exp.begin(), exp.end()) - exp.begin();
      obs[smallest] += pooled_obs;
      exp[smallest] += pooled_exp;
    }
  }
  for (std::size_t b = 0; b < obs.size(); ++b) out.statistic += (obs[b] - exp[b]) * (obs[b] - exp[b]) / exp[b];
  const int bins = static_cast<int>(obs.size());
  out.dof = std::max(bins - 1, 0);
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

ChiSquareResult chi_square_homogeneity(const std::vector<std::vector<std::uint64_t>>& groups, double min_expected) {
  if (groups.size() < 2) throw InvalidInput("homogeneity test needs at least two groups");
  const std::size_t cols = groups.front().size();
  for (const auto& g : groups) {
    if (g.size() != cols) throw InvalidInput("groups differ in number of bins");
  }
  const std::size_t rows = groups.size();
  std::vector<double> row_total(rows, 0.0), col_total(cols, 0.0);
  double grand = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = static_cast<double>(groups[r][c]);
      row_total[r] += v;
      col_total[c] += v;
      grand += v;
    }
  }
  if (grand == 0.0) throw InvalidInput("no samples");
  const double min_row = *std::min_element(row_total.begin(), row_total.end());

  // Columns whose smallest expected cell is below the threshold are merged.
  std::vector<std::vector<double>> table(rows);
  std::vector<double> pooled(rows, 0.0);
  double pooled_total = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    if (col_total[c] == 0.0) continue;
    if (col_total[c] * min_row / grand < min_expected) {
      for (std::size_t r = 0; r < rows; ++r) pooled[r] += static_cast<double>(groups[r][c]);
      pooled_total += col_total[c];
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) table[r].push_back(static_cast<double>(groups[r][c]));
  }
  if (pooled_total > 0.0) {
    for (std::size_t r = 0; r < rows; ++r) table[r].push_back(pooled[r]);
  }

  ChiSquareResult out;
  const std::size_t used = table.front().size();
  for (std::size_t c = 0; c < used; ++c) {
    double ct = 0.0;
    for (std::size_t r = 0; r < rows; ++r) ct += table[r][c];
    for (std::size_t r = 0; r < rows; ++r) {
      const double expected = row_total[r] * ct / grand;
      if (expected > 0.0) out.statistic += (table[r][c] - expected) * (table[r][c] - expected) / expected;
    }
  }
  out.dof = static_cast<int>((rows - 1) * (used > 0 ? used - 1 : 0));
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

MarginalZ marginal_ztest(const std::vector<std::vector<Index>>& samples, const Vector& tau) {
  if (samples.size() < 1000) throw InvalidInput("marginal z-test needs at least 1000 samples");
  const Index n = tau.size();
  std::vector<std::uint64_t> hits(static_cast<std::size_t>(n), 0);
  for (const auto& s : samples) {
    check_indices(s, n, "sample member");
    for (const Index i : s) ++hits[i];
  }
  const auto total = static_cast<double>(samples.size());
  MarginalZ out;
  out.z.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  for (Index i = 0; i < n; ++i) {
    const double t = tau[i];
    if (t <= 0.0 || t >= 1.0) {
      out.skipped.push_back(i);
      continue;
    }
    out.z[i] = (static_cast<double>(hits[i]) / total - t) / std::sqrt(t * (1.0 - t) / total);
    out.max_abs = std::max(out.max_abs, std::abs(out.z[i]));
  }
  return out;
}

MarginalZ marginal_ztest(const std::vector<std::vector<Index>>& samples, const Matrix& kernel) {
  return marginal_ztest(samples, exact_rls(kernel, 1.0).tau);
}

double indicator_correlation(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y) {
  if (x.size() != y.size() || x.empty()) throw InvalidInput("correlation needs two equal, non-empty sequences");
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += static_cast<double>(x[i] & y[i]);
  }
  const double mx = sx / n, my = sy / n;
  const double vx = mx * (1.0 - mx), vy = my * (1.0 - my);
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return (sxy / n - mx * my) / std::sqrt(vx * vy);
}

}  // namespace dppvfx
