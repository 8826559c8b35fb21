#pragma once

#include <cstdint>
#include <vector>

#include "dppvfx/kernel.hpp"
#include "dppvfx/oracle.hpp"

namespace dppvfx {

/// (1/2)·Σ|p̂ − p| with p̂ = counts / Σ counts.
double tv_distance(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs);
double tv_distance(const std::vector<std::uint64_t>& counts, const ExactDistribution& exact);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit. Bins with expected count below `min_expected`
/// are pooled into one bin.
ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs,
                               double min_expected = 5.0);

/// Pearson homogeneity test across groups (rows) over common bins (columns).
/// Columns whose pooled expectation is small are merged.
ChiSquareResult chi_square_homogeneity(const std::vector<std::vector<std::uint64_t>>& groups, double min_expected = 5.0);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, int dof);

struct MarginalZ {
  std::vector<double> z;       ///< NaN where skipped
  std::vector<Index> skipped;  ///< indices with τ_i ∈ {0, 1}
  double max_abs = 0.0;
};

/// z_i = (p̂_i − τ_i)/√(τ_i(1−τ_i)/N). Requires at least 1000 samples.
MarginalZ marginal_ztest(const std::vector<std::vector<Index>>& samples, const Vector& tau);
MarginalZ marginal_ztest(const std::vector<std::vector<Index>>& samples, const Matrix& kernel);

/// Pearson correlation of two 0/1 sequences; 0 if either is constant.
double indicator_correlation(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y);

}  // namespace dppvfx
