#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "dppvfx/kernel.hpp"

namespace dppvfx {

struct ScalingConfig {
  std::vector<Index> sizes{1000, 10000, 50000};
  Index dim = 784;
  Index clusters = 10;
  Index k = 10;              ///< target expected sample size after rescaling
  Index resamples = 200;
  double qbar_d = 10.0;
  double m_per_deff = 10.0;  ///< m_cap = m_per_deff·ceil(d̂)
  std::uint64_t seed = 2019;
  double memory_budget_bytes = 3.5e9;
};

struct ScalingPoint {
  Index n = 0;
  Index m = 0;
  double alpha = 0.0;
  double s_hat = 0.0;
  double d_eff_hat = 0.0;
  double precompute_seconds = 0.0;
  double first_sample_seconds = 0.0;
  double mean_resample_seconds = 0.0;
  double mean_rejections = 0.0;
  std::uint64_t mode_rejections = 0;
  std::vector<std::uint64_t> rejections;  ///< one entry per draw, first sample included
};

/// One point of the sweep on synthetic blobs with an implicit Gaussian kernel.
/// Precompute covers bootstrap sketch, α* calibration, dictionary redraw,
/// final sketch and leverage profile; data generation is excluded.
ScalingPoint run_scaling_point(Index n, const ScalingConfig& config, std::ostream* log = nullptr);
std::vector<ScalingPoint> run_scaling(const ScalingConfig& config, std::ostream* log = nullptr);

void write_scaling_csv(std::ostream& out, const std::vector<ScalingPoint>& points);

}  // namespace dppvfx
