#include "dppvfx/scaling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>

#include "dppvfx/errors.hpp"
#include "dppvfx/kdpp.hpp"
#include "dppvfx/sampler.hpp"
#include "dppvfx/synthetic.hpp"

namespace dppvfx {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t mode_of(const std::vector<std::uint64_t>& values) {
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto v : values) ++counts[v];
  return std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
}

}  // namespace

ScalingPoint run_scaling_point(Index n, const ScalingConfig& config, std::ostream* log) {
  if (n < 2) throw InvalidInput("scaling point needs n ≥ 2");
  const Index m0 = 10 * static_cast<Index>(std::ceil(std::log(static_cast<double>(n))));
  const double bytes = 8.0 * static_cast<double>(n) * (static_cast<double>(config.dim) + 6.0 * static_cast<double>(std::max<Index>(m0, 20 * config.k)));
  if (bytes > config.memory_budget_bytes) {
    throw InvalidInput("scaling point n = " + std::to_string(n) + " needs about " + std::to_string(bytes / 1e9) +
                       " GB, above the " + std::to_string(config.memory_budget_bytes / 1e9) + " GB budget");
  }

  Philox data_rng(config.seed, 10);
  auto cloud = std::make_shared<const PointCloud>(
      gaussian_blobs(BlobSpec{n, config.dim, config.clusters, 2.0, 1.0}, data_rng));

  ScalingPoint point;
  point.n = n;
  const auto start = Clock::now();
  const PsdKernel kernel = PsdKernel::rbf(cloud, default_sigma(config.dim));
  Philox rng(config.seed, 0);
  const NystromSketch bootstrap = NystromSketch::build(kernel, uniform_subset(n, std::min(m0, n), rng));
  const KdppCalibration calib = find_alpha_star(kernel.trace(), bootstrap, config.k);
  point.alpha = calib.alpha_star;

  const PsdKernel scaled = kernel.scaled(calib.alpha_star);
  const LeverageProfile rough = leverage_profile_spectral(scaled, bootstrap.scaled(calib.alpha_star));
  point.d_eff_hat = rough.s_hat;
  const auto m_cap = std::min<Index>(n, static_cast<Index>(config.m_per_deff * std::ceil(rough.s_hat)));
  const Dictionary dict = resample_dictionary(scaled, rough.l, config.qbar_d, m_cap, rng);
  VfxSampler sampler(scaled, NystromSketch::build(scaled, dict.indices));
  point.precompute_seconds = seconds_since(start);
  point.m = sampler.sketch().m();
  point.s_hat = sampler.profile().s_hat;

  Philox sample_rng(config.seed, 1);
  SamplerLimits limits;
  limits.auto_double = true;
  auto t0 = Clock::now();
  point.rejections.push_back(sampler.sample(sample_rng, limits).rejections);
  point.first_sample_seconds = seconds_since(t0);

  t0 = Clock::now();
  for (Index r = 0; r < config.resamples; ++r) point.rejections.push_back(sampler.resample(sample_rng, limits).rejections);
  point.mean_resample_seconds = seconds_since(t0) / static_cast<double>(std::max<Index>(config.resamples, 1));

  double total = 0.0;
  for (const auto r : point.rejections) total += static_cast<double>(r);
  point.mean_rejections = total / static_cast<double>(point.rejections.size());
  point.mode_rejections = mode_of(point.rejections);
  if (log) {
    *log << "scaling n=" << n << " m=" << point.m << " alpha=" << point.alpha << " s_hat=" << point.s_hat
         << " precompute=" << point.precompute_seconds << "s first=" << point.first_sample_seconds
         << "s resample=" << point.mean_resample_seconds << "s mean_rej=" << point.mean_rejections << '\n';
  }
  return point;
}

std::vector<ScalingPoint> run_scaling(const ScalingConfig& config, std::ostream* log) {
  std::vector<ScalingPoint> out;
  for (const Index n : config.sizes) out.push_back(run_scaling_point(n, config, log));
  return out;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingPoint>& points) {
  out << "n,precompute_seconds,first_sample_seconds,mean_resample_seconds,mean_rejections,m,s_hat,alpha,mode_rejections\n";
  for (const auto& p : points) {
    out << p.n << ',' << p.precompute_seconds << ',' << p.first_sample_seconds << ',' << p.mean_resample_seconds << ','
        << p.mean_rejections << ',' << p.m << ',' << p.s_hat << ',' << p.alpha << ',' << p.mode_rejections << '\n';
  }
}

}  // namespace dppvfx
