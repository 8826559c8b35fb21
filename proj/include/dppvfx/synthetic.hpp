#pragma once

#include "dppvfx/kernel.hpp"
#include "dppvfx/rng.hpp"

namespace dppvfx {

/// Standard normal by Box–Muller (two uniforms per call).
double standard_normal(Philox& rng);

/// Mixture of isotropic Gaussians: centers ~ N(0, center_scale²·I), points
/// ~ N(center, noise²·I), cluster chosen uniformly per point.
struct BlobSpec {
  Index n = 1000;
  Index dim = 784;
  Index clusters = 10;
  double center_scale = 2.0;
  double noise = 1.0;
};
PointCloud gaussian_blobs(const BlobSpec& spec, Philox& rng);

/// G·Gᵀ/rank with G an n×rank standard normal matrix, plus `ridge`·I.
Matrix random_psd(Index n, Index rank, Philox& rng, double ridge = 0.0);

}  // namespace dppvfx
