#include "dppvfx/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "dppvfx/errors.hpp"

namespace dppvfx {

double standard_normal(Philox& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PointCloud gaussian_blobs(const BlobSpec& spec, Philox& rng) {
  if (spec.n < 1 || spec.dim < 1 || spec.clusters < 1) throw InvalidInput("blob sizes must be positive");
  Matrix centers(spec.clusters, spec.dim);
  for (Index c = 0; c < centers.size(); ++c) centers.data()[c] = spec.center_scale * standard_normal(rng);
  Matrix points(spec.n, spec.dim);
  for (Index i = 0; i < spec.n; ++i) {
    const auto c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.clusters)));
    for (Index j = 0; j < spec.dim; ++j) points(i, j) = centers(c, j) + spec.noise * standard_normal(rng);
  }
  return PointCloud(std::move(points));
}

Matrix random_psd(Index n, Index rank, Philox& rng, double ridge) {
  if (n < 1 || rank < 1) throw InvalidInput("random_psd needs positive sizes");
  Matrix g(n, rank);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = standard_normal(rng);
  Matrix out = g * g.transpose() / static_cast<double>(rank);
  out = 0.5 * (out + out.transpose()).eval();
  out.diagonal().array() += ridge;
  return out;
}

}  // namespace dppvfx
