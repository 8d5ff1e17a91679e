#include "omrsc/simulate.hpp"

#include <cmath>
#include <string>

namespace omrsc {

namespace {

Rotation hidden_rotation(std::uint64_t seed, int n) {
  if (n == 0) return Rotation();
  Rng rng(seed, static_cast<std::uint64_t>(n));
  return uniform_rotation(rng);
}

void check_count(int N) {
  if (N < 1) throw SizeError("generate: N must be >= 1, got " + std::to_string(N));
}

}  // namespace

Dataset generate(const GaussianMixture& mix, int G, int N, std::uint64_t seed) {
  check_count(N);
  Dataset ds;
  ds.seed = seed;
  ds.images.resize(N);
  std::vector<Rotation> rots(N);
#pragma omp parallel for schedule(dynamic, 16)
  for (int n = 0; n < N; ++n) {
    rots[n] = hidden_rotation(seed, n);
    ds.images[n] = render_projection(mix, rots[n], G);
  }
  ds.hidden_rotations = std::move(rots);
  return ds;
}

namespace serial {
Dataset generate(const GaussianMixture& mix, int G, int N, std::uint64_t seed) {
  check_count(N);
  Dataset ds;
  ds.seed = seed;
  std::vector<Rotation> rots;
  for (int n = 0; n < N; ++n) {
    rots.push_back(hidden_rotation(seed, n));
    ds.images.push_back(render_projection(mix, rots.back(), G));
  }
  ds.hidden_rotations = std::move(rots);
  return ds;
}
}  // namespace serial

Dataset add_noise(const Dataset& clean, double snr, std::uint64_t seed) {
  if (!(snr > 0.0)) throw DomainError("add_noise: snr must be positive");
  if (clean.images.empty()) throw SizeError("add_noise: empty dataset");
  double power = 0.0;
  for (const Image& img : clean.images) power += img.squaredNorm();
  const double pixels = double(clean.N()) * clean.G() * clean.G();
  Dataset out = clean;
  out.sigma = std::sqrt(power / (snr * pixels));
  out.snr = snr;
  out.seed = seed;
  const int N = clean.N();
#pragma omp parallel for schedule(dynamic, 16)
  for (int n = 0; n < N; ++n) {
    Rng rng(seed ^ 0x6e6f697365ULL, static_cast<std::uint64_t>(n));
    Image& img = out.images[n];
    for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] += out.sigma * rng.normal();
  }
  return out;
}

double empirical_snr(const Dataset& noisy, const Dataset& clean) {
  if (noisy.N() != clean.N() || noisy.G() != clean.G()) throw SizeError("empirical_snr: dataset shapes differ");
  double s = 0.0, e = 0.0;
  for (int n = 0; n < clean.N(); ++n) {
    s += clean.images[n].squaredNorm();
    e += (noisy.images[n] - clean.images[n]).squaredNorm();
  }
  return s / e;
}

Image lowpass(const Image& image, double sigma_px) {
  if (!(sigma_px > 0.0)) return image;
  const int r = static_cast<int>(std::ceil(3.0 * sigma_px));
  Eigen::VectorXd k(2 * r + 1);
  for (int t = -r; t <= r; ++t) k[t + r] = std::exp(-0.5 * t * t / (sigma_px * sigma_px));
  k /= k.sum();
  const Eigen::Index G0 = image.rows(), G1 = image.cols();
  Image tmp = Image::Zero(G0, G1), out = Image::Zero(G0, G1);
  for (Eigen::Index j = 0; j < G1; ++j)
    for (Eigen::Index i = 0; i < G0; ++i)
      for (int t = -r; t <= r; ++t) {
        const Eigen::Index ii = i + t;
        if (ii >= 0 && ii < G0) tmp(i, j) += k[t + r] * image(ii, j);
      }
  for (Eigen::Index j = 0; j < G1; ++j)
    for (Eigen::Index i = 0; i < G0; ++i)
      for (int t = -r; t <= r; ++t) {
        const Eigen::Index jj = j + t;
        if (jj >= 0 && jj < G1) out(i, j) += k[t + r] * tmp(i, jj);
      }
  return out;
}

}  // namespace omrsc
