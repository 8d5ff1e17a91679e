#include "omrsc/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace omrsc;

namespace {

// Sum over pixel rings of equal squared radius of the squared deviation from
// the ring mean. Zero for any image that is a function of radius alone.
double ring_variance(const Eigen::VectorXd& img, int G) {
  const int c = (G - 1) / 2;
  std::map<int, std::pair<double, double>> ring;  // r^2 -> (sum, sum of squares)
  std::map<int, int> count;
  for (int j = 0; j < G; ++j)
    for (int i = 0; i < G; ++i) {
      const int r2 = (i - c) * (i - c) + (j - c) * (j - c);
      const double v = img[j * G + i];
      ring[r2].first += v;
      ring[r2].second += v * v;
      ++count[r2];
    }
  double s = 0.0;
  for (const auto& [r2, sums] : ring) s += sums.second - sums.first * sums.first / count[r2];
  return s;
}

struct SymmetryStat {
  double value, null_mean, null_sd;
};

SymmetryStat mean_image_symmetry(const DensityMap& d, int N, std::uint64_t seed) {
  const Dataset data = generate(d, N, seed);
  const int G = d.grid.G, P = G * G;
  Eigen::MatrixXd X(P, N);
  for (int n = 0; n < N; ++n) X.col(n) = Eigen::Map<const Eigen::VectorXd>(data.images[n].data(), P);
  const Eigen::VectorXd mean = X.rowwise().mean();

  Rng rng(seed + 1000);
  const int B = 100;
  std::vector<double> null(B);
  for (int b = 0; b < B; ++b) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(P);
    for (int n = 0; n < N; ++n) s += X.col(static_cast<Eigen::Index>(rng.uniform() * N) % N);
    null[b] = ring_variance(s / N - mean, G);
  }
  double m = 0.0, v = 0.0;
  for (double x : null) m += x / B;
  for (double x : null) v += (x - m) * (x - m) / (B - 1);
  return {ring_variance(mean, G), m, std::sqrt(v)};
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("noiseless generation") {
  const DensityMap d = random_walk_density(50, 21, 2);
  const Dataset one = generate(d, 1, 5);
  REQUIRE(one.N() == 1);
  CHECK((one.images[0] - render_projection(d, Rotation())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(one.sigma == 0.0);

  const Dataset data = generate(d, 200, 5);
  CHECK(data.reference_index == 0);
  REQUIRE(data.hidden_rotations);
  CHECK((data.hidden_rotations->front().matrix() - Mat3::Identity()).norm() == 0.0);
  for (const Image& img : data.images) {
    CHECK(img.rows() == 21);
    CHECK(std::abs(img.sum() - d.total_mass) <= 0.005 * d.total_mass);
  }
  for (int n = 0; n < data.N(); ++n)
    CHECK((data.images[n] - render_projection(d, (*data.hidden_rotations)[n])).cwiseAbs().maxCoeff() == 0.0);

  const Dataset again = generate(d, 200, 5), serial_run = serial::generate(d.mixture(), 21, 200, 5);
  const Dataset other = generate(d, 200, 6);
  double same = 0.0, ser = 0.0, diff = 0.0;
  for (int n = 0; n < 200; ++n) {
    same = std::max(same, (again.images[n] - data.images[n]).cwiseAbs().maxCoeff());
    ser = std::max(ser, (serial_run.images[n] - data.images[n]).cwiseAbs().maxCoeff());
    diff = std::max(diff, (other.images[n] - data.images[n]).cwiseAbs().maxCoeff());
  }
  CHECK(same == 0.0);
  CHECK(ser == 0.0);
  CHECK(diff > 0.0);
}

TEST_CASE("additive noise") {
  const DensityMap d = random_walk_density(50, 21, 3);
  const Dataset clean = generate(d, 1000, 1);

  const Dataset quiet = add_noise(clean, 1e12, 4);
  double dev = 0.0;
  for (int n = 0; n < clean.N(); ++n) dev = std::max(dev, (quiet.images[n] - clean.images[n]).cwiseAbs().maxCoeff());
  CHECK(dev <= 1e-4);

  const Dataset noisy = add_noise(clean, 0.1, 4);
  CHECK(noisy.sigma > 0.0);
  CHECK(noisy.snr == 0.1);
  const double snr = empirical_snr(noisy, clean);
  CHECK(snr >= 0.095);
  CHECK(snr <= 0.105);

  const Dataset twin = add_noise(clean, 0.1, 4), other = add_noise(clean, 0.1, 5);
  double same = 0.0, diff = 0.0;
  for (int n = 0; n < clean.N(); ++n) {
    same = std::max(same, (twin.images[n] - noisy.images[n]).cwiseAbs().maxCoeff());
    diff = std::max(diff, (other.images[n] - noisy.images[n]).cwiseAbs().maxCoeff());
  }
  CHECK(same == 0.0);
  CHECK(diff > 0.0);
  CHECK_THROWS_AS(add_noise(clean, 0.0, 1), DomainError);
}

TEST_CASE("mean projection is rotationally symmetric") {
  // Bootstrap fluctuations of the mean give the angular variance expected from
  // sampling alone.
  const DensityMap d = random_walk_density(50, 21, 8);
  const SymmetryStat small = mean_image_symmetry(d, 5000, 2);
  CHECK(small.null_sd > 0.0);
  CHECK(small.value <= small.null_mean + 3.0 * small.null_sd);
  const SymmetryStat large = mean_image_symmetry(d, 20000, 2);
  CHECK(large.value <= large.null_mean + 3.0 * large.null_sd);
  CHECK(large.value < 0.5 * small.value);
}

TEST_CASE("low-pass filter") {
  Image delta = Image::Zero(21, 21);
  delta(10, 10) = 1.0;
  const Image blurred = lowpass(delta, 2.0);
  CHECK(blurred.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((blurred - blurred.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(blurred(10, 10) < 1.0);
  CHECK((lowpass(delta, 0.0) - delta).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
