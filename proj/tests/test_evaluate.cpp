#include "omrsc/evaluate.hpp"

#include <doctest.h>

#include <cmath>

using namespace omrsc;

namespace {

Volume white_noise(int G, std::uint64_t seed) {
  Rng rng(seed);
  Volume v(G);
  for (double& x : v.data) x = rng.normal();
  return v;
}

Volume scaled(const Volume& v, double s) {
  Volume out = v;
  for (double& x : out.data) x *= s;
  return out;
}

// Sum of random cosine modes at integer frequencies n, each weighted by H(|n|).
Volume mode_volume(int G, std::uint64_t seed, double (*H)(double)) {
  const int c = (G - 1) / 2;
  Rng rng(seed);
  Volume v(G);
  for (int a = 0; a <= c; ++a)
    for (int b = -c; b <= c; ++b)
      for (int e = -c; e <= c; ++e) {
        if (a == 0 && (b < 0 || (b == 0 && e <= 0))) continue;  // one of each +-n pair, no DC
        const double amp = rng.normal(), phase = 2 * kPi * rng.uniform();
        const double h = H(std::sqrt(double(a * a + b * b + e * e)));
        if (h == 0.0) continue;
        for (int k = 0; k < G; ++k)
          for (int j = 0; j < G; ++j)
            for (int i = 0; i < G; ++i)
              v.at(i, j, k) += h * amp * std::cos(2 * kPi * (a * (i - c) + b * (j - c) + e * (k - c)) / G + phase);
      }
  return v;
}

double all_pass(double) { return 1.0; }

// Flat to 6, cosine taper to zero at 8.
double taper(double r) {
  if (r <= 6.0) return 1.0;
  if (r >= 8.0) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (r - 6.0) / 2.0));
}

}  // namespace

TEST_SUITE("evaluate") {

TEST_CASE("fourier shell correlation") {
  const Volume v = rasterize(random_walk_density(50, 21, 3));
  const FscCurve same = fsc(v, v);
  CHECK(same.k.size() == 11);
  for (double x : same.value) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.value[0] == doctest::Approx(1.0).epsilon(1e-6));
  const FscCurve neg = fsc(v, scaled(v, -1.0));
  for (std::size_t s = 0; s < neg.value.size(); ++s) CHECK(neg.value[s] == doctest::Approx(-1.0).epsilon(1e-12));
  long total = 0;
  for (long n : same.voxels) total += n;
  CHECK(total > 0);
  CHECK(same.voxels[0] == 1);
  CHECK_THROWS_AS(fsc(v, Volume(11)), SizeError);

  const Volume w = white_noise(21, 9);
  const FscCurve a = fsc(v, w), b = fsc(scaled(v, 3.5), scaled(w, 0.2));
  for (std::size_t s = 0; s < a.value.size(); ++s) {
    CHECK(a.value[s] >= -1.0);
    CHECK(a.value[s] <= 1.0);
    CHECK(b.value[s] == doctest::Approx(a.value[s]).epsilon(1e-10));
  }
}

TEST_CASE("white-noise null") {
  const FscCurve c = fsc(white_noise(33, 1), white_noise(33, 2));
  int within = 0;
  for (std::size_t s = 0; s < c.value.size(); ++s)
    if (std::abs(c.value[s]) <= 3.0 / std::sqrt(double(c.voxels[s]))) ++within;
  CHECK(within >= 0.95 * c.value.size());
}

TEST_CASE("low-pass shape") {
  const Volume v = mode_volume(21, 4, all_pass), lp = mode_volume(21, 4, taper);
  const FscCurve c = fsc(v, lp);
  for (int s = 1; s <= 5; ++s) CHECK(c.value[s] >= 0.99);
  for (int s = 9; s <= 10; ++s) CHECK(c.value[s] <= 0.5);
  const Resolution r = resolution(c, 21);
  CHECK(r.crossed);
  CHECK(r.k_cross > 5.0);
  CHECK(r.k_cross < 9.0);
}

TEST_CASE("resolution") {
  FscCurve lin;
  for (int k = 0; k <= 16; ++k) {
    lin.k.push_back(k);
    lin.value.push_back(1.0 - k / 16.0);
  }
  const Resolution r = resolution(lin, 33);
  CHECK(r.crossed);
  CHECK(r.k_cross == doctest::Approx(8.0));
  CHECK(r.value == doctest::Approx(33.0 / 8.0));
  CHECK(resolution(lin, 33, 0.5, 1.5).value == doctest::Approx(1.5 * 33.0 / 8.0));

  const Volume v = rasterize(random_walk_density(50, 21, 4));
  const Resolution best = resolution(fsc(v, v), 21);
  CHECK_FALSE(best.crossed);
  CHECK(best.k_cross == 10.0);
  CHECK(best.value == doctest::Approx(2.1));
  CHECK_THROWS_AS(resolution(FscCurve{}, 21), std::invalid_argument);
}

TEST_CASE("correlation coefficient") {
  const Volume v = rasterize(random_walk_density(50, 21, 5));
  CHECK(correlation_coefficient(v, v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(correlation_coefficient(v, scaled(v, 2.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(correlation_coefficient(v, scaled(v, -1.0)) == doctest::Approx(-1.0).epsilon(1e-14));
  const Volume w = white_noise(21, 3);
  CHECK(correlation_coefficient(scaled(v, 0.3), scaled(w, 7.0)) == doctest::Approx(correlation_coefficient(v, w)).epsilon(1e-12));
  CHECK_THROWS_AS(correlation_coefficient(v, Volume(21)), std::invalid_argument);
}

TEST_CASE("handedness") {
  const Volume truth = rasterize(random_walk_density(50, 21, 6));
  const Volume mirror = reflect_z(truth);
  CHECK(reflect_z(mirror).data == truth.data);
  CHECK(mirror.at(3, 4, 0) == truth.at(3, 4, 20));

  const EvaluationReport same = best_handedness(truth, truth);
  CHECK(same.handedness == Handedness::as_is);
  CHECK(same.correlation == doctest::Approx(1.0));
  CHECK_FALSE(same.resolution.crossed);

  const EvaluationReport flipped = best_handedness(mirror, truth);
  CHECK(flipped.handedness == Handedness::reflected);
  CHECK(flipped.correlation == doctest::Approx(1.0));

  const Volume other = rasterize(random_walk_density(50, 21, 7));
  const EvaluationReport generic = best_handedness(other, truth);
  const double as_is = correlation_coefficient(other, truth), refl = correlation_coefficient(other, mirror);
  CHECK(generic.correlation_as_is == doctest::Approx(as_is).epsilon(1e-14));
  CHECK(generic.correlation_reflected == doctest::Approx(refl).epsilon(1e-14));
  CHECK(generic.correlation == doctest::Approx(std::max(as_is, refl)).epsilon(1e-14));
  CHECK(generic.handedness == (refl > as_is ? Handedness::reflected : Handedness::as_is));

  const EvaluationReport plain = evaluate(other, truth);
  CHECK(plain.correlation == doctest::Approx(as_is).epsilon(1e-14));
  CHECK(plain.G == 21);
  CHECK(plain.cutoff == 0.5);
}

}  // TEST_SUITE
