#include "omrsc/mathcore.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace omrsc;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Ascending series for I_nu in long double.
long double bessel_i_series(long double nu, long double x) {
  long double term = std::pow(x / 2, nu) / std::tgamma(nu + 1), sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= (x * x / 4) / (k * (k + nu));
    sum += term;
    if (term < 1e-30L * sum) break;
  }
  return sum;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace

TEST_SUITE("mathcore") {

TEST_CASE("legendre values") {
  CHECK(legendre(0, 0.7) == 1.0);
  for (double x : {-1.0, -0.3, 0.0, 0.42, 1.0}) CHECK(legendre(1, x) == doctest::Approx(x).epsilon(1e-15));
  CHECK(legendre(2, 0.5) == doctest::Approx(-0.125).epsilon(1e-15));
  CHECK_THROWS_AS(legendre(2, 1.1), DomainError);
  CHECK_NOTHROW(legendre(3, 1.0 + 1e-13));
}

TEST_CASE("legendre orthogonality on 64-node rule") {
  const QuadratureRule q = gauss_legendre(64, -1.0, 1.0);
  for (int l = 0; l <= 12; ++l)
    for (int lp = 0; lp <= 12; ++lp) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * legendre(l, q.nodes[i]) * legendre(lp, q.nodes[i]);
      const double expect = l == lp ? 2.0 / (2 * l + 1) : 0.0;
      CHECK(std::abs(s - expect) <= 1e-8);
    }
}

TEST_CASE("real spherical harmonics") {
  for (double th : {0.0, 0.4, 2.1})
    for (double ph : {0.0, 1.3, 5.0}) CHECK(real_sph_harm(0, 0, th, ph) == doctest::Approx(std::sqrt(1.0 / (4 * kPi))));
  CHECK(real_sph_harm(1, 0, 0.0, 0.9) == doctest::Approx(std::sqrt(3.0 / (4 * kPi))));
  CHECK_THROWS_AS(real_sph_harm(2, 3, 0.1, 0.1), DomainError);

  SUBCASE("orthonormal on a product grid") {
    const QuadratureRule ct = gauss_legendre(24, -1.0, 1.0);
    const int nphi = 48;
    for (int l = 0; l <= 10; ++l)
      for (int m = -l; m <= l; ++m) {
        double s = 0.0, cross = 0.0;
        const int lp = std::max(0, l - 1);
        for (std::size_t i = 0; i < ct.size(); ++i) {
          const double th = std::acos(ct.nodes[i]);
          for (int p = 0; p < nphi; ++p) {
            const double ph = 2 * kPi * p / nphi, wgt = ct.weights[i] * 2 * kPi / nphi;
            const double y = real_sph_harm(l, m, th, ph);
            s += wgt * y * y;
            if (std::abs(m) <= lp && lp != l) cross += wgt * y * real_sph_harm(lp, m, th, ph);
          }
        }
        CHECK(std::abs(s - 1.0) <= 1e-8);
        CHECK(std::abs(cross) <= 1e-8);
      }
  }

  SUBCASE("batch evaluation matches single calls") {
    Rng rng(5);
    std::vector<double> all;
    for (int t = 0; t < 10; ++t) {
      const Vec3 u = random_unit(rng);
      real_sph_harm_all(8, u, all);
      const double th = std::acos(u.z()), ph = std::atan2(u.y(), u.x());
      for (int l = 0; l <= 8; ++l)
        for (int m = -l; m <= l; ++m) CHECK(all[sh_index(l, m)] == doctest::Approx(real_sph_harm(l, m, th, ph)).epsilon(1e-12));
    }
  }
}

TEST_CASE("addition theorem") {
  Rng rng(11);
  std::vector<double> ya, yb;
  for (int t = 0; t < 50; ++t) {
    const Vec3 a = random_unit(rng), b = random_unit(rng);
    real_sph_harm_all(10, a, ya);
    real_sph_harm_all(10, b, yb);
    for (int l = 0; l <= 10; ++l) {
      double s = 0.0;
      for (int m = -l; m <= l; ++m) s += ya[sh_index(l, m)] * yb[sh_index(l, m)];
      const double expect = (2 * l + 1) / (4 * kPi) * legendre(l, std::clamp(a.dot(b), -1.0, 1.0));
      CHECK(std::abs(s - expect) <= 1e-8);
    }
  }
}

TEST_CASE("spherical bessel j") {
  CHECK(spherical_bessel_j(0, 0.0) == 1.0);
  CHECK(spherical_bessel_j(3, 0.0) == 0.0);
  CHECK(std::abs(spherical_bessel_j(0, kPi)) <= 1e-15);

  SUBCASE("integral representation") {
    // int_{-1}^{1} sin(x t) P_3(t) dt = -2 j_3(x)
    const double x = 2.5;
    const double s = simpson([&](double t) { return std::sin(x * t) * 0.5 * (5 * t * t * t - 3 * t); }, -1.0, 1.0, 4000);
    CHECK(std::abs(spherical_bessel_j(3, x) - (-0.5 * s)) <= 1e-10);
    for (int l : {0, 2, 4, 6}) {
      const double xl = 7.3;
      const double c = simpson([&](double t) { return std::cos(xl * t) * legendre(l, t); }, -1.0, 1.0, 8000);
      const double sign = (l / 2) % 2 ? -1.0 : 1.0;
      CHECK(std::abs(spherical_bessel_j(l, xl) - sign * 0.5 * c) <= 1e-10);
    }
  }

  SUBCASE("three-term recurrence") {
    std::vector<double> j;
    for (double x = 0.1; x <= 50.0; x += 0.37) {
      spherical_bessel_j_all(21, x, j);
      for (int l = 1; l <= 20; ++l) {
        const double lhs = j[l - 1] + j[l + 1], rhs = (2 * l + 1) / x * j[l];
        const double scale = std::max({std::abs(j[l - 1]), std::abs(j[l + 1]), std::abs(rhs)});
        CHECK(std::abs(lhs - rhs) <= 1e-9 * scale);
        CHECK(j[l] == doctest::Approx(spherical_bessel_j(l, x)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("scaled modified bessel of half-integer order") {
  CHECK(scaled_bessel_i_half(0, 0.0) == 0.0);
  CHECK(scaled_bessel_i_half(0, 1.0) == doctest::Approx(std::exp(-1.0) * std::sqrt(2 / kPi) * std::sinh(1.0)).epsilon(1e-14));
  const long double oracle = std::exp(-10.0L) * bessel_i_series(2.5L, 10.0L);
  CHECK(std::abs(scaled_bessel_i_half(2, 10.0) - static_cast<double>(oracle)) <= 1e-10 * static_cast<double>(oracle));
  for (int l = 0; l <= 10; ++l)
    for (double x : {1e-8, 1e-4, 5e-4, 2e-3, 0.3, 3.0, 25.0}) {
      const long double o = std::exp(-static_cast<long double>(x)) * bessel_i_series(l + 0.5L, x);
      CHECK(std::abs(scaled_bessel_i_half(l, x) - static_cast<double>(o)) <= 1e-10 * static_cast<double>(o));
    }
  for (int l : {0, 3, 10}) {
    const double v = scaled_bessel_i_half(l, 1e6);
    CHECK(std::isfinite(v));
    // e^{-x} I_nu(x) -> 1 / sqrt(2 pi x)
    CHECK(v == doctest::Approx(1.0 / std::sqrt(2 * kPi * 1e6)).epsilon(1e-4));
  }
}

TEST_CASE("gauss-legendre rules") {
  const QuadratureRule two = gauss_legendre(2, -1.0, 1.0);
  CHECK(two.nodes[0] == doctest::Approx(-1 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(two.nodes[1] == doctest::Approx(1 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(two.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(two.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
  const QuadratureRule one = gauss_legendre(1, 0.0, 2.0);
  CHECK(one.nodes[0] == doctest::Approx(1.0));
  CHECK(one.weights[0] == doctest::Approx(2.0));
  const QuadratureRule s = gauss_legendre(16, 0.0, kPi);
  double integral = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) integral += s.weights[i] * std::sin(s.nodes[i]);
  CHECK(std::abs(integral - 2.0) <= 1e-12);
  CHECK_THROWS_AS(gauss_legendre(4, 1.0, 1.0), DomainError);

  for (int n : {1, 3, 8, 33, 101}) {
    const QuadratureRule q = gauss_legendre(n, -0.5, 2.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(q.nodes[i] > q.lo);
      CHECK(q.nodes[i] < q.hi);
      if (i) CHECK(q.nodes[i] > q.nodes[i - 1]);
      CHECK(q.weights[i] > 0.0);
      wsum += q.weights[i];
    }
    CHECK(std::abs(wsum - 2.5) <= 1e-12 * 2.5);
    for (int deg = 0; deg <= 2 * n - 1 && deg <= 40; ++deg) {
      double s2 = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) s2 += q.weights[i] * std::pow(q.nodes[i], deg);
      const double exact = (std::pow(2.0, deg + 1) - std::pow(-0.5, deg + 1)) / (deg + 1);
      CHECK(std::abs(s2 - exact) <= 1e-10 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("uniform rotations") {
  Rng a(42), b(42);
  const Rotation r1 = uniform_rotation(a), r2 = uniform_rotation(a);
  CHECK((r1.matrix() - r2.matrix()).norm() > 1e-3);
  CHECK((uniform_rotation(b).matrix() - r1.matrix()).norm() == 0.0);
  for (const Rotation& r : {r1, r2, r1 * r2}) {
    CHECK((r.matrix().transpose() * r.matrix() - Mat3::Identity()).norm() <= 1e-12);
    CHECK(std::abs(r.matrix().determinant() - 1.0) <= 1e-12);
  }
  Rng rng(7);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) mean += uniform_rotation(rng).matrix()(0, 0);
  CHECK(std::abs(mean / n) <= 0.01);
}

}  // TEST_SUITE
