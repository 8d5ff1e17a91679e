#include "omrsc/density.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace omrsc;

namespace {

const double kTau = kDefaultTau;

// Product rule on the unit sphere: GLQ in cos(theta), uniform in phi.
double sphere_integral(const std::function<double(const Vec3&)>& f, int nt = 64, int np = 128) {
  const QuadratureRule q = gauss_legendre(nt, -1.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double ct = q.nodes[i], st = std::sqrt(1.0 - ct * ct);
    for (int p = 0; p < np; ++p) {
      const double ph = 2 * kPi * p / np;
      s += q.weights[i] * (2 * kPi / np) * f(Vec3(st * std::cos(ph), st * std::sin(ph), ct));
    }
  }
  return s;
}

double ylm(int l, int m, const Vec3& u) { return real_sph_harm(l, m, std::acos(std::clamp(u.z(), -1.0, 1.0)), std::atan2(u.y(), u.x())); }

DensityMap make_density(std::vector<Vec3> centers, std::vector<double> w, int G = 21) {
  DensityMap d;
  d.grid.G = G;
  d.grid.centers = std::move(centers);
  d.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  d.total_mass = d.weights.sum();
  return d;
}

double mixture_value(const DensityMap& d, const Vec3& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < d.grid.size(); ++k) s += d.weights[static_cast<Eigen::Index>(k)] * bump_value(x, d.grid.centers[k], d.grid.tau);
  return s;
}

}  // namespace

TEST_SUITE("density") {

TEST_CASE("random walk phantoms") {
  const DensityMap one = random_walk_density(1, 21, 9);
  REQUIRE(one.grid.size() == 1);
  CHECK(one.grid.centers[0].norm() == 0.0);
  CHECK(one.weights[0] == doctest::Approx(kDefaultMass));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DensityMap d = random_walk_density(50, 21, seed);
    CHECK(d.weights.sum() == doctest::Approx(50.0).epsilon(1e-12));
    CHECK_NOTHROW(validate(d));
    CHECK_NOTHROW(validate(d.grid));
    for (const Vec3& c : d.grid.centers) CHECK(c.norm() <= 10.0);
  }

  const DensityMap big = random_walk_density(500, 101, 4);
  CHECK_NOTHROW(validate(big));
  Vec3 com = Vec3::Zero();
  for (std::size_t k = 0; k < big.grid.size(); ++k) com += big.weights[static_cast<Eigen::Index>(k)] * big.grid.centers[k];
  com /= big.total_mass;
  CHECK(com.norm() <= 0.5);
  CHECK_THROWS_AS(random_walk_density(5, 20, 1), SizeError);
}

TEST_CASE("bump spherical-harmonic coefficients") {
  for (int l = 1; l <= 4; ++l)
    for (int m = -l; m <= l; ++m) CHECK(bump_sh_coeff(l, m, 2.0, Vec3::Zero(), kTau) == 0.0);

  const Vec3 mu(1, 2, 2);
  for (auto [l, m, r] : std::vector<std::tuple<int, int, double>>{{2, 1, 3.0}, {0, 0, 2.5}, {3, -2, 3.4}, {4, 4, 2.0}, {1, 0, 0.4}}) {
    const double oracle = sphere_integral([&](const Vec3& u) { return bump_value(r * u, mu, kTau) * ylm(l, m, u); });
    CHECK(std::abs(bump_sh_coeff(l, m, r, mu, kTau) - oracle) <= 1e-6);
  }
}

TEST_CASE("radial vector closed forms") {
  GridSpec g;
  g.G = 21;
  g.centers = {Vec3::Zero(), Vec3(1, 2, 2), Vec3(-3, 0, 4), Vec3(0, 0, 7)};
  const double norm = std::pow(2 * kPi, -1.5) / std::pow(kTau, 3);

  const Eigen::VectorXd at2 = radial_vector(2.0, g);
  CHECK(at2[0] == doctest::Approx(4 * kPi * 4.0 * norm * std::exp(-4.0 / (2 * kTau * kTau))).epsilon(1e-12));

  const Eigen::VectorXd at0 = radial_vector(0.0, g);
  for (std::size_t d = 0; d < g.size(); ++d)
    CHECK(at0[static_cast<Eigen::Index>(d)] == doctest::Approx(norm * std::exp(-g.centers[d].squaredNorm() / (2 * kTau * kTau))).epsilon(1e-12));

  for (double r : {0.3, 1.7, 3.0, 5.2, 8.9}) {
    const Eigen::VectorXd v = radial_vector(r, g);
    for (std::size_t d = 0; d < g.size(); ++d) {
      const double oracle = r * r * sphere_integral([&](const Vec3& u) { return bump_value(r * u, g.centers[d], kTau); });
      CHECK(std::abs(v[static_cast<Eigen::Index>(d)] - oracle) <= 1e-6);
    }
  }
}

TEST_CASE("analytic radial features") {
  const QuadratureRule q = gauss_legendre(41, 0.0, 10.0);
  const DensityMap origin = make_density({Vec3::Zero()}, {1.0});
  const Eigen::VectorXd W = analytic_radial(origin, q.nodes);
  const double norm = std::pow(2 * kPi, -1.5) / std::pow(kTau, 3);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double r = q.nodes[i];
    CHECK(W[static_cast<Eigen::Index>(i)] == doctest::Approx(4 * kPi * r * r * norm * std::exp(-r * r / (2 * kTau * kTau))).epsilon(1e-12));
  }
  DensityMap zero = origin;
  zero.weights.setZero();
  CHECK(analytic_radial(zero, q.nodes).cwiseAbs().maxCoeff() == 0.0);

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DensityMap d = random_walk_density(50, 21, seed);
    const Eigen::VectorXd Wd = analytic_radial(d, q.nodes);
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) total += q.weights[i] * Wd[static_cast<Eigen::Index>(i)];
    CHECK(std::abs(total - d.total_mass) <= 0.005 * d.total_mass);
  }
}

TEST_CASE("spherical-harmonic operator B") {
  const QuadratureRule q = gauss_legendre(21, 0.0, 10.0);
  const DensityMap origin = make_density({Vec3::Zero()}, {2.0});
  const auto B = eval_B(origin, q.nodes, 4);
  const Eigen::VectorXd W = analytic_radial(origin, q.nodes);
  for (int l = 1; l <= 4; ++l) CHECK(B[l].cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double r = q.nodes[i];
    CHECK(B[0](static_cast<Eigen::Index>(i), 0) == doctest::Approx(W[static_cast<Eigen::Index>(i)] / (std::sqrt(4 * kPi) * r * r)).epsilon(1e-12));
  }

  const DensityMap d = random_walk_density(30, 21, 2);
  const ShOperator op(d.grid, q.nodes, 4);
  Rng rng(3);
  Eigen::VectorXd w1(op.D()), w2(op.D());
  for (int k = 0; k < op.D(); ++k) {
    w1[k] = rng.normal();
    w2[k] = rng.normal();
  }
  std::vector<Eigen::MatrixXd> Y;
  for (int l = 0; l <= 4; ++l) {
    Eigen::MatrixXd y(q.size(), 2 * l + 1);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    Y.push_back(y);
  }
  const auto Bw = op.apply(w1);
  double lhs = 0.0;
  for (int l = 0; l <= 4; ++l) lhs += (Bw[l].array() * Y[l].array()).sum();
  const double rhs = w1.dot(op.adjoint(Y));
  CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));

  const auto Bc = op.apply(1.5 * w1 - 0.25 * w2);
  const auto B1 = op.apply(w1), B2 = op.apply(w2);
  for (int l = 0; l <= 4; ++l) CHECK((Bc[l] - (1.5 * B1[l] - 0.25 * B2[l])).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, B1[l].cwiseAbs().maxCoeff()));

  SUBCASE("matches quadrature of the density on spheres") {
    const DensityMap two = make_density({Vec3(1, 2, 2), Vec3(-2, 0, 3)}, {0.7, 1.3});
    const auto Bt = eval_B(two, {2.2, 3.6}, 3);
    for (int l = 0; l <= 3; ++l)
      for (int c = 0; c < 2 * l + 1; ++c)
        for (int i = 0; i < 2; ++i) {
          const double r = i == 0 ? 2.2 : 3.6;
          const double oracle = sphere_integral([&](const Vec3& u) { return mixture_value(two, r * u) * ylm(l, l - c, u); });
          CHECK(std::abs(Bt[l](i, c) - oracle) <= 1e-6);
        }
  }
}

TEST_CASE("analytic autocorrelation E") {
  const QuadratureRule q = gauss_legendre(15, 0.0, 10.0);
  const DensityMap origin = make_density({Vec3::Zero()}, {1.0});
  const auto E0 = analytic_E(origin, q.nodes, 3);
  const Eigen::VectorXd W0 = analytic_radial(origin, q.nodes);
  for (int l = 1; l <= 3; ++l) CHECK(E0[l].cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t a = 0; a < q.size(); ++a)
    for (std::size_t b = 0; b < q.size(); ++b) {
      const double r1 = q.nodes[a], r2 = q.nodes[b];
      CHECK(E0[0](a, b) == doctest::Approx(W0[a] * W0[b] / (4 * kPi * r1 * r1 * r2 * r2)).epsilon(1e-10));
    }

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DensityMap d = random_walk_density(40, 21, seed);
    const auto E = analytic_E(d, q.nodes, 4);
    const Eigen::VectorXd W = analytic_radial(d, q.nodes);
    for (int l = 0; l <= 4; ++l) CHECK((E[l] - E[l].transpose()).cwiseAbs().maxCoeff() <= 1e-12 * E[l].cwiseAbs().maxCoeff());
    for (std::size_t a = 0; a < q.size(); ++a)
      for (std::size_t b = 0; b < q.size(); ++b) {
        const double r1 = q.nodes[a], r2 = q.nodes[b];
        const double lhs = 4 * kPi * r1 * r1 * r2 * r2 * E[0](a, b), rhs = W[a] * W[b];
        CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(std::abs(rhs), 1e-300) + 1e-300);
      }
  }

  SUBCASE("brute force on spheres") {
    const DensityMap d = make_density({Vec3(1, 2, 2), Vec3(-2, 0, 3), Vec3(0, -1, 0), Vec3(3, 3, -1), Vec3(0, 0, -4)},
                                      {0.7, 1.3, 0.4, 1.1, 0.5});
    const std::vector<double> radii = {1.1, 2.6, 4.3};
    const auto E = analytic_E(d, radii, 4);
    for (int l = 0; l <= 4; ++l) {
      Eigen::MatrixXd Bq(radii.size(), 2 * l + 1);
      for (std::size_t i = 0; i < radii.size(); ++i)
        for (int c = 0; c < 2 * l + 1; ++c)
          Bq(i, c) = sphere_integral([&](const Vec3& u) { return mixture_value(d, radii[i] * u) * ylm(l, l - c, u); });
      const Eigen::MatrixXd oracle = Bq * Bq.transpose();
      CHECK((E[l] - oracle).cwiseAbs().maxCoeff() <= 1e-5);
    }
  }
}

TEST_CASE("projection rendering") {
  const DensityMap origin = make_density({Vec3::Zero()}, {3.0});
  const Image img = render_projection(origin, Rotation());
  // Pixel sampling aliases at about 4 exp(-2 pi^2 tau^2) = 1.5e-6.
  CHECK(img.sum() == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(img(10, 10) == doctest::Approx(3.0 / (2 * kPi * kTau * kTau)).epsilon(1e-12));

  const DensityMap d = random_walk_density(50, 21, 6);
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    const Rotation R = uniform_rotation(rng);
    CHECK(std::abs(render_projection(d, R).sum() - d.total_mass) <= 0.005 * d.total_mass);
  }

  DensityMap a = d, b = d, s = d;
  for (Eigen::Index k = 0; k < d.weights.size(); ++k) {
    a.weights[k] = rng.uniform();
    b.weights[k] = rng.uniform();
    s.weights[k] = a.weights[k] + b.weights[k];
  }
  const Rotation R = uniform_rotation(rng);
  CHECK((render_projection(s, R) - render_projection(a, R) - render_projection(b, R)).cwiseAbs().maxCoeff() <= 1e-14);

  // A quarter turn about z permutes pixels exactly.
  const Image base = render_projection(d, Rotation());
  const Image turned = render_projection(d, Rotation::about_z(kPi / 2));
  const int G = 21;
  double err = 0.0;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) err = std::max(err, std::abs(turned(i, j) - base(j, G - 1 - i)));
  CHECK(err <= 1e-3 * base.maxCoeff());

  const Eigen::MatrixXd P = projection_matrix(d.grid);
  const Eigen::VectorXd flat = P * d.weights;
  CHECK((Eigen::Map<const Eigen::VectorXd>(base.data(), base.size()) - flat).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("grid pruning") {
  const DensityMap big = make_density({Vec3::Zero()}, {1.0});
  DensityMap wide = big;
  wide.grid.tau = 20.0;
  const Image flat = render_projection(wide, Rotation());
  CHECK(flat.minCoeff() > 0.0);
  CHECK(prune_grid(flat, 0.0, 21).size() == full_ball(21).size());
  CHECK_THROWS_AS(prune_grid(flat, flat.maxCoeff() * 2, 21), EmptyGridError);

  const DensityMap one = make_density({Vec3(3, -2, 1)}, {1.0});
  const Image ref = render_projection(one, Rotation());
  const double thr = 1e-3 * ref.maxCoeff();
  const GridSpec g = prune_grid(ref, thr, 21);
  std::size_t expect = 0;
  for (int x = -10; x <= 10; ++x)
    for (int y = -10; y <= 10; ++y)
      for (int z = -10; z <= 10; ++z)
        if (x * x + y * y + z * z <= 100 && ref(x + 10, y + 10) > thr) ++expect;
  CHECK(g.size() == expect);
  for (const Vec3& c : g.centers) CHECK(ref(int(c.x()) + 10, int(c.y()) + 10) > thr);
}

TEST_CASE("rasterize and resampling") {
  DensityMap zero = random_walk_density(20, 21, 1);
  zero.weights.setZero();
  const Volume vz = rasterize(zero);
  CHECK(*std::max_element(vz.data.begin(), vz.data.end()) == 0.0);

  const DensityMap d = random_walk_density(50, 21, 3);
  const Volume v = rasterize(d), vs = serial::rasterize(d.mixture(), 21);
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    diff = std::max(diff, std::abs(v.data[i] - vs.data[i]));
    sum += v.data[i];
  }
  CHECK(diff <= 1e-14);
  CHECK(sum == doctest::Approx(d.total_mass).epsilon(1e-3));
  CHECK(v.at(10, 10, 10) == doctest::Approx(mixture_value(d, Vec3::Zero())).epsilon(1e-8));

  const Image img = render_projection(d, Rotation());
  for (int Gc : {11, 7, 5}) CHECK(downsample_image(img, Gc).sum() == doctest::Approx(img.sum()).epsilon(1e-9));
  double vsum = 0.0;
  for (double x : downsample_volume(v, 11).data) vsum += x;
  CHECK(vsum == doctest::Approx(sum).epsilon(1e-9));
  CHECK(coarse_size(101, 5) == 21);
  CHECK(coarse_size(21, 2) == 11);
  CHECK_THROWS_AS(coarse_size(21, 3), SizeError);

  const DensityMap smooth = random_walk_density(50, 21, 3, kDefaultMass, 2.0);
  const DensityMap coarse = downsample_density(smooth, 11, 2.0);
  CHECK(coarse.weights.sum() == doctest::Approx(smooth.total_mass).epsilon(1e-9));
  const DensityMap back = upsample_density(coarse, full_ball(21, 2.0));
  CHECK(back.weights.sum() == doctest::Approx(smooth.total_mass).epsilon(1e-9));
  const Volume vf = rasterize(smooth), vb = rasterize(back);
  Eigen::Map<const Eigen::VectorXd> x(vf.data.data(), vf.data.size()), y(vb.data.data(), vb.data.size());
  const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
  CHECK(xc.dot(yc) / (xc.norm() * yc.norm()) >= 0.95);
}

}  // TEST_SUITE
