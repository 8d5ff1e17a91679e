#pragma once

#include "omrsc/mathcore.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace omrsc {

inline const double kDefaultTau = std::sqrt(3.0) / 2.0;
inline constexpr double kDefaultMass = 50.0;
// Gaussian support radius, in units of tau, for pixel and voxel loops.
inline constexpr double kSupport = 6.0;

class EmptyGridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Image pixel (i, j) sits at x = i - c, y = j - c with c = (G - 1) / 2.
using Image = Eigen::MatrixXd;

struct GridSpec {
  int G = 0;
  std::vector<Vec3> centers;
  double tau = kDefaultTau;

  std::size_t size() const { return centers.size(); }
  double half() const { return 0.5 * (G - 1); }
};

void validate(const GridSpec& grid);
GridSpec full_ball(int G, double tau = kDefaultTau);

// Weighted isotropic Gaussian bumps with arbitrary (not necessarily integer)
// centers. Used for rendering and for truth maps expressed in a rotated frame.
struct GaussianMixture {
  std::vector<Vec3> centers;
  Eigen::VectorXd weights;
  double tau = kDefaultTau;

  GaussianMixture rotated(const Rotation& r) const;
  GaussianMixture mirrored_z() const;
};

struct DensityMap {
  GridSpec grid;
  Eigen::VectorXd weights;
  double total_mass = kDefaultMass;

  GaussianMixture mixture() const { return {grid.centers, weights, grid.tau}; }
};

void validate(const DensityMap& density, double tol = 1e-9);

struct Volume {
  int G = 0;
  double voxel_size = 1.0;
  std::vector<double> data;

  Volume() = default;
  explicit Volume(int g, double voxel = 1.0)
      : G(g), voxel_size(voxel), data(static_cast<std::size_t>(g) * g * g, 0.0) {}
  double& at(int i, int j, int k) { return data[i + std::size_t(G) * (j + std::size_t(G) * k)]; }
  double at(int i, int j, int k) const { return data[i + std::size_t(G) * (j + std::size_t(G) * k)]; }
};

DensityMap random_walk_density(int steps, int G, std::uint64_t seed, double mass = kDefaultMass,
                               double tau = kDefaultTau);

double bump_value(const Vec3& r, const Vec3& mu, double tau);

double bump_sh_coeff(int l, int m, double r, const Vec3& mu, double tau);

Eigen::VectorXd radial_vector(double r, const GridSpec& grid);
// Rows g(radii[i])^T.
Eigen::MatrixXd radial_matrix(const std::vector<double>& radii, const GridSpec& grid);
Eigen::VectorXd analytic_radial(const DensityMap& density, const std::vector<double>& radii);

// Linear map w -> {B_l}, B_l is V x (2l+1) with column c holding m = l - c.
class ShOperator {
 public:
  ShOperator(const GridSpec& grid, const std::vector<double>& radii, int L);

  int L() const { return L_; }
  int V() const { return static_cast<int>(radii_.size()); }
  int D() const { return D_; }
  const std::vector<double>& radii() const { return radii_; }
  // Row (i * (2l+1) + c), column d.
  const Eigen::MatrixXd& block(int l) const { return G_[l]; }

  std::vector<Eigen::MatrixXd> apply(const Eigen::VectorXd& w) const;
  Eigen::VectorXd adjoint(const std::vector<Eigen::MatrixXd>& y) const;

 private:
  int L_;
  int D_;
  std::vector<double> radii_;
  std::vector<Eigen::MatrixXd> G_;
};

std::vector<Eigen::MatrixXd> eval_B(const DensityMap& density, const std::vector<double>& radii, int L);
std::vector<Eigen::MatrixXd> analytic_E(const DensityMap& density, const std::vector<double>& radii, int L);

Image render_projection(const GaussianMixture& mix, const Rotation& rot, int G);
inline Image render_projection(const DensityMap& d, const Rotation& rot) {
  return render_projection(d.mixture(), rot, d.grid.G);
}
// G^2 x D matrix of the identity-view projection; row i + G*j is pixel (i, j).
Eigen::MatrixXd projection_matrix(const GridSpec& grid);

GridSpec prune_grid(const Image& reference, double threshold, int G, double tau = kDefaultTau);

Volume rasterize(const GaussianMixture& mix, int G);
inline Volume rasterize(const DensityMap& d) { return rasterize(d.mixture(), d.grid.G); }

// Coarse side for an integer factor: (G - 1) / f + 1.
int coarse_size(int G, int factor);
// Resampling between odd sides G and Gc < G; the coarse pixel pitch is
// (G - 1) / (Gc - 1) fine pixels. Linear splatting, mass preserving.
Image downsample_image(const Image& image, int coarse_G);
Volume downsample_volume(const Volume& volume, int coarse_G);
// Fine weights splatted onto the coarse inscribed ball.
DensityMap downsample_density(const DensityMap& fine, int coarse_G, double coarse_tau = kDefaultTau);
// Coarse weights spread with a tent of half-width equal to the pitch over the
// fine grid's centers, mass preserved.
DensityMap upsample_density(const DensityMap& coarse, const GridSpec& fine);

namespace serial {
Volume rasterize(const GaussianMixture& mix, int G);
}

}  // namespace omrsc
