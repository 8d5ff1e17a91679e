#include "omrsc/density.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

namespace omrsc {

namespace {

bool in_ball(const Vec3& p, double radius) { return p.squaredNorm() <= radius * radius + 1e-9; }

std::tuple<int, int, int> key_of(const Vec3& p) {
  return {static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())),
          static_cast<int>(std::lround(p.z()))};
}

void check_odd(int G, const char* what) {
  if (G < 1 || G % 2 == 0) throw SizeError(std::string(what) + ": grid side must be odd and positive, got " + std::to_string(G));
}

// Per-center coefficients e^{-(r-|mu|)^2/2tau^2} tau^-3 s_l(r|mu|/tau^2), l = 0..L.
void radial_factors(int L, double r, double rho, double tau, std::vector<double>& sl) {
  const double t2 = tau * tau;
  scaled_sph_bessel_i_all(L, r * rho / t2, sl);
  const double e = std::exp(-(r - rho) * (r - rho) / (2.0 * t2)) / (t2 * tau);
  for (double& v : sl) v *= e;
}

}  // namespace

void validate(const GridSpec& grid) {
  check_odd(grid.G, "GridSpec");
  if (!(grid.tau > 0.0)) throw SizeError("GridSpec: tau must be positive");
  std::map<std::tuple<int, int, int>, int> seen;
  for (const Vec3& c : grid.centers) {
    if (!in_ball(c, grid.half())) throw SizeError("GridSpec: center outside inscribed ball");
    if (!seen.emplace(key_of(c), 0).second) throw SizeError("GridSpec: duplicate center");
  }
}

GridSpec full_ball(int G, double tau) {
  check_odd(G, "full_ball");
  GridSpec g;
  g.G = G;
  g.tau = tau;
  const int c = (G - 1) / 2;
  for (int z = -c; z <= c; ++z)
    for (int y = -c; y <= c; ++y)
      for (int x = -c; x <= c; ++x) {
        Vec3 p(x, y, z);
        if (in_ball(p, c)) g.centers.push_back(p);
      }
  return g;
}

GaussianMixture GaussianMixture::rotated(const Rotation& r) const {
  GaussianMixture out = *this;
  for (Vec3& c : out.centers) c = r.apply(c);
  return out;
}

GaussianMixture GaussianMixture::mirrored_z() const {
  GaussianMixture out = *this;
  for (Vec3& c : out.centers) c.z() = -c.z();
  return out;
}

void validate(const DensityMap& density, double tol) {
  validate(density.grid);
  if (density.weights.size() != static_cast<Eigen::Index>(density.grid.size()))
    throw SizeError("DensityMap: weight count does not match grid");
  if (!(density.total_mass > 0.0)) throw SizeError("DensityMap: total mass must be positive");
  if (density.weights.minCoeff() < -tol * density.total_mass) throw SizeError("DensityMap: negative weight");
  if (std::abs(density.weights.sum() - density.total_mass) > tol * density.total_mass)
    throw SizeError("DensityMap: weights do not sum to total mass");
}

DensityMap random_walk_density(int steps, int G, std::uint64_t seed, double mass, double tau) {
  if (steps < 1) throw SizeError("random_walk_density: steps must be >= 1");
  check_odd(G, "random_walk_density");
  Rng rng(seed);
  std::vector<Vec3> pts{Vec3::Zero()};
  for (int s = 1; s < steps; ++s) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    pts.push_back(pts.back() + d.normalized());
  }
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= double(pts.size());
  double rmax = 0.0;
  for (Vec3& p : pts) {
    p -= mean;
    rmax = std::max(rmax, p.norm());
  }
  const double target = std::max(0.0, 0.5 * (G - 1) - 3.0 * tau);
  const double scale = rmax > 0.0 ? target / rmax : 0.0;

  std::map<std::tuple<int, int, int>, double> merged;
  for (const Vec3& p : pts) merged[key_of(p * scale)] += 1.0;

  DensityMap d;
  d.grid.G = G;
  d.grid.tau = tau;
  d.total_mass = mass;
  d.weights.resize(static_cast<Eigen::Index>(merged.size()));
  Eigen::Index k = 0;
  for (const auto& [key, count] : merged) {
    d.grid.centers.emplace_back(std::get<0>(key), std::get<1>(key), std::get<2>(key));
    d.weights[k++] = count * mass / double(pts.size());
  }
  return d;
}

double bump_value(const Vec3& r, const Vec3& mu, double tau) {
  const double norm = std::pow(2.0 * kPi, -1.5) / (tau * tau * tau);
  return norm * std::exp(-(r - mu).squaredNorm() / (2.0 * tau * tau));
}

double bump_sh_coeff(int l, int m, double r, const Vec3& mu, double tau) {
  if (l < 0 || m < -l || m > l) throw DomainError("bump_sh_coeff: order out of range");
  if (r < 0.0) throw DomainError("bump_sh_coeff: negative radius");
  std::vector<double> sl, y;
  radial_factors(l, r, mu.norm(), tau, sl);
  real_sph_harm_all(l, mu, y);
  return sl[l] * y[sh_index(l, m)];
}

Eigen::VectorXd radial_vector(double r, const GridSpec& grid) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(grid.size()));
  std::vector<double> sl;
  for (std::size_t d = 0; d < grid.size(); ++d) {
    radial_factors(0, r, grid.centers[d].norm(), grid.tau, sl);
    g[static_cast<Eigen::Index>(d)] = r == 0.0 ? bump_value(Vec3::Zero(), grid.centers[d], grid.tau) : r * r * sl[0];
  }
  return g;
}

Eigen::MatrixXd radial_matrix(const std::vector<double>& radii, const GridSpec& grid) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(radii.size()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < radii.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = radial_vector(radii[i], grid).transpose();
  return A;
}

Eigen::VectorXd analytic_radial(const DensityMap& density, const std::vector<double>& radii) {
  return radial_matrix(radii, density.grid) * density.weights;
}

ShOperator::ShOperator(const GridSpec& grid, const std::vector<double>& radii, int L)
    : L_(L), D_(static_cast<int>(grid.size())), radii_(radii) {
  if (L < 0) throw DomainError("ShOperator: negative degree cutoff");
  const int V = static_cast<int>(radii.size());
  G_.resize(L + 1);
  for (int l = 0; l <= L; ++l) G_[l].resize(V * (2 * l + 1), D_);
#pragma omp parallel for schedule(static)
  for (int d = 0; d < D_; ++d) {
    std::vector<double> sl, y;
    const Vec3& mu = grid.centers[d];
    real_sph_harm_all(L, mu, y);
    for (int i = 0; i < V; ++i) {
      radial_factors(L, radii[i], mu.norm(), grid.tau, sl);
      for (int l = 0; l <= L; ++l)
        for (int c = 0; c <= 2 * l; ++c) G_[l](i * (2 * l + 1) + c, d) = sl[l] * y[sh_index(l, l - c)];
    }
  }
}

std::vector<Eigen::MatrixXd> ShOperator::apply(const Eigen::VectorXd& w) const {
  if (w.size() != D_) throw SizeError("ShOperator::apply: weight length mismatch");
  std::vector<Eigen::MatrixXd> out(L_ + 1);
  for (int l = 0; l <= L_; ++l) {
    const Eigen::VectorXd flat = G_[l] * w;
    out[l] = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), V(), 2 * l + 1);
  }
  return out;
}

Eigen::VectorXd ShOperator::adjoint(const std::vector<Eigen::MatrixXd>& y) const {
  if (static_cast<int>(y.size()) != L_ + 1) throw SizeError("ShOperator::adjoint: degree count mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(D_);
  for (int l = 0; l <= L_; ++l) {
    if (y[l].rows() != V() || y[l].cols() != 2 * l + 1) throw SizeError("ShOperator::adjoint: block shape mismatch");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = y[l];
    out += G_[l].transpose() * Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
  }
  return out;
}

std::vector<Eigen::MatrixXd> eval_B(const DensityMap& density, const std::vector<double>& radii, int L) {
  return ShOperator(density.grid, radii, L).apply(density.weights);
}

std::vector<Eigen::MatrixXd> analytic_E(const DensityMap& density, const std::vector<double>& radii, int L) {
  auto B = eval_B(density, radii, L);
  std::vector<Eigen::MatrixXd> E(L + 1);
  for (int l = 0; l <= L; ++l) E[l] = B[l] * B[l].transpose();
  return E;
}

Image render_projection(const GaussianMixture& mix, const Rotation& rot, int G) {
  check_odd(G, "render_projection");
  Image img = Image::Zero(G, G);
  const double c = 0.5 * (G - 1);
  const double t2 = mix.tau * mix.tau;
  const double norm = 1.0 / (2.0 * kPi * t2);
  const double reach = kSupport * mix.tau;
  for (std::size_t d = 0; d < mix.centers.size(); ++d) {
    const double w = mix.weights[static_cast<Eigen::Index>(d)];
    if (w == 0.0) continue;
    const Vec3 p = rot.apply(mix.centers[d]);
    const int i0 = std::max(0, static_cast<int>(std::ceil(p.x() + c - reach)));
    const int i1 = std::min(G - 1, static_cast<int>(std::floor(p.x() + c + reach)));
    const int j0 = std::max(0, static_cast<int>(std::ceil(p.y() + c - reach)));
    const int j1 = std::min(G - 1, static_cast<int>(std::floor(p.y() + c + reach)));
    for (int j = j0; j <= j1; ++j) {
      const double dy = j - c - p.y();
      for (int i = i0; i <= i1; ++i) {
        const double dx = i - c - p.x();
        const double r2 = dx * dx + dy * dy;
        if (r2 > reach * reach) continue;
        img(i, j) += w * norm * std::exp(-r2 / (2.0 * t2));
      }
    }
  }
  return img;
}

Eigen::MatrixXd projection_matrix(const GridSpec& grid) {
  const int G = grid.G;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(G * G, static_cast<Eigen::Index>(grid.size()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index d = 0; d < P.cols(); ++d) {
    GaussianMixture one{{grid.centers[d]}, Eigen::VectorXd::Ones(1), grid.tau};
    const Image img = render_projection(one, Rotation(), G);
    P.col(d) = Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
  }
  return P;
}

GridSpec prune_grid(const Image& reference, double threshold, int G, double tau) {
  check_odd(G, "prune_grid");
  if (reference.rows() != G || reference.cols() != G) throw SizeError("prune_grid: reference is not G x G");
  GridSpec ball = full_ball(G, tau);
  GridSpec out;
  out.G = G;
  out.tau = tau;
  const int c = (G - 1) / 2;
  for (const Vec3& p : ball.centers) {
    const int i = static_cast<int>(p.x()) + c, j = static_cast<int>(p.y()) + c;
    if (reference(i, j) > threshold) out.centers.push_back(p);
  }
  if (out.centers.empty()) throw EmptyGridError("prune_grid: no grid point exceeds the threshold");
  return out;
}

namespace {

void rasterize_slab(const GaussianMixture& mix, int G, int k0, int k1, Volume& vol) {
  const double c = 0.5 * (G - 1);
  const double t2 = mix.tau * mix.tau;
  const double norm = std::pow(2.0 * kPi, -1.5) / (t2 * mix.tau);
  const double reach = kSupport * mix.tau;
  for (std::size_t d = 0; d < mix.centers.size(); ++d) {
    const double w = mix.weights[static_cast<Eigen::Index>(d)];
    if (w == 0.0) continue;
    const Vec3& p = mix.centers[d];
    const int lo[3] = {std::max(0, int(std::ceil(p.x() + c - reach))), std::max(0, int(std::ceil(p.y() + c - reach))),
                       std::max(k0, int(std::ceil(p.z() + c - reach)))};
    const int hi[3] = {std::min(G - 1, int(std::floor(p.x() + c + reach))),
                       std::min(G - 1, int(std::floor(p.y() + c + reach))),
                       std::min(k1 - 1, int(std::floor(p.z() + c + reach)))};
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const double r2 = (Vec3(i - c, j - c, k - c) - p).squaredNorm();
          if (r2 > reach * reach) continue;
          vol.at(i, j, k) += w * norm * std::exp(-r2 / (2.0 * t2));
        }
  }
}

}  // namespace

Volume rasterize(const GaussianMixture& mix, int G) {
  check_odd(G, "rasterize");
  Volume vol(G);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < G; ++k) rasterize_slab(mix, G, k, k + 1, vol);
  return vol;
}

namespace serial {
Volume rasterize(const GaussianMixture& mix, int G) {
  check_odd(G, "rasterize");
  Volume vol(G);
  rasterize_slab(mix, G, 0, G, vol);
  return vol;
}
}  // namespace serial

int coarse_size(int G, int factor) {
  check_odd(G, "coarse_size");
  if (factor < 1 || (G - 1) % factor != 0)
    throw SizeError("coarse_size: factor " + std::to_string(factor) + " does not divide G - 1 = " + std::to_string(G - 1));
  const int g = (G - 1) / factor + 1;
  if (g % 2 == 0) throw SizeError("coarse_size: factor gives an even coarse side");
  return g;
}

namespace {

double pitch(int G, int coarse_G) {
  check_odd(G, "resample");
  check_odd(coarse_G, "resample");
  if (coarse_G > G || coarse_G < 3) throw SizeError("resample: coarse side must be in [3, G]");
  return double(G - 1) / double(coarse_G - 1);
}

// Linear splat of coordinate t (coarse units, centered) onto index pairs.
void splat1(double t, int cc, int& i0, double& a0, int& i1, double& a1) {
  const double f = std::floor(t);
  i0 = static_cast<int>(f) + cc;
  a1 = t - f;
  a0 = 1.0 - a1;
  i1 = i0 + 1;
  if (a1 < 1e-12) {
    a1 = 0.0;
    i1 = i0;
  }
}

}  // namespace

Image downsample_image(const Image& image, int coarse_G) {
  if (image.rows() != image.cols()) throw SizeError("downsample_image: image not square");
  const int G = static_cast<int>(image.rows());
  const double s = pitch(G, coarse_G);
  const int cf = (G - 1) / 2, cc = (coarse_G - 1) / 2;
  Image out = Image::Zero(coarse_G, coarse_G);
  for (int j = 0; j < G; ++j) {
    int j0, j1;
    double b0, b1;
    splat1((j - cf) / s, cc, j0, b0, j1, b1);
    for (int i = 0; i < G; ++i) {
      int i0, i1;
      double a0, a1;
      splat1((i - cf) / s, cc, i0, a0, i1, a1);
      const double v = image(i, j);
      out(i0, j0) += a0 * b0 * v;
      if (a1 > 0.0) out(i1, j0) += a1 * b0 * v;
      if (b1 > 0.0) out(i0, j1) += a0 * b1 * v;
      if (a1 > 0.0 && b1 > 0.0) out(i1, j1) += a1 * b1 * v;
    }
  }
  return out;
}

Volume downsample_volume(const Volume& volume, int coarse_G) {
  const int G = volume.G;
  const double s = pitch(G, coarse_G);
  const int cf = (G - 1) / 2, cc = (coarse_G - 1) / 2;
  Volume out(coarse_G, volume.voxel_size * s);
  for (int k = 0; k < G; ++k) {
    int k_idx[2];
    double k_w[2];
    splat1((k - cf) / s, cc, k_idx[0], k_w[0], k_idx[1], k_w[1]);
    for (int j = 0; j < G; ++j) {
      int j_idx[2];
      double j_w[2];
      splat1((j - cf) / s, cc, j_idx[0], j_w[0], j_idx[1], j_w[1]);
      for (int i = 0; i < G; ++i) {
        int i_idx[2];
        double i_w[2];
        splat1((i - cf) / s, cc, i_idx[0], i_w[0], i_idx[1], i_w[1]);
        const double v = volume.at(i, j, k);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e) {
              const double wt = i_w[a] * j_w[b] * k_w[e];
              if (wt > 0.0) out.at(i_idx[a], j_idx[b], k_idx[e]) += wt * v;
            }
      }
    }
  }
  return out;
}

DensityMap downsample_density(const DensityMap& fine, int coarse_G, double coarse_tau) {
  const double s = pitch(fine.grid.G, coarse_G);
  GridSpec ball = full_ball(coarse_G, coarse_tau);
  std::map<std::tuple<int, int, int>, std::size_t> index;
  for (std::size_t d = 0; d < ball.size(); ++d) index[key_of(ball.centers[d])] = d;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ball.size()));
  for (std::size_t d = 0; d < fine.grid.size(); ++d) {
    const Vec3 t = fine.grid.centers[d] / s;
    const Vec3 f(std::floor(t.x()), std::floor(t.y()), std::floor(t.z()));
    std::vector<std::pair<std::size_t, double>> hits;
    double total = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int e = 0; e < 2; ++e) {
          const Vec3 corner = f + Vec3(a, b, e);
          const double wt = (1.0 - std::abs(t.x() - corner.x())) * (1.0 - std::abs(t.y() - corner.y())) *
                            (1.0 - std::abs(t.z() - corner.z()));
          if (wt <= 1e-12) continue;
          auto it = index.find(key_of(corner));
          if (it == index.end()) continue;
          hits.emplace_back(it->second, wt);
          total += wt;
        }
    if (hits.empty()) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < ball.size(); ++k)
        if ((ball.centers[k] - t).squaredNorm() < (ball.centers[best] - t).squaredNorm()) best = k;
      hits.emplace_back(best, 1.0);
      total = 1.0;
    }
    for (auto [idx, wt] : hits) w[static_cast<Eigen::Index>(idx)] += fine.weights[static_cast<Eigen::Index>(d)] * wt / total;
  }
  DensityMap out;
  out.grid = std::move(ball);
  out.weights = std::move(w);
  out.total_mass = fine.total_mass;
  return out;
}

DensityMap upsample_density(const DensityMap& coarse, const GridSpec& fine) {
  const double s = pitch(fine.G, coarse.grid.G);
  std::map<std::tuple<int, int, int>, std::size_t> index;
  for (std::size_t d = 0; d < fine.size(); ++d) index[key_of(fine.centers[d])] = d;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fine.size()));
  const int reach = static_cast<int>(std::ceil(s));
  for (std::size_t d = 0; d < coarse.grid.size(); ++d) {
    const double wd = coarse.weights[static_cast<Eigen::Index>(d)];
    if (wd == 0.0) continue;
    const Vec3 p = coarse.grid.centers[d] * s;
    const Vec3 base(std::round(p.x()), std::round(p.y()), std::round(p.z()));
    std::vector<std::pair<std::size_t, double>> hits;
    double total = 0.0;
    for (int z = -reach; z <= reach; ++z)
      for (int y = -reach; y <= reach; ++y)
        for (int x = -reach; x <= reach; ++x) {
          const Vec3 q = base + Vec3(x, y, z);
          const Vec3 dq = (q - p).cwiseAbs() / s;
          if (dq.maxCoeff() >= 1.0) continue;
          auto it = index.find(key_of(q));
          if (it == index.end()) continue;
          const double wt = (1.0 - dq.x()) * (1.0 - dq.y()) * (1.0 - dq.z());
          hits.emplace_back(it->second, wt);
          total += wt;
        }
    for (auto [idx, wt] : hits) w[static_cast<Eigen::Index>(idx)] += wd * wt / total;
  }
  const double sum = w.sum();
  if (!(sum > 0.0)) throw EmptyGridError("upsample_density: no coarse mass lands on the fine grid");
  w *= coarse.total_mass / sum;
  DensityMap out;
  out.grid = fine;
  out.weights = std::move(w);
  out.total_mass = coarse.total_mass;
  return out;
}

}  // namespace omrsc
