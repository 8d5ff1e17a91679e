#include "omrsc/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace omrsc {

namespace {

using cd = std::complex<double>;

// J_0..J_N at x by Miller's downward recurrence, normalized with
// J_0 + 2 sum J_2k = 1.
void cyl_bessel_j_all(int N, double x, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(N + 1), 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return;
  }
  const int start = 2 * ((N + 30 + static_cast<int>(x)) / 2 + 1);
  std::vector<double> v(static_cast<std::size_t>(start + 2), 0.0);
  v[start] = 1e-300;
  for (int n = start; n >= 1; --n) {
    v[n - 1] = 2.0 * n / x * v[n] - v[n + 1];
    if (std::abs(v[n - 1]) > 1e250)
      for (int k = n - 1; k <= start; ++k) v[k] *= 1e-250;
  }
  double norm = v[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * v[k];
  for (int n = 0; n <= N; ++n) out[n] = v[n] / norm;
}

void check_square(const Image& image, int G, const char* what) {
  if (image.rows() != G || image.cols() != G) throw SizeError(std::string(what) + ": image is not G x G");
}

void symmetrize(Eigen::MatrixXcd& m) {
  const Eigen::MatrixXcd h = m.adjoint();
  m = 0.5 * (m + h);
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::fourier ? "fourier" : "spatial"; }

Domain domain_from_string(const std::string& s) {
  if (s == "fourier") return Domain::fourier;
  if (s == "spatial") return Domain::spatial;
  throw std::invalid_argument("unknown domain '" + s + "' (expected fourier or spatial)");
}

FeatureGrids make_grids(const FeatureParams& p, int G) {
  if (G < 3 || G % 2 == 0) throw SizeError("make_grids: grid side must be odd and >= 3");
  if (p.L < 0 || p.U < 2 || p.V < 1 || p.Phi < 1 || !(p.k_max > 0.0)) throw DomainError("make_grids: invalid feature parameters");
  FeatureGrids g;
  g.k = uniform_trapezoid(p.U, 0.0, p.k_max);
  g.r = gauss_legendre(p.V, 0.0, 0.5 * (G - 1));
  g.phi = gauss_legendre(p.Phi, 0.0, 2.0 * kPi);
  g.psi = gauss_legendre(p.Psi > 0 ? p.Psi : p.V, 0.0, kPi);
  g.L = p.L;
  g.G = G;
  return g;
}

PolarFourierSlice polar_fourier(const Image& image, const std::vector<double>& radii, const std::vector<double>& angles) {
  if (image.rows() != image.cols()) throw SizeError("polar_fourier: image is not square");
  const int G = static_cast<int>(image.rows());
  const double c = 0.5 * (G - 1);
  PolarFourierSlice out{Eigen::MatrixXcd(radii.size(), angles.size()), radii, angles};
  const int na = static_cast<int>(angles.size());
#pragma omp parallel for schedule(static)
  for (int a = 0; a < na; ++a) {
    Eigen::VectorXcd ex(G), ey(G);
    for (std::size_t u = 0; u < radii.size(); ++u) {
      const double kx = radii[u] * std::cos(angles[a]), ky = radii[u] * std::sin(angles[a]);
      for (int i = 0; i < G; ++i) {
        ex[i] = std::polar(1.0, -kx * (i - c));
        ey[i] = std::polar(1.0, -ky * (i - c));
      }
      out.values(static_cast<Eigen::Index>(u), a) = ex.transpose() * image.cast<cd>() * ey;
    }
  }
  return out;
}

namespace serial {
PolarFourierSlice polar_fourier(const Image& image, const std::vector<double>& radii, const std::vector<double>& angles) {
  if (image.rows() != image.cols()) throw SizeError("polar_fourier: image is not square");
  const int G = static_cast<int>(image.rows());
  const double c = 0.5 * (G - 1);
  PolarFourierSlice out{Eigen::MatrixXcd::Zero(radii.size(), angles.size()), radii, angles};
  for (std::size_t u = 0; u < radii.size(); ++u)
    for (std::size_t a = 0; a < angles.size(); ++a) {
      cd sum = 0.0;
      for (int j = 0; j < G; ++j)
        for (int i = 0; i < G; ++i) {
          const double phase = radii[u] * ((i - c) * std::cos(angles[a]) + (j - c) * std::sin(angles[a]));
          sum += image(i, j) * std::polar(1.0, -phase);
        }
      out.values(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(a)) = sum;
    }
  return out;
}
}  // namespace serial

MomentAccumulator::MomentAccumulator(const FeatureGrids& grids) : grids_(grids) {
  const int G = grids.G;
  const int U = static_cast<int>(grids.k.size());
  const double c = 0.5 * (G - 1);
  const double rho_max = c * std::sqrt(2.0);
  const int nh = static_cast<int>(std::ceil(grids.k.hi * rho_max)) + 24;
  kernel_re_.resize(nh * U, G * G);
  kernel_im_.resize(nh * U, G * G);
  // c_n(k) = sum_p s_p (-i)^n J_n(k rho_p) e^{-i n alpha_p}.
#pragma omp parallel for schedule(static)
  for (int p = 0; p < G * G; ++p) {
    const double x = (p % G) - c, y = (p / G) - c;
    const double rho = std::hypot(x, y), alpha = std::atan2(y, x);
    std::vector<double> J;
    for (int u = 0; u < U; ++u) {
      cyl_bessel_j_all(nh - 1, grids.k.nodes[u] * rho, J);
      for (int n = 0; n < nh; ++n) {
        const cd v = std::pow(cd(0.0, -1.0), n) * J[n] * std::polar(1.0, -n * alpha);
        kernel_re_(n * U + u, p) = v.real();
        kernel_im_(n * U + u, p) = v.imag();
      }
    }
  }
  sums_.H.assign(nh, Eigen::MatrixXcd::Zero(U, U));
  sums_.m = Eigen::VectorXcd::Zero(U);
}

void MomentAccumulator::add_block(const Eigen::MatrixXd& stack, Sums& out) const {
  const int U = static_cast<int>(grids_.k.size());
  const Eigen::MatrixXd re = kernel_re_ * stack, im = kernel_im_ * stack;
  for (int n = 0; n < harmonics(); ++n) {
    Eigen::MatrixXcd cn(U, stack.cols());
    cn.real() = re.middleRows(n * U, U);
    cn.imag() = im.middleRows(n * U, U);
    out.H[n].noalias() += cn * cn.adjoint();
    if (n == 0) out.m += cn.rowwise().sum();
  }
  out.count += stack.cols();
}

MomentAccumulator::Sums MomentAccumulator::zero_sums() const {
  const auto U = static_cast<Eigen::Index>(grids_.k.size());
  return {std::vector<Eigen::MatrixXcd>(sums_.H.size(), Eigen::MatrixXcd::Zero(U, U)), Eigen::VectorXcd::Zero(U), 0};
}

void MomentAccumulator::absorb(const Sums& other) {
  for (std::size_t n = 0; n < sums_.H.size(); ++n) sums_.H[n] += other.H[n];
  sums_.m += other.m;
  sums_.count += other.count;
}

void MomentAccumulator::add(const Image& image) {
  check_square(image, grids_.G, "MomentAccumulator::add");
  add_block(Eigen::Map<const Eigen::MatrixXd>(image.data(), image.size(), 1), sums_);
}

void MomentAccumulator::add(const std::vector<Image>& images) {
  const int G = grids_.G;
  for (const Image& im : images) check_square(im, G, "MomentAccumulator::add");
  const int batch = 64;
  const int nblocks = (static_cast<int>(images.size()) + batch - 1) / batch;
  // Blocks are reduced in index order, so results do not depend on the thread count.
  const int chunk = 8;
  for (int b0 = 0; b0 < nblocks; b0 += chunk) {
    const int b1 = std::min(nblocks, b0 + chunk);
    std::vector<Sums> partial(b1 - b0, zero_sums());
#pragma omp parallel for schedule(dynamic)
    for (int b = b0; b < b1; ++b) {
      const int n0 = b * batch, n1 = std::min<int>(static_cast<int>(images.size()), n0 + batch);
      Eigen::MatrixXd stack(G * G, n1 - n0);
      for (int n = n0; n < n1; ++n) stack.col(n - n0) = Eigen::Map<const Eigen::VectorXd>(images[n].data(), G * G);
      add_block(stack, partial[b - b0]);
    }
    for (const auto& part : partial) absorb(part);
  }
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.sums_.H.size() != sums_.H.size() || other.grids_.G != grids_.G)
    throw SizeError("MomentAccumulator::merge: grid mismatch");
  absorb(other.sums_);
}

Eigen::VectorXcd MomentAccumulator::first_moment() const {
  if (sums_.count == 0) throw SizeError("first_moment: no images accumulated");
  return sums_.m / double(sums_.count);
}

AutocorrTensor MomentAccumulator::autocorr() const {
  if (sums_.count == 0) throw SizeError("autocorr: no images accumulated");
  AutocorrTensor t;
  t.psi = grids_.psi.nodes;
  for (double psi : t.psi) {
    Eigen::MatrixXcd c = sums_.H[0];
    for (int n = 1; n < harmonics(); ++n) {
      const cd e = std::polar(1.0, -n * psi);
      c += sums_.H[n] * e + sums_.H[n].conjugate() * std::conj(e);
    }
    c /= double(sums_.count);
    symmetrize(c);
    t.slices.push_back(std::move(c));
  }
  return t;
}

Eigen::VectorXcd first_moment(const std::vector<Image>& images, const FeatureGrids& grids) {
  MomentAccumulator acc(grids);
  acc.add(images);
  return acc.first_moment();
}

AutocorrTensor empirical_autocorr(const std::vector<Image>& images, const FeatureGrids& grids) {
  MomentAccumulator acc(grids);
  acc.add(images);
  return acc.autocorr();
}

namespace serial {

Eigen::VectorXcd first_moment(const std::vector<Image>& images, const FeatureGrids& grids) {
  if (images.empty()) throw SizeError("first_moment: no images");
  const std::size_t U = grids.k.size();
  Eigen::VectorXcd m = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(U));
  for (const Image& im : images) {
    const auto s = omrsc::serial::polar_fourier(im, grids.k.nodes, grids.phi.nodes);
    for (std::size_t a = 0; a < grids.phi.size(); ++a) m += s.values.col(static_cast<Eigen::Index>(a)) * (grids.phi.weights[a] / (2.0 * kPi));
  }
  return m / double(images.size());
}

AutocorrTensor empirical_autocorr(const std::vector<Image>& images, const FeatureGrids& grids) {
  if (images.empty()) throw SizeError("empirical_autocorr: no images");
  const auto U = static_cast<Eigen::Index>(grids.k.size());
  AutocorrTensor t;
  t.psi = grids.psi.nodes;
  t.slices.assign(t.psi.size(), Eigen::MatrixXcd::Zero(U, U));
  for (const Image& im : images) {
    const auto base = omrsc::polar_fourier(im, grids.k.nodes, grids.phi.nodes);
    for (std::size_t j = 0; j < t.psi.size(); ++j) {
      std::vector<double> shifted(grids.phi.nodes);
      for (double& a : shifted) a += t.psi[j];
      const auto s = omrsc::polar_fourier(im, grids.k.nodes, shifted);
      for (std::size_t a = 0; a < grids.phi.size(); ++a)
        t.slices[j] += (grids.phi.weights[a] / (2.0 * kPi)) * base.values.col(static_cast<Eigen::Index>(a)) *
                       s.values.col(static_cast<Eigen::Index>(a)).adjoint();
    }
  }
  for (auto& c : t.slices) {
    c /= double(images.size());
    symmetrize(c);
  }
  return t;
}

AutocorrTensor noise_bias(const FeatureGrids& grids, double sigma) {
  const int G = grids.G;
  const double c = 0.5 * (G - 1);
  const auto U = static_cast<Eigen::Index>(grids.k.size());
  AutocorrTensor t;
  t.psi = grids.psi.nodes;
  for (double psi : t.psi) {
    Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(U, U);
    for (Eigen::Index a = 0; a < U; ++a)
      for (Eigen::Index b = 0; b < U; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < grids.phi.size(); ++i) {
          const double phi = grids.phi.nodes[i];
          const double qx = grids.k.nodes[a] * std::cos(phi) - grids.k.nodes[b] * std::cos(phi + psi);
          const double qy = grids.k.nodes[a] * std::sin(phi) - grids.k.nodes[b] * std::sin(phi + psi);
          double inner = 0.0;
          for (int j = 0; j < G; ++j)
            for (int k = 0; k < G; ++k) inner += std::cos(qx * (k - c) + qy * (j - c));
          sum += grids.phi.weights[i] / (2.0 * kPi) * inner;
        }
        z(a, b) = sigma * sigma * sum;
      }
    t.slices.push_back(std::move(z));
  }
  return t;
}

}  // namespace serial

AutocorrTensor noise_bias(const FeatureGrids& grids, double sigma) {
  const int G = grids.G;
  const int c = (G - 1) / 2;
  std::map<int, int> ring;  // squared pixel radius -> multiplicity
  for (int y = -c; y <= c; ++y)
    for (int x = -c; x <= c; ++x) ++ring[x * x + y * y];
  const auto U = static_cast<Eigen::Index>(grids.k.size());
  AutocorrTensor t;
  t.psi = grids.psi.nodes;
  t.slices.assign(t.psi.size(), Eigen::MatrixXcd::Zero(U, U));
  const int npsi = static_cast<int>(t.psi.size());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < npsi; ++j) {
    for (Eigen::Index a = 0; a < U; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) {
        const double k1 = grids.k.nodes[a], k2 = grids.k.nodes[b];
        const double q = std::sqrt(std::max(0.0, k1 * k1 + k2 * k2 - 2.0 * k1 * k2 * std::cos(t.psi[j])));
        double sum = 0.0;
        for (auto [r2, mult] : ring) sum += mult * std::cyl_bessel_j(0.0, q * std::sqrt(double(r2)));
        t.slices[j](a, b) = t.slices[j](b, a) = sigma * sigma * sum;
      }
  }
  return t;
}

AutocorrTensor noise_bias_from_basis(const FeatureGrids& grids, double sigma, const std::vector<Image>& basis) {
  MomentAccumulator acc(grids);
  acc.add(basis);
  AutocorrTensor t = acc.autocorr();
  for (auto& s : t.slices) s *= sigma * sigma * double(acc.count());
  return t;
}

AutocorrTensor debias(const AutocorrTensor& c, const AutocorrTensor& bias) {
  if (c.slices.size() != bias.slices.size()) throw SizeError("debias: psi grids differ");
  AutocorrTensor out = c;
  for (std::size_t j = 0; j < c.slices.size(); ++j) {
    if (c.slices[j].rows() != bias.slices[j].rows()) throw SizeError("debias: k grids differ");
    out.slices[j] -= bias.slices[j];
  }
  return out;
}

Eigen::MatrixXd degree_project(const AutocorrTensor& c, int l, const QuadratureRule& psi) {
  if (c.slices.size() != psi.size()) throw SizeError("degree_project: tensor does not match psi rule");
  if (l < 0) throw DomainError("degree_project: negative degree");
  const auto U = c.slices.front().rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(U, U);
  for (std::size_t j = 0; j < psi.size(); ++j)
    out += (psi.weights[j] * legendre(l, std::cos(psi.nodes[j])) * std::sin(psi.nodes[j])) * c.slices[j].real();
  out *= 2.0 * kPi * (2.0 * l + 1.0);
  const Eigen::MatrixXd t = out.transpose();
  return 0.5 * (out + t);
}

void radial_from_moment(const Eigen::VectorXcd& M, const QuadratureRule& k, const QuadratureRule& r,
                        Eigen::VectorXd& W, double& total_mass) {
  if (static_cast<std::size_t>(M.size()) != k.size()) throw SizeError("radial_from_moment: M does not match k grid");
  W.resize(static_cast<Eigen::Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j)
      s += k.weights[j] * k.nodes[j] * M[static_cast<Eigen::Index>(j)].real() * std::sin(k.nodes[j] * r.nodes[i]);
    W[static_cast<Eigen::Index>(i)] = 2.0 * r.nodes[i] / kPi * s;
  }
  total_mass = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) total_mass += r.weights[i] * W[static_cast<Eigen::Index>(i)];
}

Eigen::MatrixXd bessel_operator(int l, const QuadratureRule& r, const QuadratureRule& k) {
  Eigen::MatrixXd Q(r.size(), k.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j)
      Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          4.0 * kPi * spherical_bessel_j(l, r.nodes[i] * k.nodes[j]) * r.nodes[i] * r.nodes[i] * r.weights[i];
  return Q;
}

BesselOperator::BesselOperator(const QuadratureRule& r, const QuadratureRule& k, int L) {
  const auto V = static_cast<Eigen::Index>(r.size()), U = static_cast<Eigen::Index>(k.size());
  Q_.assign(L + 1, Eigen::MatrixXd(V, U));
  K_.assign(L + 1, Eigen::MatrixXd(V, U));
  std::vector<double> j;
  for (Eigen::Index a = 0; a < V; ++a)
    for (Eigen::Index b = 0; b < U; ++b) {
      const double rv = r.nodes[a], kv = k.nodes[b];
      spherical_bessel_j_all(L, rv * kv, j);
      for (int l = 0; l <= L; ++l) {
        Q_[l](a, b) = 4.0 * kPi * j[l] * rv * rv * r.weights[a];
        K_[l](a, b) = j[l] * kv * kv * k.weights[b] / (2.0 * kPi * kPi);
      }
    }
}

Eigen::MatrixXd BesselOperator::to_fourier(const Eigen::MatrixXd& E, int l) const {
  if (l < 0 || l > L()) throw DomainError("to_fourier: degree out of range");
  if (E.rows() != Q_[l].rows() || E.cols() != Q_[l].rows()) throw SizeError("to_fourier: E_l shape does not match the r grid");
  return Q_[l].transpose() * E * Q_[l];
}

Eigen::MatrixXd BesselOperator::to_spatial(const Eigen::MatrixXd& C, int l) const {
  if (l < 0 || l > L()) throw DomainError("to_spatial: degree out of range");
  if (C.rows() != K_[l].cols() || C.cols() != K_[l].cols()) throw SizeError("to_spatial: C_l shape does not match the k grid");
  return K_[l] * C * K_[l].transpose();
}

FeatureGrids FeatureSet::grids() const { return make_grids(params, G); }

namespace {

FeatureSet blank_features(const FeatureParams& params, int G, Domain domain) {
  const FeatureGrids g = make_grids(params, G);
  FeatureSet f;
  f.domain = domain;
  f.params = params;
  f.G = G;
  f.k = g.k.nodes;
  f.k_weights = g.k.weights;
  f.r = g.r.nodes;
  f.r_weights = g.r.weights;
  return f;
}

}  // namespace

FeatureSet extract_features(const Dataset& data, const FeatureParams& params, Domain domain, const AutocorrTensor* bias) {
  if (data.images.empty()) throw SizeError("extract_features: empty dataset");
  FeatureSet f = blank_features(params, data.G(), domain);
  const FeatureGrids g = make_grids(params, data.G());
  MomentAccumulator acc(g);
  acc.add(data.images);
  f.num_images = acc.count();
  f.sigma_used = data.sigma;
  f.M = acc.first_moment();
  radial_from_moment(f.M, g.k, g.r, f.W, f.total_mass);
  AutocorrTensor c = acc.autocorr();
  if (bias) c = debias(c, *bias);
  else if (data.sigma > 0.0) c = debias(c, noise_bias(g, data.sigma));
  const BesselOperator bo(g.r, g.k, params.L);
  for (int l = 0; l <= params.L; ++l) {
    Eigen::MatrixXd cl = degree_project(c, l, g.psi);
    f.C.push_back(domain == Domain::fourier ? cl : bo.to_spatial(cl, l));
  }
  return f;
}

FeatureSet analytic_features(const DensityMap& density, const FeatureParams& params, Domain domain) {
  FeatureSet f = blank_features(params, density.grid.G, domain);
  const FeatureGrids g = make_grids(params, density.grid.G);
  f.W = analytic_radial(density, f.r);
  f.total_mass = density.total_mass;
  f.M = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f.k.size()));
  const double t2 = density.grid.tau * density.grid.tau;
  for (std::size_t j = 0; j < f.k.size(); ++j) {
    double s = 0.0;
    for (std::size_t d = 0; d < density.grid.size(); ++d)
      s += density.weights[static_cast<Eigen::Index>(d)] * spherical_bessel_j(0, f.k[j] * density.grid.centers[d].norm());
    f.M[static_cast<Eigen::Index>(j)] = s * std::exp(-0.5 * f.k[j] * f.k[j] * t2);
  }
  const auto E = analytic_E(density, f.r, params.L);
  const BesselOperator bo(g.r, g.k, params.L);
  for (int l = 0; l <= params.L; ++l) f.C.push_back(domain == Domain::fourier ? bo.to_fourier(E[l], l) : E[l]);
  return f;
}

FeatureSet convert_domain(const FeatureSet& f, Domain target) {
  if (f.domain == target) return f;
  const FeatureGrids g = f.grids();
  const BesselOperator bo(g.r, g.k, f.L());
  FeatureSet out = f;
  out.domain = target;
  for (int l = 0; l <= f.L(); ++l) out.C[l] = target == Domain::fourier ? bo.to_fourier(f.C[l], l) : bo.to_spatial(f.C[l], l);
  return out;
}

}  // namespace omrsc
