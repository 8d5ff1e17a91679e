#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace omrsc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double lo = 0.0;
  double hi = 0.0;

  std::size_t size() const { return nodes.size(); }
};

// P_l(x) by three-term recurrence.
double legendre(int l, double x);

// Real spherical harmonic, orthonormal on the sphere. m > 0 uses cos(m phi),
// m < 0 uses sin(|m| phi); no Condon-Shortley sign.
double real_sph_harm(int l, int m, double theta, double phi);

// All Y_lm for l <= L at unit direction u, packed as out[l*l + (l - m)].
void real_sph_harm_all(int L, const Vec3& u, std::vector<double>& out);
inline int sh_index(int l, int m) { return l * l + (l - m); }

double spherical_bessel_j(int l, double x);
// j_0..j_L at x.
void spherical_bessel_j_all(int L, double x, std::vector<double>& out);

// e^{-x} I_{l+1/2}(x).
double scaled_bessel_i_half(int l, double x);
// sqrt(2/pi) e^{-x} i_l(x) = x^{-1/2} * scaled_bessel_i_half(l, x), l = 0..L.
// Finite at x = 0.
void scaled_sph_bessel_i_all(int L, double x, std::vector<double>& out);

QuadratureRule gauss_legendre(int n, double lo, double hi);
// Uniform nodes on [lo, hi] with trapezoid weights.
QuadratureRule uniform_trapezoid(int n, double lo, double hi);

class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vec3 apply(const Vec3& v) const { return m_ * v; }

  static Rotation about_z(double angle);

 private:
  Mat3 m_;
};

// Counter-derived generator: each (seed, stream) pair gives an independent
// mt19937_64 so parallel loops can draw per-item without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::mt19937_64& engine() { return eng_; }
  double normal() { return normal_(eng_); }
  double uniform() { return uniform_(eng_); }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

Rotation uniform_rotation(Rng& rng);

}  // namespace omrsc
