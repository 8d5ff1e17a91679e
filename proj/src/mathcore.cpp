#include "omrsc/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace omrsc {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// Normalized associated Legendre values ybar[l][m] (m >= 0) such that
// Y_l0 = ybar, Y_l(+-m) = sqrt2 * ybar * (cos|sin)(m phi).
void normalized_legendre(int L, double c, double s, std::vector<double>& ybar) {
  const int stride = L + 1;
  ybar.assign(static_cast<std::size_t>(stride * stride), 0.0);
  auto at = [&](int l, int m) -> double& { return ybar[l * stride + m]; };
  at(0, 0) = std::sqrt(1.0 / (4.0 * kPi));
  for (int m = 1; m <= L; ++m)
    at(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * at(m - 1, m - 1);
  for (int m = 0; m < L; ++m)
    at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * c * at(m, m);
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      const double l2 = double(l) * l, m2 = double(m) * m;
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m2) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      at(l, m) = a * (c * at(l - 1, m) - b * at(l - 2, m));
    }
  }
}

void sph_bessel_series(int L, double x, std::vector<double>& out) {
  double lead = 1.0;  // x^l / (2l+1)!!
  for (int l = 0; l <= L; ++l) {
    if (l > 0) lead *= x / (2.0 * l + 1.0);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 40; ++k) {
      term *= -0.5 * x * x / (k * (2.0 * l + 2.0 * k + 1.0));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    out[l] = lead * sum;
  }
}

}  // namespace

double legendre(int l, double x) {
  if (l < 0) throw DomainError("legendre: negative degree " + std::to_string(l));
  if (std::abs(x) > 1.0 + 1e-12) throw DomainError("legendre: |x| > 1 (x = " + std::to_string(x) + ")");
  x = std::clamp(x, -1.0, 1.0);
  if (l == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= l; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double real_sph_harm(int l, int m, double theta, double phi) {
  if (l < 0 || m < -l || m > l)
    throw DomainError("real_sph_harm: order m = " + std::to_string(m) + " out of range for l = " + std::to_string(l));
  std::vector<double> ybar;
  normalized_legendre(l, std::cos(theta), std::sin(theta), ybar);
  const double p = ybar[l * (l + 1) + std::abs(m)];
  if (m == 0) return p;
  if (m > 0) return kSqrt2 * p * std::cos(m * phi);
  return kSqrt2 * p * std::sin(-m * phi);
}

void real_sph_harm_all(int L, const Vec3& u, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>((L + 1) * (L + 1)), 0.0);
  const double n = u.norm();
  double c = 1.0, s = 0.0, cp = 1.0, sp = 0.0;
  if (n > 0.0) {
    c = u.z() / n;
    const double rxy = std::hypot(u.x(), u.y());
    s = rxy / n;
    if (rxy > 0.0) {
      cp = u.x() / rxy;
      sp = u.y() / rxy;
    }
  }
  std::vector<double> ybar;
  normalized_legendre(L, c, s, ybar);
  std::vector<double> cm(L + 1), sm(L + 1);
  cm[0] = 1.0;
  sm[0] = 0.0;
  for (int m = 1; m <= L; ++m) {
    cm[m] = cm[m - 1] * cp - sm[m - 1] * sp;
    sm[m] = sm[m - 1] * cp + cm[m - 1] * sp;
  }
  for (int l = 0; l <= L; ++l) {
    out[sh_index(l, 0)] = ybar[l * (L + 1)];
    for (int m = 1; m <= l; ++m) {
      const double p = kSqrt2 * ybar[l * (L + 1) + m];
      out[sh_index(l, m)] = p * cm[m];
      out[sh_index(l, -m)] = p * sm[m];
    }
  }
}

void spherical_bessel_j_all(int L, double x, std::vector<double>& out) {
  if (x < 0.0) throw DomainError("spherical_bessel_j: negative argument");
  out.assign(static_cast<std::size_t>(L + 1), 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return;
  }
  if (x < 1.0) {
    sph_bessel_series(L, x, out);
    return;
  }
  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  if (x >= L) {
    out[0] = j0;
    if (L >= 1) out[1] = j1;
    for (int l = 1; l < L; ++l) out[l + 1] = (2.0 * l + 1.0) / x * out[l] - out[l - 1];
    return;
  }
  // Miller: downward from well above L, normalized against the larger of j0, j1.
  const int start = L + 20 + static_cast<int>(x);
  double up = 0.0, cur = 1e-300;
  for (int l = start; l >= 1; --l) {
    const double down = (2.0 * l + 1.0) / x * cur - up;
    up = cur;
    cur = down;
    if (l - 1 <= L) out[l - 1] = cur;
    if (l <= L) out[l] = up;
    if (std::abs(cur) > 1e250) {
      up *= 1e-250;
      cur *= 1e-250;
      for (int k = l - 1; k <= L; ++k)
        if (k >= 0) out[k] *= 1e-250;
    }
  }
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / out[0] : j1 / out[1];
  for (double& v : out) v *= scale;
}

double spherical_bessel_j(int l, double x) {
  if (l < 0) throw DomainError("spherical_bessel_j: negative order");
  std::vector<double> v;
  spherical_bessel_j_all(l, x, v);
  return v[l];
}

void scaled_sph_bessel_i_all(int L, double x, std::vector<double>& out) {
  if (x < 0.0) throw DomainError("scaled_bessel_i_half: negative argument");
  out.assign(static_cast<std::size_t>(L + 1), 0.0);
  const double norm = std::sqrt(2.0 / kPi);
  if (x == 0.0) {
    out[0] = norm;
    return;
  }
  const double threshold = std::max(40.0, double(L) * L);
  for (int l = 0; l <= L; ++l) {
    double value;
    if (x >= threshold) {
      // Finite closed form for half-integer order.
      const double inv2x = 1.0 / (2.0 * x);
      const double e2 = std::exp(-2.0 * x);
      double ck = 1.0, pw = 1.0, a = 0.0, b = 0.0;
      for (int k = 0; k <= l; ++k) {
        if (k > 0) {
          ck *= double(l + k) * (l - k + 1) / k;
          pw *= inv2x;
        }
        a += ((k % 2) ? -1.0 : 1.0) * ck * pw;
        b += ck * pw;
      }
      value = inv2x * (a + ((l % 2) ? 1.0 : -1.0) * e2 * b);
    } else {
      // Ascending series, with e^{-x} folded into the leading term.
      double logdf = 0.0;
      for (int k = 1; k <= l; ++k) logdf += std::log(2.0 * k + 1.0);
      double term = std::exp(l * std::log(x) - x - logdf);
      double sum = term;
      const double half_x2 = 0.5 * x * x;
      for (int k = 1; k < 100000; ++k) {
        term *= half_x2 / (k * (2.0 * l + 2.0 * k + 1.0));
        sum += term;
        if (term < 1e-17 * sum && k > x) break;
      }
      value = sum;
    }
    out[l] = norm * value;
  }
}

double scaled_bessel_i_half(int l, double x) {
  if (l < 0) throw DomainError("scaled_bessel_i_half: negative order");
  std::vector<double> v;
  scaled_sph_bessel_i_all(l, x, v);
  return std::sqrt(x) * v[l];
}

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw DomainError("gauss_legendre: node count must be positive");
  if (!(lo < hi)) throw DomainError("gauss_legendre: invalid interval");
  QuadratureRule q;
  q.lo = lo;
  q.hi = hi;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = mid - half * x;
    q.nodes[n - 1 - i] = mid + half * x;
    q.weights[i] = q.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = mid;
  return q;
}

QuadratureRule uniform_trapezoid(int n, double lo, double hi) {
  if (n < 2) throw DomainError("uniform_trapezoid: need at least two nodes");
  if (!(lo < hi)) throw DomainError("uniform_trapezoid: invalid interval");
  QuadratureRule q;
  q.lo = lo;
  q.hi = hi;
  const double h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(lo + h * i);
    q.weights.push_back((i == 0 || i == n - 1) ? 0.5 * h : h);
  }
  return q;
}

Rotation::Rotation(const Mat3& m) : m_(m) {}

Rotation Rotation::about_z(double angle) {
  Mat3 m;
  const double c = std::cos(angle), s = std::sin(angle);
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return Rotation(m);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : eng_(splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xd1b54a32d192ed03ULL + 1))) {}

Rotation uniform_rotation(Rng& rng) {
  double q[4], n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : q) {
      v = rng.normal();
      n2 += v * v;
    }
  } while (n2 < 1e-20);
  const double n = std::sqrt(n2);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return Rotation(m);
}

}  // namespace omrsc
