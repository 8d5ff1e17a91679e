#include "omrsc/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace omrsc {

namespace {

using cd = std::complex<double>;

void same_size(const Volume& a, const Volume& b, const char* what) {
  if (a.G != b.G || a.data.size() != b.data.size()) throw SizeError(std::string(what) + ": volume sizes differ");
  if (a.G < 1) throw SizeError(std::string(what) + ": empty volume");
}

// Centered DFT along each axis; output index q maps to frequency q - c.
std::vector<cd> dft3(const Volume& v) {
  const int G = v.G;
  const int c = (G - 1) / 2;
  std::vector<cd> tw(static_cast<std::size_t>(G) * G);
  for (int q = 0; q < G; ++q)
    for (int x = 0; x < G; ++x) tw[q * G + x] = std::polar(1.0, -2.0 * kPi * (q - c) * (x - c) / G);
  std::vector<cd> a(v.data.begin(), v.data.end()), b(a.size());
  auto idx = [G](int i, int j, int k) { return i + std::size_t(G) * (j + std::size_t(G) * k); };
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < G; ++k)
      for (int j = 0; j < G; ++j)
        for (int q = 0; q < G; ++q) {
          cd s = 0.0;
          for (int x = 0; x < G; ++x) {
            const std::size_t src = axis == 0 ? idx(x, j, k) : axis == 1 ? idx(j, x, k) : idx(j, k, x);
            s += tw[q * G + x] * a[src];
          }
          const std::size_t dst = axis == 0 ? idx(q, j, k) : axis == 1 ? idx(j, q, k) : idx(j, k, q);
          b[dst] = s;
        }
    std::swap(a, b);
  }
  return a;
}

}  // namespace

std::string to_string(Handedness h) { return h == Handedness::as_is ? "as-is" : "reflected"; }

FscCurve fsc(const Volume& a, const Volume& b) {
  same_size(a, b, "fsc");
  const int G = a.G;
  const int c = (G - 1) / 2;
  const auto fa = dft3(a), fb = dft3(b);
  std::vector<double> num(c + 1, 0.0), ea(c + 1, 0.0), eb(c + 1, 0.0);
  std::vector<long> count(c + 1, 0);
  for (int k = 0; k < G; ++k)
    for (int j = 0; j < G; ++j)
      for (int i = 0; i < G; ++i) {
        const double r = std::sqrt(double((i - c) * (i - c) + (j - c) * (j - c) + (k - c) * (k - c)));
        const long s = std::lround(r);
        if (s > c) continue;
        const std::size_t p = i + std::size_t(G) * (j + std::size_t(G) * k);
        num[s] += (fa[p] * std::conj(fb[p])).real();
        ea[s] += std::norm(fa[p]);
        eb[s] += std::norm(fb[p]);
        ++count[s];
      }
  FscCurve curve;
  for (int s = 0; s <= c; ++s) {
    const double den = std::sqrt(ea[s] * eb[s]);
    curve.k.push_back(s);
    curve.value.push_back(den > 0.0 ? std::clamp(num[s] / den, -1.0, 1.0) : 0.0);
    curve.voxels.push_back(count[s]);
  }
  return curve;
}

Resolution resolution(const FscCurve& curve, int G, double cutoff, double voxel_size) {
  if (curve.value.empty()) throw std::invalid_argument("resolution: empty FSC curve");
  Resolution r;
  for (std::size_t i = 1; i < curve.value.size(); ++i) {
    if (curve.value[i - 1] >= cutoff && curve.value[i] < cutoff) {
      const double t = (curve.value[i - 1] - cutoff) / (curve.value[i - 1] - curve.value[i]);
      r.k_cross = curve.k[i - 1] + t * (curve.k[i] - curve.k[i - 1]);
      r.crossed = true;
      break;
    }
    if (curve.value[i - 1] < cutoff) {
      r.k_cross = curve.k[i - 1];
      r.crossed = true;
      break;
    }
  }
  if (!r.crossed) r.k_cross = curve.k.back();
  r.value = r.k_cross > 0.0 ? G * voxel_size / r.k_cross : std::numeric_limits<double>::infinity();
  return r;
}

double correlation_coefficient(const Volume& a, const Volume& b) {
  same_size(a, b, "correlation_coefficient");
  const double n = double(a.data.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double x = a.data[i] - ma, y = b.data[i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa == 0.0 || sbb == 0.0) throw std::invalid_argument("correlation_coefficient: zero-variance volume");
  return sab / std::sqrt(saa * sbb);
}

Volume reflect_z(const Volume& v) {
  Volume out(v.G, v.voxel_size);
  for (int k = 0; k < v.G; ++k)
    for (int j = 0; j < v.G; ++j)
      for (int i = 0; i < v.G; ++i) out.at(i, j, v.G - 1 - k) = v.at(i, j, k);
  return out;
}

EvaluationReport evaluate(const Volume& recon, const Volume& truth, double cutoff) {
  EvaluationReport rep;
  rep.G = recon.G;
  rep.voxel_size = recon.voxel_size;
  rep.cutoff = cutoff;
  rep.fsc = fsc(recon, truth);
  rep.resolution = resolution(rep.fsc, recon.G, cutoff, recon.voxel_size);
  rep.correlation = rep.correlation_as_is = correlation_coefficient(recon, truth);
  return rep;
}

EvaluationReport best_handedness(const Volume& recon, const Volume& truth, double cutoff) {
  EvaluationReport as_is = evaluate(recon, truth, cutoff);
  const Volume mirrored = reflect_z(truth);
  EvaluationReport refl = evaluate(recon, mirrored, cutoff);
  EvaluationReport& best = refl.correlation > as_is.correlation ? refl : as_is;
  best.handedness = &best == &refl ? Handedness::reflected : Handedness::as_is;
  best.correlation_as_is = as_is.correlation;
  best.correlation_reflected = refl.correlation;
  return best;
}

}  // namespace omrsc
