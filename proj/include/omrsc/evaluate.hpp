#pragma once

#include "omrsc/density.hpp"

#include <string>
#include <vector>

namespace omrsc {

struct FscCurve {
  std::vector<double> k;  // shell radius in DFT index units
  std::vector<double> value;
  std::vector<long> voxels;
};

struct Resolution {
  double value = 0.0;    // G * voxel_size / k_cross
  double k_cross = 0.0;
  bool crossed = false;  // false: curve stays above cutoff, value is the Nyquist limit
};

enum class Handedness { as_is, reflected };
std::string to_string(Handedness h);

struct EvaluationReport {
  FscCurve fsc;
  Resolution resolution;
  double correlation = 0.0;
  Handedness handedness = Handedness::as_is;
  double correlation_as_is = 0.0;
  double correlation_reflected = 0.0;
  double cutoff = 0.5;
  int G = 0;
  double voxel_size = 1.0;
};

FscCurve fsc(const Volume& a, const Volume& b);
Resolution resolution(const FscCurve& curve, int G, double cutoff = 0.5, double voxel_size = 1.0);
double correlation_coefficient(const Volume& a, const Volume& b);

// Mirror through the z = 0 plane.
Volume reflect_z(const Volume& v);

EvaluationReport evaluate(const Volume& recon, const Volume& truth, double cutoff = 0.5);
// Scores truth and its mirror image, keeping the better correlation.
EvaluationReport best_handedness(const Volume& recon, const Volume& truth, double cutoff = 0.5);

}  // namespace omrsc
