#pragma once

#include "omrsc/density.hpp"
#include "omrsc/mathcore.hpp"
#include "omrsc/simulate.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace omrsc {

enum class Domain { fourier, spatial };
std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

struct FeatureParams {
  double k_max = kPi / 2.0;
  int U = 21;
  int Phi = 129;
  int V = 41;
  // 0 means reuse V.
  int Psi = 0;
  int L = 6;

  static FeatureParams desk() { return {}; }
  static FeatureParams paper() { return {kPi / 2.0, 51, 401, 101, 0, 10}; }
};

struct FeatureGrids {
  QuadratureRule k;    // uniform on [0, k_max], trapezoid weights
  QuadratureRule r;    // GLQ on [0, (G-1)/2]
  QuadratureRule phi;  // GLQ on [0, 2 pi]
  QuadratureRule psi;  // GLQ on [0, pi]
  int L = 0;
  int G = 0;
};

FeatureGrids make_grids(const FeatureParams& p, int G);

struct PolarFourierSlice {
  Eigen::MatrixXcd values;  // radius x angle
  std::vector<double> radii;
  std::vector<double> angles;
};

PolarFourierSlice polar_fourier(const Image& image, const std::vector<double>& radii, const std::vector<double>& angles);

struct RadialFeatures {
  Eigen::VectorXcd M;
  Eigen::VectorXd W;
  double total_mass = 0.0;
};

// C(k1, k2, psi_j) slices, one U x U matrix per psi node.
struct AutocorrTensor {
  std::vector<Eigen::MatrixXcd> slices;
  std::vector<double> psi;
};

// Streaming first and second moments. Each image is expanded in angular
// harmonics c_n(k) on a uniform angle grid, so every shift psi is exact.
class MomentAccumulator {
 public:
  MomentAccumulator(const FeatureGrids& grids);

  void add(const Image& image);
  void add(const std::vector<Image>& images);
  void merge(const MomentAccumulator& other);

  long count() const { return sums_.count; }
  int harmonics() const { return static_cast<int>(sums_.H.size()); }
  Eigen::VectorXcd first_moment() const;
  AutocorrTensor autocorr() const;

 private:
  struct Sums {
    std::vector<Eigen::MatrixXcd> H;  // sum of c_n c_n^H, n = 0 .. harmonics-1
    Eigen::VectorXcd m;               // sum of c_0
    long count = 0;
  };

  void add_block(const Eigen::MatrixXd& stack, Sums& out) const;
  Sums zero_sums() const;
  void absorb(const Sums& other);

  FeatureGrids grids_;
  Eigen::MatrixXd kernel_re_, kernel_im_;  // (n * U + k) x G^2
  Sums sums_;
};

Eigen::VectorXcd first_moment(const std::vector<Image>& images, const FeatureGrids& grids);
AutocorrTensor empirical_autocorr(const std::vector<Image>& images, const FeatureGrids& grids);

// sigma^2 sum_{x,y} J0(q |x|) with q = |k1 e(phi) - k2 e(phi + psi)|.
AutocorrTensor noise_bias(const FeatureGrids& grids, double sigma);
// Bias of sigma^2-white noise seen through a linear map, given the images of
// the unit pixel basis under that map.
AutocorrTensor noise_bias_from_basis(const FeatureGrids& grids, double sigma, const std::vector<Image>& basis);
AutocorrTensor debias(const AutocorrTensor& c, const AutocorrTensor& bias);

Eigen::MatrixXd degree_project(const AutocorrTensor& c, int l, const QuadratureRule& psi);

void radial_from_moment(const Eigen::VectorXcd& M, const QuadratureRule& k, const QuadratureRule& r,
                        Eigen::VectorXd& W, double& total_mass);

// Real forms of the spherical Bessel transforms with the i^l phase removed:
// C_l = Q_l^T E_l Q_l and E_l = K_l C_l K_l^T.
class BesselOperator {
 public:
  BesselOperator(const QuadratureRule& r, const QuadratureRule& k, int L);

  const Eigen::MatrixXd& Q(int l) const { return Q_[l]; }  // V x U
  const Eigen::MatrixXd& K(int l) const { return K_[l]; }  // V x U
  int L() const { return static_cast<int>(Q_.size()) - 1; }

  Eigen::MatrixXd to_fourier(const Eigen::MatrixXd& E, int l) const;
  Eigen::MatrixXd to_spatial(const Eigen::MatrixXd& C, int l) const;

 private:
  std::vector<Eigen::MatrixXd> Q_, K_;
};

Eigen::MatrixXd bessel_operator(int l, const QuadratureRule& r, const QuadratureRule& k);

struct FeatureSet {
  Domain domain = Domain::fourier;
  FeatureParams params;
  int G = 0;
  double sigma_used = 0.0;
  long num_images = 0;
  std::vector<double> k, k_weights, r, r_weights;
  Eigen::VectorXcd M;
  Eigen::VectorXd W;
  double total_mass = 0.0;
  std::vector<Eigen::MatrixXd> C;  // C_l or E_l per domain

  int L() const { return static_cast<int>(C.size()) - 1; }
  FeatureGrids grids() const;
};

// Debiases with the white-noise term for data.sigma unless a bias is supplied.
FeatureSet extract_features(const Dataset& data, const FeatureParams& params, Domain domain = Domain::fourier,
                            const AutocorrTensor* bias = nullptr);
// Noise-free features of a density model, evaluated from its closed forms.
FeatureSet analytic_features(const DensityMap& density, const FeatureParams& params, Domain domain = Domain::fourier);
FeatureSet convert_domain(const FeatureSet& f, Domain target);

namespace serial {
PolarFourierSlice polar_fourier(const Image& image, const std::vector<double>& radii, const std::vector<double>& angles);
// GLQ in phi with direct evaluation at phi_i and phi_i + psi_j.
Eigen::VectorXcd first_moment(const std::vector<Image>& images, const FeatureGrids& grids);
AutocorrTensor empirical_autocorr(const std::vector<Image>& images, const FeatureGrids& grids);
AutocorrTensor noise_bias(const FeatureGrids& grids, double sigma);
}  // namespace serial

}  // namespace omrsc
