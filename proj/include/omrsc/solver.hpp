#pragma once

#include "omrsc/density.hpp"
#include "omrsc/features.hpp"
#include "omrsc/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omrsc {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How the lambda-weighted radial term models W(r) for a given w.
//   exact:       g(r)^T w, the closed form of the bump mixture.
//   bandlimited: the same sine transform used by feature extraction, applied
//                to the bumps' Fourier profiles on the k grid.
enum class RadialModel { exact, bandlimited };
std::string to_string(RadialModel m);
RadialModel radial_model_from_string(const std::string& s);

struct SolverConfig {
  int L = 6;
  double lambda = 100.0;
  double xi = 100.0;
  // 0 selects 1 / Lipschitz estimate.
  double eta = 0.0;
  double varsigma = 1e-5;
  int T = 500;
  int inner_steps = 100;
  int num_inits = 10;
  Domain mode = Domain::fourier;
  std::uint64_t seed = 0;
  bool nonnegativity = true;
  double prune_fraction = 0.01;
  double ref_lowpass = 2.0;
  int init_steps = 500;
  RadialModel radial_model = RadialModel::exact;
  bool momentum = true;
  // Safeguarded extrapolation of w across outer iterations.
  bool extrapolate = true;
  double tau = kDefaultTau;
  // Ab initio stage grid side; 0 skips the stage.
  int coarse_G = 11;

  static SolverConfig desk(Domain mode = Domain::fourier);
  static SolverConfig paper(Domain mode = Domain::fourier);
  void validate() const;
};

struct FactorSet {
  std::vector<Eigen::MatrixXd> F;
  std::vector<Eigen::MatrixXd> O;
};

// Top 2l+1 eigenpairs of the PSD part; always returns 2l+1 columns, zero-padded.
Eigen::MatrixXd factorize(const Eigen::MatrixXd& C, int l);
FactorSet factorize_all(const std::vector<Eigen::MatrixXd>& C);

// argmin over orthogonal O of ||F O - T||_F.
Eigen::MatrixXd update_orthogonal(const Eigen::MatrixXd& F, const Eigen::MatrixXd& T);

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v, double mass);
// Projection onto {sum w = mass} only.
Eigen::VectorXd mass_project(const Eigen::VectorXd& v, double mass);

struct Terms {
  std::vector<double> autocorr_by_degree;
  double autocorr = 0.0;
  double radial = 0.0;
  double projection = 0.0;
  double total = 0.0;
};

// The OMR-SC objective on one pruned grid, with every w-linear piece stored as
// a dense block of a single stacked operator A so that f = ||A w - b(O)||^2.
class Problem {
 public:
  Problem(const FeatureSet& features, const Image& reference, const GridSpec& grid, const SolverConfig& config);

  int D() const { return static_cast<int>(A_.cols()); }
  int L() const { return static_cast<int>(factors_.F.size()) - 1; }
  const GridSpec& grid() const { return grid_; }
  const FactorSet& factors() const { return factors_; }
  const Eigen::MatrixXd& op() const { return A_; }
  double lipschitz() const { return lipschitz_; }
  double mass() const { return mass_; }

  // Current fitted coefficient matrix for degree l: Q^T B_l(w) or B_l(w).
  Eigen::MatrixXd coefficients(const Eigen::VectorXd& w, int l) const;
  std::vector<Eigen::MatrixXd> update_all(const Eigen::VectorXd& w) const;
  Eigen::VectorXd target(const std::vector<Eigen::MatrixXd>& O) const;

  Terms terms(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const;
  double value(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const;
  std::vector<double> degree_gradient_norms(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const;

  Eigen::VectorXd project(const Eigen::VectorXd& v) const;

  // Row block [begin, end) of degree l inside A.
  std::pair<Eigen::Index, Eigen::Index> degree_rows(int l) const { return {offset_[l], offset_[l + 1]}; }

 private:
  GridSpec grid_;
  SolverConfig config_;
  FactorSet factors_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd fixed_b_;  // radial and projection targets, already weighted
  std::vector<Eigen::Index> offset_;
  Eigen::Index radial_begin_ = 0, projection_begin_ = 0;
  double sqrt_lambda_ = 1.0, sqrt_xi_ = 1.0;
  double lipschitz_ = 0.0;
  double mass_ = 0.0;
};

struct PgdResult {
  Eigen::VectorXd w;
  std::vector<double> trace;  // objective after each accepted step
  int steps = 0;
  int halvings = 0;
  double eta = 0.0;
};

// Minimizes ||A w - b||^2 over the feasible set by projected gradient with
// step halving on objective increase. With momentum, monotone FISTA: the
// returned iterate sequence is still non-increasing in the objective.
PgdResult projected_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd w, double eta,
                             int max_steps, double tol, bool nonnegativity, double mass, bool momentum = false);

PgdResult solve_w(const Problem& problem, const Eigen::VectorXd& w0, const std::vector<Eigen::MatrixXd>& O,
                  const SolverConfig& config, double eta);

// Radial plus projection fit (both unweighted) by projected gradient from 0.
Eigen::VectorXd initialize(const FeatureSet& features, const Image& reference, const GridSpec& grid,
                           const SolverConfig& config);

struct InitRecord {
  int reference_index = 0;
  bool ok = false;
  std::string error;
  int D = 0;
  int iterations = 0;
  bool converged = false;
  Terms initial;
  Terms final_terms;
  std::vector<double> objective_trace;
  std::vector<std::vector<double>> grad_norm_trace;
  double seconds = 0.0;
};

struct SolveReport {
  std::string stage = "omr_sc";
  Domain mode = Domain::fourier;
  std::vector<InitRecord> inits;
  int chosen = -1;  // index into inits
  int chosen_reference = -1;
};

struct Candidate {
  int index = 0;
  Image reference;
};

struct SolveResult {
  DensityMap density;
  SolveReport report;
};

// Multi-start OMR-SC. With w0 set, every candidate starts from w0 (which must
// live on that candidate's pruned grid, so pass a single candidate).
SolveResult omr_sc(const FeatureSet& features, const std::vector<Candidate>& candidates, const SolverConfig& config,
                   const std::optional<DensityMap>& w0 = std::nullopt);

// First num_inits images as candidates; low-pass filtered when the data are noisy.
std::vector<Candidate> candidates_from(const Dataset& data, const SolverConfig& config);

struct AbInitioResult {
  SolveResult coarse;
  DensityMap upsampled;
  SolveResult refined;
};

AbInitioResult ab_initio_refine(const Dataset& data, const FeatureParams& params, const SolverConfig& config);
// Same, reusing fine-resolution features that were already extracted.
AbInitioResult ab_initio_refine(const Dataset& data, const FeatureSet& fine, const FeatureParams& coarse_params,
                                const SolverConfig& config);
FeatureParams coarse_feature_params(const FeatureParams& fine, int G, int coarse_G);

}  // namespace omrsc
