#include "omrsc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace omrsc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXd flatten_rows(const Eigen::MatrixXd& m) {
  RowMat r = m;
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

double power_lambda_max(const Eigen::MatrixXd& A) {
  if (A.cols() == 0 || A.rows() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd u = A.transpose() * (A * v);
    const double n = u.norm();
    if (n == 0.0) return 0.0;
    const double next = v.dot(u);
    v = u / n;
    if (it > 10 && std::abs(next - lam) < 1e-9 * next) {
      lam = next;
      break;
    }
    lam = next;
  }
  return lam;
}

Eigen::MatrixXd radial_block(const FeatureSet& f, const GridSpec& grid, RadialModel model) {
  if (model == RadialModel::exact) return radial_matrix(f.r, grid);
  const auto V = static_cast<Eigen::Index>(f.r.size()), D = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(V, D);
  const double t2 = grid.tau * grid.tau;
  for (Eigen::Index d = 0; d < D; ++d) {
    const double rho = grid.centers[d].norm();
    for (std::size_t j = 0; j < f.k.size(); ++j) {
      const double k = f.k[j];
      const double profile = f.k_weights[j] * k * std::exp(-0.5 * k * k * t2) * spherical_bessel_j(0, k * rho);
      for (Eigen::Index i = 0; i < V; ++i) R(i, d) += profile * std::sin(k * f.r[i]);
    }
    for (Eigen::Index i = 0; i < V; ++i) R(i, d) *= 2.0 * f.r[i] / kPi;
  }
  return R;
}

Eigen::VectorXd image_vector(const Image& img) { return Eigen::Map<const Eigen::VectorXd>(img.data(), img.size()); }

std::tuple<int, int, int> key_of(const Vec3& p) {
  return {static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())), static_cast<int>(std::lround(p.z()))};
}

Eigen::VectorXd restrict_to(const DensityMap& src, const GridSpec& grid, double mass) {
  std::map<std::tuple<int, int, int>, double> lookup;
  for (std::size_t d = 0; d < src.grid.size(); ++d) lookup[key_of(src.grid.centers[d])] = src.weights[static_cast<Eigen::Index>(d)];
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t d = 0; d < grid.size(); ++d) {
    auto it = lookup.find(key_of(grid.centers[d]));
    if (it != lookup.end()) w[static_cast<Eigen::Index>(d)] = it->second;
  }
  const double s = w.sum();
  if (!(s > 0.0)) throw NumericalError("initial density has no mass on the pruned grid");
  return w * (mass / s);
}

}  // namespace

std::string to_string(RadialModel m) { return m == RadialModel::exact ? "exact" : "bandlimited"; }

RadialModel radial_model_from_string(const std::string& s) {
  if (s == "exact") return RadialModel::exact;
  if (s == "bandlimited") return RadialModel::bandlimited;
  throw std::invalid_argument("unknown radial model '" + s + "' (expected exact or bandlimited)");
}

SolverConfig SolverConfig::desk(Domain mode) {
  SolverConfig c;
  c.mode = mode;
  if (mode == Domain::spatial) c.lambda = c.xi = 1.0;
  return c;
}

SolverConfig SolverConfig::paper(Domain mode) {
  SolverConfig c = desk(mode);
  c.L = 10;
  c.coarse_G = 33;
  return c;
}

void SolverConfig::validate() const {
  if (L < 0) throw std::invalid_argument("SolverConfig.L must be >= 0");
  if (lambda < 0.0 || xi < 0.0) throw std::invalid_argument("SolverConfig.lambda and xi must be >= 0");
  if (eta < 0.0) throw std::invalid_argument("SolverConfig.eta must be > 0 (or 0 for automatic)");
  if (!(varsigma > 0.0)) throw std::invalid_argument("SolverConfig.varsigma must be > 0");
  if (T < 0 || inner_steps < 1 || num_inits < 1 || init_steps < 1)
    throw std::invalid_argument("SolverConfig iteration counts must be positive");
  if (prune_fraction < 0.0) throw std::invalid_argument("SolverConfig.prune_fraction must be >= 0");
  if (!(tau > 0.0)) throw std::invalid_argument("SolverConfig.tau must be > 0");
  if (coarse_G != 0 && (coarse_G < 3 || coarse_G % 2 == 0)) throw std::invalid_argument("SolverConfig.coarse_G must be odd and >= 3, or 0");
}

Eigen::MatrixXd factorize(const Eigen::MatrixXd& C, int l) {
  if (C.rows() != C.cols()) throw std::invalid_argument("factorize: matrix is not square");
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-6 * scale)
    throw std::invalid_argument("factorize: matrix for degree " + std::to_string(l) + " is not symmetric");
  const int rank = 2 * l + 1;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(C.rows(), rank);
  if (C.size() == 0) return F;
  const Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("factorize: eigendecomposition failed");
  const Eigen::Index n = S.rows();
  for (int c = 0; c < rank && c < n; ++c) {
    const double ev = es.eigenvalues()[n - 1 - c];
    if (ev <= 0.0) break;
    F.col(c) = es.eigenvectors().col(n - 1 - c) * std::sqrt(ev);
  }
  return F;
}

FactorSet factorize_all(const std::vector<Eigen::MatrixXd>& C) {
  FactorSet fs;
  for (std::size_t l = 0; l < C.size(); ++l) {
    fs.F.push_back(factorize(C[l], static_cast<int>(l)));
    fs.O.push_back(Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1));
  }
  return fs;
}

Eigen::MatrixXd update_orthogonal(const Eigen::MatrixXd& F, const Eigen::MatrixXd& T) {
  if (F.rows() != T.rows() || F.cols() != T.cols()) throw std::invalid_argument("update_orthogonal: shape mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T.transpose() * F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("update_orthogonal: SVD failed");
  Eigen::MatrixXd U = svd.matrixU(), V = svd.matrixV();
  for (Eigen::Index c = 0; c < U.cols(); ++c)
    if (U(c, c) < 0.0) {
      U.col(c) *= -1.0;
      V.col(c) *= -1.0;
    }
  return V * U.transpose();
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v, double mass) {
  if (!(mass > 0.0)) throw std::invalid_argument("simplex_project: mass must be positive");
  const Eigen::Index n = v.size();
  if (n == 0) throw std::invalid_argument("simplex_project: empty vector");
  std::vector<double> s(v.data(), v.data() + n);
  std::sort(s.begin(), s.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += s[i];
    const double t = (cum - mass) / double(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Eigen::VectorXd mass_project(const Eigen::VectorXd& v, double mass) {
  if (v.size() == 0) throw std::invalid_argument("mass_project: empty vector");
  return v.array() - (v.sum() - mass) / double(v.size());
}

Problem::Problem(const FeatureSet& features_in, const Image& reference, const GridSpec& grid, const SolverConfig& config)
    : grid_(grid), config_(config) {
  config.validate();
  const FeatureSet features = convert_domain(features_in, config.mode);
  if (config.L > features.L())
    throw std::invalid_argument("solver L = " + std::to_string(config.L) + " exceeds feature L = " + std::to_string(features.L()));
  if (reference.rows() != grid.G || reference.cols() != grid.G) throw SizeError("Problem: reference image is not G x G");
  if (features.G != grid.G) throw SizeError("Problem: feature grid side differs from the density grid");
  mass_ = features.total_mass;
  if (!(mass_ > 0.0)) throw NumericalError("Problem: total mass from the radial features is not positive");
  const int L = config.L;
  const auto D = static_cast<Eigen::Index>(grid.size());
  const std::vector<Eigen::MatrixXd> C(features.C.begin(), features.C.begin() + L + 1);
  factors_ = factorize_all(C);

  const ShOperator sh(grid, features.r, L);
  const FeatureGrids g = features.grids();
  const auto rows_per = static_cast<Eigen::Index>(config.mode == Domain::fourier ? features.k.size() : features.r.size());
  offset_.push_back(0);
  for (int l = 0; l <= L; ++l) offset_.push_back(offset_.back() + rows_per * (2 * l + 1));
  radial_begin_ = offset_.back();
  sqrt_lambda_ = std::sqrt(config.lambda);
  sqrt_xi_ = std::sqrt(config.xi);
  const Eigen::Index V = static_cast<Eigen::Index>(features.r.size());
  const Eigen::Index npix = Eigen::Index(grid.G) * grid.G;
  projection_begin_ = radial_begin_ + V;
  A_.resize(projection_begin_ + npix, D);

  for (int l = 0; l <= L; ++l) {
    const int w = 2 * l + 1;
    if (config.mode == Domain::spatial) {
      A_.middleRows(offset_[l], rows_per * w) = sh.block(l);
    } else {
      const Eigen::MatrixXd Q = bessel_operator(l, g.r, g.k);
      for (Eigen::Index d = 0; d < D; ++d) {
        Eigen::Map<const Eigen::MatrixXd> X(sh.block(l).col(d).data(), w, V);
        const Eigen::MatrixXd Hd = X * Q;  // (2l+1) x U; column-major gives row index j*(2l+1)+c
        A_.block(offset_[l], d, rows_per * w, 1) = Eigen::Map<const Eigen::VectorXd>(Hd.data(), Hd.size());
      }
    }
  }
  A_.middleRows(radial_begin_, V) = sqrt_lambda_ * radial_block(features, grid, config.radial_model);
  A_.middleRows(projection_begin_, npix) = sqrt_xi_ * projection_matrix(grid);

  fixed_b_.resize(V + npix);
  fixed_b_.head(V) = sqrt_lambda_ * features.W;
  fixed_b_.tail(npix) = sqrt_xi_ * image_vector(reference);

  for (int l = 0; l <= L; ++l)
    if (factors_.F[l].rows() != rows_per) throw SizeError("Problem: factor rows do not match the feature grid");
  lipschitz_ = 2.0 * power_lambda_max(A_) * 1.02;
}

Eigen::MatrixXd Problem::coefficients(const Eigen::VectorXd& w, int l) const {
  const Eigen::VectorXd flat = A_.middleRows(offset_[l], offset_[l + 1] - offset_[l]) * w;
  return Eigen::Map<const RowMat>(flat.data(), flat.size() / (2 * l + 1), 2 * l + 1);
}

std::vector<Eigen::MatrixXd> Problem::update_all(const Eigen::VectorXd& w) const {
  std::vector<Eigen::MatrixXd> O;
  for (int l = 0; l <= L(); ++l) O.push_back(update_orthogonal(factors_.F[l], coefficients(w, l)));
  return O;
}

Eigen::VectorXd Problem::target(const std::vector<Eigen::MatrixXd>& O) const {
  if (static_cast<int>(O.size()) != L() + 1) throw SizeError("Problem::target: wrong number of orthogonal matrices");
  Eigen::VectorXd b(A_.rows());
  for (int l = 0; l <= L(); ++l) b.segment(offset_[l], offset_[l + 1] - offset_[l]) = flatten_rows(factors_.F[l] * O[l]);
  b.tail(fixed_b_.size()) = fixed_b_;
  return b;
}

Terms Problem::terms(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const {
  const Eigen::VectorXd r = A_ * w - target(O);
  Terms t;
  for (int l = 0; l <= L(); ++l) {
    t.autocorr_by_degree.push_back(r.segment(offset_[l], offset_[l + 1] - offset_[l]).squaredNorm());
    t.autocorr += t.autocorr_by_degree.back();
  }
  const double wr = r.segment(radial_begin_, projection_begin_ - radial_begin_).squaredNorm();
  const double wp = r.tail(A_.rows() - projection_begin_).squaredNorm();
  t.radial = config_.lambda > 0.0 ? wr / config_.lambda : 0.0;
  t.projection = config_.xi > 0.0 ? wp / config_.xi : 0.0;
  t.total = t.autocorr + wr + wp;
  return t;
}

double Problem::value(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const {
  return (A_ * w - target(O)).squaredNorm();
}

Eigen::VectorXd Problem::gradient(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const {
  return 2.0 * (A_.transpose() * (A_ * w - target(O)));
}

std::vector<double> Problem::degree_gradient_norms(const Eigen::VectorXd& w, const std::vector<Eigen::MatrixXd>& O) const {
  const Eigen::VectorXd r = A_ * w - target(O);
  std::vector<double> out;
  for (int l = 0; l <= L(); ++l) {
    const Eigen::Index n = offset_[l + 1] - offset_[l];
    out.push_back(2.0 * (A_.middleRows(offset_[l], n).transpose() * r.segment(offset_[l], n)).norm());
  }
  return out;
}

Eigen::VectorXd Problem::project(const Eigen::VectorXd& v) const {
  return config_.nonnegativity ? simplex_project(v, mass_) : mass_project(v, mass_);
}

PgdResult projected_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd w, double eta,
                             int max_steps, double tol, bool nonnegativity, double mass, bool momentum) {
  auto proj = [&](const Eigen::VectorXd& v) { return nonnegativity ? simplex_project(v, mass) : mass_project(v, mass); };
  PgdResult res;
  Eigen::VectorXd r = A * w - b;
  double f = r.squaredNorm();
  // Monotone FISTA when momentum is on: y extrapolates, w only moves on descent.
  Eigen::VectorXd y = w, ry = r, w_prev = w;
  double t = 1.0;
  for (int s = 0; s < max_steps; ++s) {
    const Eigen::VectorXd g = 2.0 * (A.transpose() * ry);
    const double fy = ry.squaredNorm();
    bool accepted = false;
    Eigen::VectorXd z, rz;
    double fz = fy;
    for (int h = 0; h < 60; ++h) {
      z = proj(y - eta * g);
      rz = A * z - b;
      fz = rz.squaredNorm();
      const Eigen::VectorXd dz = z - y;
      const double bound = momentum ? fy + g.dot(dz) + dz.squaredNorm() / (2.0 * eta) : fy;
      if (fz <= bound + 1e-14 * std::abs(fy) || fz <= (momentum ? std::min(fy, f) : fy)) {
        accepted = true;
        break;
      }
      eta *= 0.5;
      ++res.halvings;
    }
    if (!accepted) break;
    w_prev = w;
    const Eigen::VectorXd r_prev = r;
    if (fz <= f) {
      w = z;
      r = rz;
      f = fz;
    }
    const double wnorm = w_prev.norm();
    const double rel = (w - w_prev).norm() / (wnorm > 0.0 ? wnorm : 1.0);
    res.trace.push_back(f);
    ++res.steps;
    if (momentum) {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = w + (t / tn) * (z - w) + ((t - 1.0) / tn) * (w - w_prev);
      ry = r + (t / tn) * (rz - r) + ((t - 1.0) / tn) * (r - r_prev);
      t = tn;
    } else {
      y = w;
      ry = r;
    }
    if (rel < tol && (!momentum || (z - w).norm() <= tol * (wnorm > 0.0 ? wnorm : 1.0))) break;
  }
  res.w = std::move(w);
  res.eta = eta;
  return res;
}

PgdResult solve_w(const Problem& problem, const Eigen::VectorXd& w0, const std::vector<Eigen::MatrixXd>& O,
                  const SolverConfig& config, double eta) {
  return projected_gradient(problem.op(), problem.target(O), w0, eta, config.inner_steps, config.varsigma / 10.0,
                            config.nonnegativity, problem.mass(), config.momentum);
}

Eigen::VectorXd initialize(const FeatureSet& features, const Image& reference, const GridSpec& grid,
                           const SolverConfig& config) {
  const double mass = features.total_mass;
  if (!(mass > 0.0)) throw NumericalError("initialize: total mass from the radial features is not positive");
  const Eigen::MatrixXd R = radial_block(features, grid, config.radial_model);
  const Eigen::MatrixXd P = projection_matrix(grid);
  Eigen::MatrixXd A(R.rows() + P.rows(), R.cols());
  A << R, P;
  Eigen::VectorXd b(A.rows());
  b << features.W, image_vector(reference);
  const double lip = 2.0 * power_lambda_max(A) * 1.02;
  const double eta = lip > 0.0 ? 1.0 / lip : 1.0;
  auto proj = [&](const Eigen::VectorXd& v) { return config.nonnegativity ? simplex_project(v, mass) : mass_project(v, mass); };
  // First step from the origin, then monotone descent.
  Eigen::VectorXd w = proj(2.0 * eta * (A.transpose() * b));
  w = projected_gradient(A, b, w, eta, config.init_steps, config.varsigma, config.nonnegativity, mass, config.momentum).w;
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(A.cols(), mass / double(A.cols()));
  if ((A * uniform - b).squaredNorm() < (A * w - b).squaredNorm()) return uniform;
  return w;
}

SolveResult omr_sc(const FeatureSet& features, const std::vector<Candidate>& candidates, const SolverConfig& config,
                   const std::optional<DensityMap>& w0) {
  config.validate();
  if (candidates.empty()) throw std::invalid_argument("omr_sc: need at least one candidate reference");
  const int I = static_cast<int>(candidates.size());
  std::vector<InitRecord> records(I);
  std::vector<DensityMap> results(I);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < I; ++i) {
    InitRecord& rec = records[i];
    rec.reference_index = candidates[i].index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Image& ref = candidates[i].reference;
      const GridSpec grid = prune_grid(ref, config.prune_fraction * ref.maxCoeff(), features.G, config.tau);
      const Problem prob(features, ref, grid, config);
      rec.D = prob.D();
      Eigen::VectorXd w = w0 ? restrict_to(*w0, grid, prob.mass()) : initialize(features, ref, grid, config);
      auto O = prob.update_all(w);
      rec.initial = prob.terms(w, O);
      rec.objective_trace.push_back(rec.initial.total);
      rec.grad_norm_trace.push_back(prob.degree_gradient_norms(w, O));
      double eta = config.eta > 0.0 ? config.eta : 1.0 / prob.lipschitz();
      double f = rec.initial.total;
      Eigen::VectorXd w_prev = w;
      double beta = 0.0;
      for (int t = 0; t < config.T; ++t) {
        Eigen::VectorXd next;
        std::vector<Eigen::MatrixXd> O_next;
        double f_next = 0.0;
        bool done = false;
        if (config.extrapolate && beta > 0.0) {
          // Refit O at the extrapolated point, keep the result only on descent.
          const Eigen::VectorXd y = prob.project(w + beta * (w - w_prev));
          const PgdResult step = solve_w(prob, y, prob.update_all(y), config, eta);
          O_next = prob.update_all(step.w);
          f_next = prob.value(step.w, O_next);
          if (f_next <= f) {
            next = step.w;
            eta = step.eta;
            beta = std::min(1.0, beta * 1.5);
            done = true;
          } else {
            beta *= 0.5;
          }
        }
        if (!done) {
          const PgdResult step = solve_w(prob, w, O, config, eta);
          eta = step.eta;
          next = step.w;
          O_next = prob.update_all(next);
          f_next = prob.value(next, O_next);
          if (config.extrapolate && beta == 0.0) beta = 0.5;
        }
        const double rel = (next - w).norm() / std::max(w.norm(), 1e-300);
        const double drop = (f - f_next) / std::max(f, 1e-300);
        w_prev = w;
        w = std::move(next);
        O = std::move(O_next);
        f = f_next;
        rec.objective_trace.push_back(f);
        rec.grad_norm_trace.push_back(prob.degree_gradient_norms(w, O));
        rec.iterations = t + 1;
        if (rel < config.varsigma && drop < config.varsigma) {
          rec.converged = true;
          break;
        }
      }
      rec.final_terms = prob.terms(w, O);
      results[i] = DensityMap{grid, w, prob.mass()};
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  SolveResult out;
  out.report.mode = config.mode;
  out.report.inits = records;
  for (int i = 0; i < I; ++i) {
    if (!records[i].ok) continue;
    if (out.report.chosen < 0 || records[i].final_terms.autocorr < records[out.report.chosen].final_terms.autocorr)
      out.report.chosen = i;
  }
  if (out.report.chosen < 0) throw NumericalError("omr_sc: every initialization failed (first error: " + records[0].error + ")");
  out.report.chosen_reference = records[out.report.chosen].reference_index;
  out.density = results[out.report.chosen];
  return out;
}

std::vector<Candidate> candidates_from(const Dataset& data, const SolverConfig& config) {
  std::vector<Candidate> out;
  const int I = std::min(config.num_inits, data.N());
  for (int i = 0; i < I; ++i) {
    const Image& img = data.images[i];
    out.push_back({i, (data.sigma > 0.0 && config.ref_lowpass > 0.0) ? lowpass(img, config.ref_lowpass) : img});
  }
  return out;
}

FeatureParams coarse_feature_params(const FeatureParams& fine, int G, int coarse_G) {
  FeatureParams p = fine;
  const double ratio = double(coarse_G - 1) / double(G - 1);
  p.V = std::max(fine.L + 2, static_cast<int>(std::lround(fine.V * ratio)));
  p.Phi = std::max(16, static_cast<int>(std::lround(fine.Phi * ratio)));
  if (fine.Psi > 0) p.Psi = std::max(8, static_cast<int>(std::lround(fine.Psi * ratio)));
  return p;
}

AbInitioResult ab_initio_refine(const Dataset& data, const FeatureParams& params, const SolverConfig& config) {
  const FeatureSet fine = extract_features(data, params, config.mode);
  return ab_initio_refine(data, fine, coarse_feature_params(params, data.G(), config.coarse_G ? config.coarse_G : data.G()), config);
}

AbInitioResult ab_initio_refine(const Dataset& data, const FeatureSet& fine, const FeatureParams& coarse_params,
                                const SolverConfig& config) {
  config.validate();
  const int G = data.G();
  if (config.coarse_G == 0 || config.coarse_G >= G)
    throw std::invalid_argument("ab_initio_refine: coarse_G must be odd and smaller than G = " + std::to_string(G));
  const int Gc = config.coarse_G;
  const bool noisy = data.sigma > 0.0;

  Dataset coarse;
  coarse.sigma = data.sigma;
  coarse.images.resize(data.images.size());
#pragma omp parallel for schedule(static)
  for (int n = 0; n < data.N(); ++n) coarse.images[n] = downsample_image(data.images[n], Gc);
  std::optional<AutocorrTensor> bias;
  if (noisy) {
    // The resampled noise is no longer white; its bias is the image of the
    // white-noise covariance under the (linear) downsampling map.
    std::vector<Image> basis;
    for (int p = 0; p < G * G; ++p) {
      Image e = Image::Zero(G, G);
      e.data()[p] = 1.0;
      basis.push_back(downsample_image(e, Gc));
    }
    bias = noise_bias_from_basis(make_grids(coarse_params, Gc), data.sigma, basis);
  }
  const FeatureSet coarse_features = extract_features(coarse, coarse_params, config.mode, bias ? &*bias : nullptr);

  SolverConfig cc = config;
  std::vector<Candidate> cands;
  for (int i = 0; i < std::min(config.num_inits, data.N()); ++i) {
    const Image base = (noisy && config.ref_lowpass > 0.0) ? lowpass(data.images[i], config.ref_lowpass) : data.images[i];
    cands.push_back({i, downsample_image(base, Gc)});
  }
  AbInitioResult out;
  out.coarse = omr_sc(coarse_features, cands, cc);
  out.coarse.report.stage = "ab_initio";

  const int chosen = out.coarse.report.chosen_reference;
  out.upsampled = upsample_density(out.coarse.density, full_ball(G, config.tau));
  const Image ref = (noisy && config.ref_lowpass > 0.0) ? lowpass(data.images[chosen], config.ref_lowpass) : data.images[chosen];
  SolverConfig rc = config;
  rc.num_inits = 1;
  out.refined = omr_sc(fine, {{chosen, ref}}, rc, out.upsampled);
  out.refined.report.stage = "refine";
  return out;
}

}  // namespace omrsc
