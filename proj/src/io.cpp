#include "omrsc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace omrsc {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kVolMagic[4] = {'O', 'V', 'O', 'L'};
constexpr char kProjMagic[4] = {'O', 'P', 'R', 'J'};
constexpr char kFeatMagic[4] = {'O', 'F', 'E', 'A'};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return in;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("'" + path + "' is truncated");
  return v;
}

void put_header(std::ostream& out, const char (&magic)[4]) {
  out.write(magic, 4);
  put<std::uint32_t>(out, kFormatVersion);
}

void check_header(std::istream& in, const char (&magic)[4], const std::string& path, const char* kind) {
  char m[4];
  if (!in.read(m, 4) || std::memcmp(m, magic, 4) != 0) throw FormatError("'" + path + "' is not a " + kind + " file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kFormatVersion)
    throw FormatError("'" + path + "' has " + kind + " version " + std::to_string(version) + ", expected " +
                      std::to_string(kFormatVersion));
}

void put_f32(std::ostream& out, const double* p, std::size_t n) {
  std::vector<float> buf(p, p + n);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
}

void get_f32(std::istream& in, double* p, std::size_t n, const std::string& path) {
  std::vector<float> buf(n);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float))))
    throw FormatError("'" + path + "' is truncated");
  std::copy(buf.begin(), buf.end(), p);
}

void put_f64(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_f64(std::istream& in, double* p, std::size_t n, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError("'" + path + "' is truncated");
}

void expect_end(std::istream& in, const std::string& path) {
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("'" + path + "' has trailing bytes");
}

template <class T>
T field(const Json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw FormatError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": field '" + name + "' has the wrong type");
  }
}

template <class T>
void maybe(const Json& j, const char* name, T& dst, const std::string& where) {
  if (!j.contains(name)) return;
  try {
    dst = j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": field '" + name + "' has the wrong type");
  }
}

int positive_int(const Json& j, const char* name, const std::string& where) {
  const int v = field<int>(j, name, where);
  if (v <= 0) throw FormatError(where + ": field '" + name + "' must be positive");
  return v;
}

}  // namespace

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

void write_volume(const std::string& path, const Volume& v, double total_mass) {
  auto out = open_out(path);
  put_header(out, kVolMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.G));
  put_f32(out, v.data.data(), v.data.size());
  write_json(path + ".json", {{"format", "vol3"}, {"version", kFormatVersion}, {"G", v.G},
                              {"voxel_size", v.voxel_size}, {"total_mass", total_mass}});
}

Volume read_volume(const std::string& path, double* total_mass) {
  const Json side = read_json(path + ".json");
  const std::string where = path + ".json";
  const int G = positive_int(side, "G", where);
  auto in = open_in(path);
  check_header(in, kVolMagic, path, "vol3");
  const auto g = get<std::uint32_t>(in, path);
  if (static_cast<int>(g) != G) throw FormatError("'" + path + "' has G = " + std::to_string(g) + " but sidecar says " + std::to_string(G));
  Volume v(G, field<double>(side, "voxel_size", where));
  get_f32(in, v.data.data(), v.data.size(), path);
  expect_end(in, path);
  if (total_mass) *total_mass = field<double>(side, "total_mass", where);
  return v;
}

void write_dataset(const std::string& path, const Dataset& data) {
  const int G = data.G();
  auto out = open_out(path);
  put_header(out, kProjMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.N()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(G));
  for (const Image& img : data.images) {
    if (img.rows() != G || img.cols() != G) throw SizeError("write_dataset: images differ in size");
    put_f32(out, img.data(), static_cast<std::size_t>(img.size()));
  }
  Json side = {{"format", "proj2d"}, {"version", kFormatVersion}, {"N", data.N()}, {"G", G},
               {"sigma", data.sigma}, {"snr", data.snr}, {"seed", data.seed}, {"reference_index", data.reference_index}};
  if (data.hidden_rotations) {
    Json rots = Json::array();
    for (const Rotation& r : *data.hidden_rotations) {
      Json m = Json::array();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m.push_back(r.matrix()(i, j));
      rots.push_back(m);
    }
    side["rotations"] = rots;
  }
  write_json(path + ".json", side);
}

Dataset read_dataset(const std::string& path) {
  const Json side = read_json(path + ".json");
  const std::string where = path + ".json";
  const int N = positive_int(side, "N", where), G = positive_int(side, "G", where);
  auto in = open_in(path);
  check_header(in, kProjMagic, path, "proj2d");
  const auto n = get<std::uint32_t>(in, path), g = get<std::uint32_t>(in, path);
  if (static_cast<int>(n) != N || static_cast<int>(g) != G) throw FormatError("'" + path + "' disagrees with its sidecar on N or G");
  Dataset d;
  d.images.assign(N, Image(G, G));
  for (Image& img : d.images) get_f32(in, img.data(), static_cast<std::size_t>(img.size()), path);
  expect_end(in, path);
  d.sigma = field<double>(side, "sigma", where);
  d.snr = field<double>(side, "snr", where);
  d.seed = field<std::uint64_t>(side, "seed", where);
  d.reference_index = field<int>(side, "reference_index", where);
  if (d.reference_index < 0 || d.reference_index >= N) throw FormatError(where + ": reference_index out of range");
  if (side.contains("rotations")) {
    std::vector<Rotation> rots;
    for (const Json& m : side["rotations"]) {
      if (!m.is_array() || m.size() != 9) throw FormatError(where + ": each rotation needs 9 entries");
      Mat3 R;
      for (int i = 0; i < 9; ++i) R(i / 3, i % 3) = m[i].get<double>();
      rots.emplace_back(R);
    }
    d.hidden_rotations = std::move(rots);
  }
  return d;
}

Json to_json(const FeatureParams& p) {
  return {{"k_max", p.k_max}, {"U", p.U}, {"Phi", p.Phi}, {"V", p.V}, {"Psi", p.Psi}, {"L", p.L}};
}

FeatureParams feature_params_from_json(const Json& j, FeatureParams p) {
  const std::string where = "feature params";
  maybe(j, "k_max", p.k_max, where);
  maybe(j, "U", p.U, where);
  maybe(j, "Phi", p.Phi, where);
  maybe(j, "V", p.V, where);
  maybe(j, "Psi", p.Psi, where);
  maybe(j, "L", p.L, where);
  return p;
}

void write_features(const std::string& path, const FeatureSet& f) {
  const Json header = {{"L", f.L()},
                       {"U", f.k.size()},
                       {"V", f.r.size()},
                       {"k_max", f.params.k_max},
                       {"domain", to_string(f.domain)},
                       {"normalization", "i^l-real"},
                       {"sigma_used", f.sigma_used},
                       {"G", f.G},
                       {"num_images", f.num_images},
                       {"total_mass", f.total_mass},
                       {"params", to_json(f.params)},
                       {"k", f.k},
                       {"k_weights", f.k_weights},
                       {"r", f.r},
                       {"r_weights", f.r_weights}};
  const std::string text = header.dump();
  auto out = open_out(path);
  put_header(out, kFeatMagic);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (Eigen::Index i = 0; i < f.M.size(); ++i) {
    put<double>(out, f.M[i].real());
    put<double>(out, f.M[i].imag());
  }
  put_f64(out, f.W.data(), static_cast<std::size_t>(f.W.size()));
  for (const auto& C : f.C) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = C;
    put_f64(out, R.data(), static_cast<std::size_t>(R.size()));
  }
}

FeatureSet read_features(const std::string& path) {
  auto in = open_in(path);
  check_header(in, kFeatMagic, path, "momfeat");
  const auto len = get<std::uint64_t>(in, path);
  if (len > (1u << 30)) throw FormatError("'" + path + "' has an implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("'" + path + "' is truncated");
  Json h;
  try {
    h = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path + "' header is not valid JSON: " + e.what());
  }
  const std::string where = path + " header";
  if (field<std::string>(h, "normalization", where) != "i^l-real")
    throw FormatError(where + ": unsupported normalization");
  FeatureSet f;
  try {
    f.domain = domain_from_string(field<std::string>(h, "domain", where));
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  const int L = field<int>(h, "L", where);
  const int U = positive_int(h, "U", where), V = positive_int(h, "V", where);
  if (L < 0) throw FormatError(where + ": field 'L' must be >= 0");
  f.params = feature_params_from_json(field<Json>(h, "params", where));
  f.params.k_max = field<double>(h, "k_max", where);
  f.G = positive_int(h, "G", where);
  f.sigma_used = field<double>(h, "sigma_used", where);
  f.num_images = field<long>(h, "num_images", where);
  f.total_mass = field<double>(h, "total_mass", where);
  f.k = field<std::vector<double>>(h, "k", where);
  f.k_weights = field<std::vector<double>>(h, "k_weights", where);
  f.r = field<std::vector<double>>(h, "r", where);
  f.r_weights = field<std::vector<double>>(h, "r_weights", where);
  if (static_cast<int>(f.k.size()) != U || static_cast<int>(f.k_weights.size()) != U ||
      static_cast<int>(f.r.size()) != V || static_cast<int>(f.r_weights.size()) != V)
    throw FormatError(where + ": grid arrays disagree with U or V");
  f.M.resize(U);
  for (int i = 0; i < U; ++i) {
    const double re = get<double>(in, path), im = get<double>(in, path);
    f.M[i] = {re, im};
  }
  f.W.resize(V);
  get_f64(in, f.W.data(), static_cast<std::size_t>(V), path);
  const int n = f.domain == Domain::fourier ? U : V;
  for (int l = 0; l <= L; ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(n, n);
    get_f64(in, R.data(), static_cast<std::size_t>(R.size()), path);
    f.C.emplace_back(R);
  }
  expect_end(in, path);
  return f;
}

Json to_json(const DensityMap& d) {
  Json centers = Json::array();
  for (const Vec3& c : d.grid.centers) centers.push_back({c.x(), c.y(), c.z()});
  return {{"G", d.grid.G},
          {"tau", d.grid.tau},
          {"total_mass", d.total_mass},
          {"centers", centers},
          {"weights", std::vector<double>(d.weights.data(), d.weights.data() + d.weights.size())}};
}

DensityMap density_from_json(const Json& j) {
  const std::string where = "density";
  DensityMap d;
  d.grid.G = positive_int(j, "G", where);
  d.grid.tau = field<double>(j, "tau", where);
  d.total_mass = field<double>(j, "total_mass", where);
  const auto centers = field<std::vector<std::vector<double>>>(j, "centers", where);
  const auto weights = field<std::vector<double>>(j, "weights", where);
  if (centers.size() != weights.size()) throw FormatError(where + ": centers and weights differ in length");
  for (const auto& c : centers) {
    if (c.size() != 3) throw FormatError(where + ": each center needs 3 coordinates");
    d.grid.centers.emplace_back(c[0], c[1], c[2]);
  }
  d.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  try {
    validate(d);
  } catch (const std::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  return d;
}

void write_density(const std::string& path, const DensityMap& d) { write_json(path, to_json(d)); }

DensityMap read_density(const std::string& path) {
  try {
    return density_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

Json to_json(const SolverConfig& c) {
  return {{"L", c.L},
          {"lambda", c.lambda},
          {"xi", c.xi},
          {"eta", c.eta},
          {"varsigma", c.varsigma},
          {"T", c.T},
          {"inner_steps", c.inner_steps},
          {"num_inits", c.num_inits},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"nonnegativity", c.nonnegativity},
          {"prune_fraction", c.prune_fraction},
          {"ref_lowpass", c.ref_lowpass},
          {"init_steps", c.init_steps},
          {"radial_model", to_string(c.radial_model)},
          {"momentum", c.momentum},
          {"extrapolate", c.extrapolate},
          {"tau", c.tau},
          {"coarse_G", c.coarse_G}};
}

SolverConfig solver_config_from_json(const Json& j, SolverConfig c) {
  const std::string where = "solver config";
  if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
  static const std::vector<std::string> known = {"L", "lambda", "xi", "eta", "varsigma", "T", "inner_steps", "num_inits",
                                                 "mode", "seed", "nonnegativity", "prune_fraction", "ref_lowpass",
                                                 "init_steps", "radial_model", "momentum", "extrapolate", "tau", "coarse_G"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw FormatError(where + ": unknown field '" + it.key() + "'");
  maybe(j, "L", c.L, where);
  maybe(j, "lambda", c.lambda, where);
  maybe(j, "xi", c.xi, where);
  maybe(j, "eta", c.eta, where);
  maybe(j, "varsigma", c.varsigma, where);
  maybe(j, "T", c.T, where);
  maybe(j, "inner_steps", c.inner_steps, where);
  maybe(j, "num_inits", c.num_inits, where);
  maybe(j, "seed", c.seed, where);
  maybe(j, "nonnegativity", c.nonnegativity, where);
  maybe(j, "prune_fraction", c.prune_fraction, where);
  maybe(j, "ref_lowpass", c.ref_lowpass, where);
  maybe(j, "init_steps", c.init_steps, where);
  maybe(j, "momentum", c.momentum, where);
  maybe(j, "extrapolate", c.extrapolate, where);
  maybe(j, "tau", c.tau, where);
  maybe(j, "coarse_G", c.coarse_G, where);
  try {
    if (j.contains("mode")) c.mode = domain_from_string(field<std::string>(j, "mode", where));
    if (j.contains("radial_model")) c.radial_model = radial_model_from_string(field<std::string>(j, "radial_model", where));
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  return c;
}

Json to_json(const Terms& t) {
  return {{"autocorr", t.autocorr}, {"autocorr_by_degree", t.autocorr_by_degree}, {"radial", t.radial},
          {"projection", t.projection}, {"total", t.total}};
}

Json to_json(const SolveReport& r) {
  Json inits = Json::array();
  for (const InitRecord& i : r.inits) {
    Json e = {{"reference_index", i.reference_index}, {"ok", i.ok}, {"D", i.D}, {"iterations", i.iterations},
              {"converged", i.converged}, {"seconds", i.seconds}};
    if (i.ok) {
      e["initial"] = to_json(i.initial);
      e["final"] = to_json(i.final_terms);
      e["objective_trace"] = i.objective_trace;
      e["grad_norm_trace"] = i.grad_norm_trace;
    } else {
      e["error"] = i.error;
    }
    inits.push_back(e);
  }
  return {{"stage", r.stage}, {"mode", to_string(r.mode)}, {"chosen", r.chosen},
          {"chosen_reference", r.chosen_reference}, {"inits", inits}};
}

Json to_json(const EvaluationReport& r) {
  return {{"correlation", r.correlation},
          {"handedness", to_string(r.handedness)},
          {"correlation_as_is", r.correlation_as_is},
          {"correlation_reflected", r.correlation_reflected},
          {"resolution", r.resolution.value},
          {"k_cross", r.resolution.k_cross},
          {"crossed", r.resolution.crossed},
          {"cutoff", r.cutoff},
          {"G", r.G},
          {"voxel_size", r.voxel_size},
          {"fsc", {{"k", r.fsc.k}, {"value", r.fsc.value}}}};
}

void write_fsc_csv(const std::string& path, const FscCurve& curve) {
  auto out = open_out(path);
  out << "k,fsc\n";
  out.precision(10);
  for (std::size_t i = 0; i < curve.k.size(); ++i) out << curve.k[i] << "," << curve.value[i] << "\n";
}

void write_trace_csv(const std::string& path, const SolveReport& report) {
  auto out = open_out(path);
  std::size_t degrees = 0;
  for (const InitRecord& i : report.inits)
    for (const auto& g : i.grad_norm_trace) degrees = std::max(degrees, g.size());
  out << "init,iteration,objective";
  for (std::size_t l = 0; l < degrees; ++l) out << ",grad_l" << l;
  out << "\n";
  out.precision(12);
  for (std::size_t n = 0; n < report.inits.size(); ++n) {
    const InitRecord& rec = report.inits[n];
    for (std::size_t t = 0; t < rec.objective_trace.size(); ++t) {
      out << n << "," << t << "," << rec.objective_trace[t];
      for (std::size_t l = 0; l < degrees; ++l) {
        out << ",";
        if (t < rec.grad_norm_trace.size() && l < rec.grad_norm_trace[t].size()) out << rec.grad_norm_trace[t][l];
      }
      out << "\n";
    }
  }
}

}  // namespace omrsc
