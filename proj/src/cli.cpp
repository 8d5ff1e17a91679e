#include "omrsc/cli.hpp"

#include "omrsc/io.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <iostream>

namespace omrsc::cli {

namespace {

// Manifest for one command; written next to the primary output.
struct Manifest {
  std::string stage;
  Json inputs = Json::object();
  Json outputs = Json::object();
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& primary) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(primary + ".manifest.json", {{"stage", stage},
                                            {"inputs", inputs},
                                            {"outputs", outputs},
                                            {"config", config},
                                            {"seed", seed},
                                            {"tool_version", kToolVersion},
                                            {"wall_seconds", wall}});
  }
};

struct Preset {
  std::string name = "desk";
  bool paper() const { return name == "paper"; }
};

void add_preset(CLI::App* cmd, Preset& p) {
  cmd->add_option("--preset", p.name, "Default profile")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
}

// Volume input accepts a density JSON (rasterized) or a vol3 file.
bool is_json(const std::string& path) { return path.size() >= 5 && path.substr(path.size() - 5) == ".json"; }

Volume load_volume(const std::string& path) {
  if (is_json(path)) return rasterize(read_density(path));
  return read_volume(path);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"3D density reconstruction from unoriented projections (OMR-SC)", "omrsc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);

  // gen
  auto* gen = app.add_subcommand("gen", "Random-walk density phantom");
  Preset gen_preset;
  add_preset(gen, gen_preset);
  int steps = 50, gen_G = 0;
  double mass = kDefaultMass, tau = kDefaultTau;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_volume;
  gen->add_option("--steps", steps, "Random-walk steps")->capture_default_str()->check(CLI::PositiveNumber);
  auto* gen_G_opt = gen->add_option("--G", gen_G, "Grid side (odd); preset default 21 or 101");
  gen->add_option("--mass", mass, "Total mass")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--tau", tau, "Bump width")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out, "Density JSON")->required();
  gen->add_option("--volume", gen_volume, "Also write the rasterized vol3");

  // project
  auto* project = app.add_subcommand("project", "Noiseless projections at uniform random views");
  std::string proj_density, proj_out;
  int proj_N = 2000;
  std::uint64_t proj_seed = 0;
  project->add_option("--density", proj_density, "Density JSON")->required()->check(CLI::ExistingFile);
  project->add_option("--N", proj_N, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
  project->add_option("--seed", proj_seed)->capture_default_str();
  project->add_option("--out", proj_out, "proj2d dataset")->required();

  // noise
  auto* noise = app.add_subcommand("noise", "Add white Gaussian noise at a target SNR");
  std::string noise_in, noise_out;
  double snr = 0.1;
  std::uint64_t noise_seed = 0;
  noise->add_option("--dataset", noise_in, "proj2d dataset")->required()->check(CLI::ExistingFile);
  noise->add_option("--snr", snr)->capture_default_str()->check(CLI::PositiveNumber);
  noise->add_option("--seed", noise_seed)->capture_default_str();
  noise->add_option("--out", noise_out, "proj2d dataset")->required();

  // features
  auto* features = app.add_subcommand("features", "Radial and autocorrelation features");
  Preset feat_preset;
  add_preset(features, feat_preset);
  std::string feat_in, feat_out, feat_domain = "fourier", feat_params_file;
  FeatureParams fp;
  bool no_debias = false;
  features->add_option("--dataset", feat_in, "proj2d dataset")->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out, "momfeat file")->required();
  features->add_option("--domain", feat_domain)->check(CLI::IsMember({"fourier", "spatial"}))->capture_default_str();
  features->add_option("--params", feat_params_file, "JSON with any of k_max, U, Phi, V, Psi, L")->check(CLI::ExistingFile);
  auto* o_kmax = features->add_option("--k-max", fp.k_max);
  auto* o_U = features->add_option("--U", fp.U)->check(CLI::PositiveNumber);
  auto* o_Phi = features->add_option("--Phi", fp.Phi)->check(CLI::PositiveNumber);
  auto* o_V = features->add_option("--V", fp.V)->check(CLI::PositiveNumber);
  auto* o_Psi = features->add_option("--Psi", fp.Psi)->check(CLI::NonNegativeNumber);
  auto* o_fL = features->add_option("--L", fp.L)->check(CLI::NonNegativeNumber);
  features->add_flag("--no-debias", no_debias, "Skip noise-bias subtraction");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "OMR-SC reconstruction from features");
  Preset recon_preset;
  add_preset(recon, recon_preset);
  std::string rec_features, rec_dataset, rec_config, rec_out, rec_report, rec_volume, rec_mode, rec_radial;
  bool ab_initio = false, no_nonneg = false, momentum = false, extrapolate = false;
  SolverConfig sc;
  recon->add_option("--features", rec_features, "momfeat file")->required()->check(CLI::ExistingFile);
  recon->add_option("--dataset", rec_dataset, "proj2d dataset (reference images)")->required()->check(CLI::ExistingFile);
  recon->add_option("--config", rec_config, "Solver config JSON")->check(CLI::ExistingFile);
  recon->add_option("--out", rec_out, "Density JSON")->required();
  recon->add_option("--report", rec_report, "SolveReport JSON");
  recon->add_option("--volume", rec_volume, "Also write the rasterized vol3");
  recon->add_flag("--ab-initio", ab_initio, "Coarse ab initio stage, then refinement");
  auto* o_L = recon->add_option("--L", sc.L)->check(CLI::NonNegativeNumber);
  auto* o_lambda = recon->add_option("--lambda", sc.lambda)->check(CLI::NonNegativeNumber);
  auto* o_xi = recon->add_option("--xi", sc.xi)->check(CLI::NonNegativeNumber);
  auto* o_eta = recon->add_option("--eta", sc.eta)->check(CLI::NonNegativeNumber);
  auto* o_vs = recon->add_option("--varsigma", sc.varsigma)->check(CLI::PositiveNumber);
  auto* o_T = recon->add_option("--T", sc.T)->check(CLI::NonNegativeNumber);
  auto* o_inner = recon->add_option("--inner-steps", sc.inner_steps)->check(CLI::PositiveNumber);
  auto* o_inits = recon->add_option("--num-inits", sc.num_inits)->check(CLI::PositiveNumber);
  auto* o_mode = recon->add_option("--mode", rec_mode)->check(CLI::IsMember({"fourier", "spatial"}));
  auto* o_radial = recon->add_option("--radial-model", rec_radial)->check(CLI::IsMember({"exact", "bandlimited"}));
  auto* o_cG = recon->add_option("--coarse-G", sc.coarse_G);
  auto* o_rseed = recon->add_option("--seed", sc.seed);
  auto* o_mom = recon->add_flag("--momentum,!--no-momentum", momentum, "Accelerated w-update (default on)");
  auto* o_ext = recon->add_flag("--extrapolate,!--no-extrapolate", extrapolate, "Extrapolate w across outer iterations (default on)");
  auto* o_nn = recon->add_flag("--no-nonneg", no_nonneg, "Drop the nonnegativity constraint");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "FSC, resolution and correlation against a truth volume");
  std::string ev_recon, ev_truth, ev_out, ev_csv, ev_dataset, ev_report;
  double cutoff = 0.5;
  int ev_reference = -1;
  evaluate_cmd->add_option("--recon", ev_recon, "Density JSON or vol3")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--truth", ev_truth, "Density JSON or vol3")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", ev_out, "EvaluationReport JSON")->required();
  evaluate_cmd->add_option("--fsc-csv", ev_csv, "FSC curve CSV");
  evaluate_cmd->add_option("--cutoff", cutoff)->capture_default_str();
  evaluate_cmd->add_option("--dataset", ev_dataset, "proj2d with hidden rotations; scores in the reference view's frame")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--report", ev_report, "SolveReport naming the chosen reference")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--reference", ev_reference, "Reference image index")->check(CLI::NonNegativeNumber);

  // plot
  auto* plot = app.add_subcommand("plot", "CSV curves from a solve or evaluation report");
  std::string plot_in, plot_out;
  plot->add_option("--report", plot_in, "SolveReport or EvaluationReport JSON")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_arguments;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    Manifest man;
    if (*gen) {
      const int G = gen_G_opt->count() ? gen_G : (gen_preset.paper() ? 101 : 21);
      man.stage = "gen";
      man.seed = gen_seed;
      man.config = {{"steps", steps}, {"G", G}, {"mass", mass}, {"tau", tau}, {"preset", gen_preset.name}};
      const DensityMap d = random_walk_density(steps, G, gen_seed, mass, tau);
      write_density(gen_out, d);
      man.outputs["density"] = gen_out;
      if (!gen_volume.empty()) {
        write_volume(gen_volume, rasterize(d), d.total_mass);
        man.outputs["volume"] = gen_volume;
      }
      man.write(gen_out);
    } else if (*project) {
      man.stage = "project";
      man.seed = proj_seed;
      man.inputs["density"] = proj_density;
      man.config = {{"N", proj_N}};
      const Dataset data = generate(read_density(proj_density), proj_N, proj_seed);
      write_dataset(proj_out, data);
      man.outputs["dataset"] = proj_out;
      man.write(proj_out);
    } else if (*noise) {
      man.stage = "noise";
      man.seed = noise_seed;
      man.inputs["dataset"] = noise_in;
      man.config = {{"snr", snr}};
      const Dataset clean = read_dataset(noise_in);
      if (clean.sigma > 0.0) throw std::invalid_argument("--dataset '" + noise_in + "' is already noisy");
      write_dataset(noise_out, add_noise(clean, snr, noise_seed));
      man.outputs["dataset"] = noise_out;
      man.write(noise_out);
    } else if (*features) {
      FeatureParams p = feat_preset.paper() ? FeatureParams::paper() : FeatureParams::desk();
      if (!feat_params_file.empty()) p = feature_params_from_json(read_json(feat_params_file), p);
      if (o_kmax->count()) p.k_max = fp.k_max;
      if (o_U->count()) p.U = fp.U;
      if (o_Phi->count()) p.Phi = fp.Phi;
      if (o_V->count()) p.V = fp.V;
      if (o_Psi->count()) p.Psi = fp.Psi;
      if (o_fL->count()) p.L = fp.L;
      man.stage = "features";
      man.inputs["dataset"] = feat_in;
      man.config = {{"params", to_json(p)}, {"domain", feat_domain}, {"debias", !no_debias}, {"preset", feat_preset.name}};
      Dataset data = read_dataset(feat_in);
      man.seed = data.seed;
      const AutocorrTensor zero;
      const FeatureSet f = extract_features(data, p, domain_from_string(feat_domain), no_debias ? &zero : nullptr);
      write_features(feat_out, f);
      man.outputs["features"] = feat_out;
      man.write(feat_out);
    } else if (*recon) {
      const FeatureSet f = read_features(rec_features);
      const Domain default_mode = rec_mode.empty() ? Domain::fourier : domain_from_string(rec_mode);
      SolverConfig c = recon_preset.paper() ? SolverConfig::paper(default_mode) : SolverConfig::desk(default_mode);
      if (!rec_config.empty()) c = solver_config_from_json(read_json(rec_config), c);
      if (o_L->count()) c.L = sc.L;
      if (o_lambda->count()) c.lambda = sc.lambda;
      if (o_xi->count()) c.xi = sc.xi;
      if (o_eta->count()) c.eta = sc.eta;
      if (o_vs->count()) c.varsigma = sc.varsigma;
      if (o_T->count()) c.T = sc.T;
      if (o_inner->count()) c.inner_steps = sc.inner_steps;
      if (o_inits->count()) c.num_inits = sc.num_inits;
      if (o_mode->count()) c.mode = default_mode;
      if (o_radial->count()) c.radial_model = radial_model_from_string(rec_radial);
      if (o_cG->count()) c.coarse_G = sc.coarse_G;
      if (o_rseed->count()) c.seed = sc.seed;
      if (o_mom->count()) c.momentum = momentum;
      if (o_ext->count()) c.extrapolate = extrapolate;
      if (o_nn->count()) c.nonnegativity = !no_nonneg;
      c.L = std::min(c.L, f.L());
      c.validate();
      const Dataset data = read_dataset(rec_dataset);
      if (data.G() != f.G)
        throw std::invalid_argument("--dataset G = " + std::to_string(data.G()) + " but --features G = " + std::to_string(f.G));
      man.stage = "reconstruct";
      man.seed = c.seed;
      man.inputs = {{"features", rec_features}, {"dataset", rec_dataset}};
      if (!rec_config.empty()) man.inputs["config"] = rec_config;
      man.config = {{"solver", to_json(c)}, {"ab_initio", ab_initio}, {"preset", recon_preset.name}};
      Json report;
      DensityMap result;
      if (ab_initio) {
        if (c.coarse_G == 0) throw std::invalid_argument("--ab-initio needs --coarse-G > 0");
        const AbInitioResult r = ab_initio_refine(data, f, coarse_feature_params(f.params, f.G, c.coarse_G), c);
        result = r.refined.density;
        report = {{"coarse", to_json(r.coarse.report)}, {"refined", to_json(r.refined.report)}};
      } else {
        const SolveResult r = omr_sc(f, candidates_from(data, c), c);
        result = r.density;
        report = to_json(r.report);
      }
      write_density(rec_out, result);
      man.outputs["density"] = rec_out;
      if (!rec_report.empty()) {
        write_json(rec_report, report);
        man.outputs["report"] = rec_report;
      }
      if (!rec_volume.empty()) {
        write_volume(rec_volume, rasterize(result), result.total_mass);
        man.outputs["volume"] = rec_volume;
      }
      man.write(rec_out);
    } else if (*evaluate_cmd) {
      man.stage = "evaluate";
      man.inputs = {{"recon", ev_recon}, {"truth", ev_truth}};
      man.config = {{"cutoff", cutoff}};
      if (!ev_report.empty() && ev_reference < 0) {
        Json rep = read_json(ev_report);
        if (rep.contains("refined")) rep = rep["refined"];
        if (!rep.contains("chosen_reference")) throw FormatError("'" + ev_report + "': no chosen_reference");
        ev_reference = rep["chosen_reference"].get<int>();
        man.inputs["report"] = ev_report;
      }
      Volume truth;
      if (ev_reference >= 0) {
        if (ev_dataset.empty()) throw std::invalid_argument("--report/--reference need --dataset");
        if (!is_json(ev_truth)) throw std::invalid_argument("--report/--reference need a density JSON --truth");
        const Dataset data = read_dataset(ev_dataset);
        if (!data.hidden_rotations || ev_reference >= data.N())
          throw std::invalid_argument("--dataset has no hidden rotation for reference " + std::to_string(ev_reference));
        const DensityMap d = read_density(ev_truth);
        truth = rasterize(d.mixture().rotated((*data.hidden_rotations)[std::size_t(ev_reference)]), d.grid.G);
        man.inputs["dataset"] = ev_dataset;
        man.config["reference"] = ev_reference;
      } else {
        truth = load_volume(ev_truth);
      }
      const EvaluationReport r = best_handedness(load_volume(ev_recon), truth, cutoff);
      write_json(ev_out, to_json(r));
      man.outputs["report"] = ev_out;
      if (!ev_csv.empty()) {
        write_fsc_csv(ev_csv, r.fsc);
        man.outputs["fsc_csv"] = ev_csv;
      }
      man.write(ev_out);
    } else if (*plot) {
      man.stage = "plot";
      man.inputs["report"] = plot_in;
      const Json j = read_json(plot_in);
      if (j.contains("fsc")) {
        FscCurve curve;
        try {
          curve.k = j["fsc"].at("k").get<std::vector<double>>();
          curve.value = j["fsc"].at("value").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
          throw FormatError("'" + plot_in + "': malformed fsc block");
        }
        write_fsc_csv(plot_out, curve);
      } else {
        const Json& solve = j.contains("refined") ? j["refined"] : j;
        if (!solve.contains("inits")) throw FormatError("'" + plot_in + "' is neither a solve nor an evaluation report");
        SolveReport rep;
        try {
          for (const Json& i : solve["inits"]) {
            InitRecord rec;
            if (i.contains("objective_trace")) rec.objective_trace = i["objective_trace"].get<std::vector<double>>();
            if (i.contains("grad_norm_trace")) rec.grad_norm_trace = i["grad_norm_trace"].get<std::vector<std::vector<double>>>();
            rep.inits.push_back(std::move(rec));
          }
        } catch (const nlohmann::json::exception&) {
          throw FormatError("'" + plot_in + "': malformed trace arrays");
        }
        write_trace_csv(plot_out, rep);
      }
      man.outputs["csv"] = plot_out;
      man.write(plot_out);
    }
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return format_error;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  } catch (const EmptyGridError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bad arguments: " << e.what() << "\n";
    return bad_arguments;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace omrsc::cli
