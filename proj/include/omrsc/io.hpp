#pragma once

#include "omrsc/density.hpp"
#include "omrsc/evaluate.hpp"
#include "omrsc/features.hpp"
#include "omrsc/simulate.hpp"
#include "omrsc/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace omrsc {

using Json = nlohmann::json;

// Unreadable, truncated, or inconsistent input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kFormatVersion = 1;

// Binary files carry a 4-byte magic and a u32 version; vol3 and proj2d also
// get a JSON sidecar at path + ".json".
void write_volume(const std::string& path, const Volume& v, double total_mass);
Volume read_volume(const std::string& path, double* total_mass = nullptr);

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

// momfeat: magic, version, u64 header length, JSON header, f64 blocks.
void write_features(const std::string& path, const FeatureSet& f);
FeatureSet read_features(const std::string& path);

Json to_json(const DensityMap& d);
DensityMap density_from_json(const Json& j);
void write_density(const std::string& path, const DensityMap& d);
DensityMap read_density(const std::string& path);

Json to_json(const FeatureParams& p);
// Missing fields keep the value from base.
FeatureParams feature_params_from_json(const Json& j, FeatureParams base = {});
Json to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const Json& j, SolverConfig base = {});

Json to_json(const Terms& t);
Json to_json(const SolveReport& r);
Json to_json(const EvaluationReport& r);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

void write_fsc_csv(const std::string& path, const FscCurve& curve);
// One row per outer iteration per init: init, iteration, objective, then one
// gradient-norm column per degree.
void write_trace_csv(const std::string& path, const SolveReport& report);

}  // namespace omrsc
