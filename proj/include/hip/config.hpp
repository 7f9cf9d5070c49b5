#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "hip/datakit.hpp"
#include "hip/evalbench.hpp"
#include "hip/imitative.hpp"
#include "hip/planner.hpp"
#include "hip/worldsim.hpp"

namespace hip {

using nlohmann::json;

/// Every tunable of the pipeline in one place.
struct Settings {
  std::uint64_t seed = 0;  // master seed

  Vec2 extent{40.0, 40.0};
  WorldParams world;

  CollectConfig collect;
  int train_worlds = 10;
  long steps_per_world = 20000;

  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  BcConfig bc;
  int library_k = 200;
  int library_iterations = 100;

  PlannerConfig planner;
  Gains gains;

  EvalConfig eval;
  int episodes = 100;
  int eval_worlds = 10;
  double oracle_resolution = 0.5;
  std::vector<double> sweep{0.0, 0.25, 0.5, 0.75, 1.0};
};

json to_json(const Settings& s);
/// Reads a complete document (as produced by to_json). Throws on missing
/// keys, unknown keys and wrong types.
Settings settings_from_json(const json& j);

/// Overlays patch onto base; every key of patch must already exist in base
/// with a compatible type.
void overlay_config(json& base, const json& patch);

/// Applies "dotted.key=value"; value is parsed as JSON, falling back to a
/// plain string.
void apply_override(json& config, const std::string& assignment);

/// defaults < file (if non-empty path) < overrides.
Settings load_settings(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace hip
