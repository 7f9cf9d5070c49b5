#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hip/config.hpp"
#include "hip/evalbench.hpp"

namespace hip {

/// Worlds for one role ("train", "eval", "ood"), seeded from the master seed.
std::vector<WorldSpec> make_worlds(const Settings& s, const std::string& role, int count, Profile profile);

/// Collects in every world and merges the resulting datasets.
Dataset build_dataset(const Settings& s, const std::vector<WorldSpec>& worlds, std::ostream* log = nullptr);

struct PipelineResult {
  std::vector<MetricsReport> main;      // every method, both environments
  std::vector<MetricsReport> sweep;     // hybrid over phi, in-distribution
  std::vector<MetricsReport> ablation;  // learner_only per channel mask
  std::size_t dataset_size = 0;
  double seconds = 0.0;
};

/// Runs the whole recipe from the master seed and writes every artifact,
/// report and a manifest under run_dir.
PipelineResult run_pipeline(const Settings& s, const std::filesystem::path& run_dir, std::ostream* log = nullptr);

/// Channel masks evaluated by the ablation, by name.
std::vector<std::pair<std::string, std::array<float, 4>>> ablation_modes();

}  // namespace hip
