#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hip/common.hpp"
#include "hip/worldsim.hpp"

namespace hip {

struct LogRecord {
  double time = 0.0;
  Pose pose;
  Action action;
  bool respawn = false;  // first record after a respawn
};

/// Raw self-supervised collection log at the simulator rate. Patches are not
/// stored; they are re-rendered from the world and a per-record noise seed.
struct RawLog {
  WorldSpec world;
  std::uint64_t seed = 0;
  double dt = 1.0 / 30.0;
  std::vector<LogRecord> records;
  std::vector<CollisionEvent> events;

  std::uint64_t patch_seed(std::size_t record) const { return derive_seed(seed, "patch", record); }
};

struct CollectConfig {
  double dt = 1.0 / 30.0;
  double sticky_min = 1.0;
  double sticky_max = 3.0;
  double spawn_clearance = 0.5;
  // Sampling weights over the discrete grid: linear {0, 0.5, 1.0} and
  // angular {-1, -0.5, 0, 0.5, 1}. Forward-biased so the sticky policy rarely
  // dawdles long enough to trip the trapped heuristic in open space.
  std::array<double, 3> linear_weights{0.05, 0.30, 0.65};
  std::array<double, 5> angular_weights{0.10, 0.20, 0.40, 0.20, 0.10};
  CollisionConfig collision;
};

/// Sticky random policy over the discrete action grid, shared by data
/// collection and the random baseline.
class StickyRandomPolicy {
 public:
  StickyRandomPolicy(std::uint64_t seed, const CollectConfig& config);
  Action next();
  void reset_hold() { hold_ = 0; }

 private:
  Rng rng_;
  CollectConfig config_;
  Action current_;
  long hold_ = 0;
};

RawLog collect(const WorldSpec& world, long steps, std::uint64_t seed, const CollectConfig& config = {});

struct Example {
  std::vector<Vec2> past;  // H_past local-frame points, oldest first; last is the origin
  Patch patch;             // pooled to the encoder resolution
  Trajectory future;       // H local-frame points
};

struct DatasetMeta {
  std::uint64_t collection_seed = 0;
  std::vector<std::uint64_t> world_seeds;
  double f_tau = 5.0;
  int horizon = 10;
  int past = 10;
  int patch_rows = 20;
  int patch_cols = 20;
  std::size_t windows_total = 0;
  std::size_t windows_dropped = 0;
};

struct Dataset {
  std::vector<Example> examples;
  DatasetMeta meta;
};

struct DatasetConfig {
  double f_tau = 5.0;
  int horizon = 10;
  int past = 10;
  // Windows ending this long before a collision's exclusion span are dropped too.
  double collision_margin = 2.0;
  int pool_factor = 5;
  SensorConfig sensor;
  CollisionConfig collision;
};

/// Time span [begin, end] that no example window may touch.
struct ExclusionSpan {
  double begin = 0.0;
  double end = 0.0;
};

std::vector<ExclusionSpan> exclusion_spans(const RawLog& log, const DatasetConfig& config);

Dataset make_dataset(const RawLog& log, const DatasetConfig& config = {});

/// Appends other's examples and world seeds into into.
void merge(Dataset& into, Dataset&& other);

struct TrajectoryLibrary {
  std::vector<Trajectory> centroids;
  std::size_t size() const { return centroids.size(); }
};

TrajectoryLibrary build_library(const Dataset& dataset, int k, std::uint64_t seed, int max_iterations = 100);

/// Sum over examples of the squared distance to the assigned centroid.
double within_cluster_ss(const std::vector<Trajectory>& points, const std::vector<Trajectory>& centroids);

}  // namespace hip
