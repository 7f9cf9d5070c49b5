#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hip/common.hpp"

namespace hip {

enum class ObstacleKind { tree, rock, grass, bush, wall, novel };
enum class Profile { in_distribution, out_of_distribution };

std::string to_string(ObstacleKind kind);
std::string to_string(Profile profile);
ObstacleKind obstacle_kind_from_string(const std::string& s);
Profile profile_from_string(const std::string& s);

using Rgb = std::array<double, 3>;

struct Obstacle {
  ObstacleKind kind = ObstacleKind::tree;
  Vec2 center = Vec2::Zero();
  // Circles use half_extents.x() as the radius; walls are axis-aligned
  // rectangles with these half extents.
  Vec2 half_extents = Vec2::Zero();
  double height = 0.0;
  Rgb appearance{0.0, 0.0, 0.0};
  bool traversable = false;

  bool is_rectangle() const { return kind == ObstacleKind::wall; }
  double radius() const { return half_extents.x(); }

  /// Signed distance from p to the obstacle boundary (negative inside).
  double signed_distance(const Vec2& p) const;
  bool contains(const Vec2& p) const { return signed_distance(p) <= 0.0; }
};

/// Per-kind placement parameters. Densities are obstacles per 100 m^2.
struct KindParams {
  double density = 0.0;
  double min_size = 0.3;
  double max_size = 0.5;
};

struct WorldParams {
  KindParams tree{0.8, 0.15, 0.35};
  KindParams bush{0.8, 0.3, 0.55};
  KindParams rock{1.0, 0.2, 0.4};
  KindParams grass{0.6, 1.0, 1.8};
  // Out-of-distribution extras. Wall sizes are half lengths; thickness fixed.
  KindParams wall{0.12, 0.5, 0.9};
  KindParams novel{2.0, 0.3, 0.55};
  double wall_half_thickness = 0.15;

  double height_tree = 2.0;
  double height_wall = 2.0;
  double height_bush = 0.25;
  double height_grass = 0.5;
  double height_rock = 0.2;
  double height_novel = 0.5;

  Rgb ground{0.50, 0.42, 0.30};
  Rgb color_tree{0.30, 0.22, 0.12};
  Rgb color_bush{0.18, 0.36, 0.14};
  Rgb color_grass{0.56, 0.76, 0.32};
  Rgb color_rock{0.62, 0.62, 0.64};
  double color_jitter = 0.04;
  // Novel and wall appearances are drawn from this box: a lighter green that
  // sits next to grass, so a rigid novel obstacle reads as vegetation.
  Rgb novel_lo{0.50, 0.82, 0.34};
  Rgb novel_hi{0.62, 0.92, 0.42};

  double grass_slowdown = 0.7;
  double robot_radius = 0.3;
  // Minimum free gap between rigid obstacles.
  double corridor = 1.0;
  double border_margin = 1.0;
  double connectivity_cell = 0.5;
  int max_tries = 400;
};

struct WorldSpec {
  std::uint64_t seed = 0;
  Vec2 extent{40.0, 40.0};  // geofence [-w/2, w/2] x [-h/2, h/2]
  std::vector<Obstacle> obstacles;
  double grass_slowdown = 0.7;
  double robot_radius = 0.3;
  Profile profile = Profile::in_distribution;
  Rgb ground{0.50, 0.42, 0.30};
  double max_height = 2.0;

  bool inside_geofence(const Vec2& p, double margin = 0.0) const {
    return std::abs(p.x()) <= 0.5 * extent.x() - margin &&
           std::abs(p.y()) <= 0.5 * extent.y() - margin;
  }

  /// Clearance from the robot center to the nearest rigid obstacle or the
  /// geofence (not reduced by the robot radius).
  double rigid_clearance(const Vec2& p) const;
  bool in_grass(const Vec2& p) const;
  /// True if a robot centered at p overlaps nothing rigid.
  bool is_free(const Vec2& p, double extra_margin = 0.0) const {
    return rigid_clearance(p) >= robot_radius + extra_margin;
  }
};

struct RobotState {
  Pose pose;
  double time = 0.0;
};

struct Action {
  double linear = 0.0;   // m/s
  double angular = 0.0;  // rad/s
};

/// The discrete grid sampled by random policies.
std::span<const Action> discrete_actions();

struct SensorConfig {
  double lidar_plane_height = 0.3;
  int n_rays = 360;
  double max_range = 10.0;
  double patch_extent = 10.0;
  int patch_cells = 100;
  double patch_noise = 0.02;
};

/// Egocentric RGB-D surrogate. Row index runs forward from the robot, column
/// index runs from left (+y) to right (-y). Channels: appearance rgb, height.
struct Patch {
  int rows = 0;
  int cols = 0;
  static constexpr int kChannels = 4;
  std::vector<float> data;

  Patch() = default;
  Patch(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c * kChannels, 0.0f) {}
  float& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * cols + c) * kChannels + ch]; }
  float at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * cols + c) * kChannels + ch]; }
};

/// Average-pools each factor x factor block; rows and cols must divide.
Patch pool_patch(const Patch& patch, int factor);

struct Observation {
  Pose pose;
  std::vector<Vec2> pointcloud;  // local frame
  Patch patch;
  std::vector<Vec2> past_positions;  // oldest first, last entry is the origin
};

enum class CollisionKind { stuck, trapped };
std::string to_string(CollisionKind kind);

struct CollisionEvent {
  CollisionKind kind = CollisionKind::stuck;
  double time = 0.0;
};

struct HistorySample {
  double time = 0.0;
  Vec2 position = Vec2::Zero();
  double commanded_linear = 0.0;
};

struct CollisionConfig {
  double stuck_duration = 4.0;
  double stuck_eps = 0.05;
  double trapped_window = 10.0;
  double trapped_distance = 3.0;
};

/// Raised when rejection sampling cannot place the requested obstacles.
class WorldGenError : public Error {
 public:
  using Error::Error;
};

WorldSpec generate_world(std::uint64_t seed, const Vec2& extent, Profile profile,
                         const WorldParams& params = {});

/// Unicycle update with contact blocking and grass slowdown.
RobotState step(const WorldSpec& world, const RobotState& state, const Action& action, double dt);

/// Planar lidar; points in the robot's local frame.
std::vector<Vec2> raycast_lidar(const WorldSpec& world, const Pose& pose,
                                const SensorConfig& sensor = {});

Patch render_patch(const WorldSpec& world, const Pose& pose, std::uint64_t noise_seed,
                   const SensorConfig& sensor = {});

/// Evaluates both collision heuristics on a time-ordered history ending at the
/// current step. Stuck wins when both fire.
std::optional<CollisionEvent> detect_collision(std::span<const HistorySample> history,
                                               const CollisionConfig& config = {});

/// Rolling-window wrapper around detect_collision for closed-loop use.
class CollisionMonitor {
 public:
  explicit CollisionMonitor(CollisionConfig config = {}) : config_(config) {}
  std::optional<CollisionEvent> push(const HistorySample& sample);
  void reset() { history_.clear(); }

 private:
  CollisionConfig config_;
  std::vector<HistorySample> history_;
};

/// Samples a collision-free pose inside the geofence; nullopt after max_tries.
std::optional<Pose> sample_free_pose(const WorldSpec& world, Rng& rng, double clearance,
                                     int max_tries = 1000);

}  // namespace hip
