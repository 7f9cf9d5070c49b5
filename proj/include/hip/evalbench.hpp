#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hip/common.hpp"
#include "hip/datakit.hpp"
#include "hip/imitative.hpp"
#include "hip/nn.hpp"
#include "hip/planner.hpp"
#include "hip/worldsim.hpp"

namespace hip {

struct EvalConfig {
  double dt = 1.0 / 30.0;
  double f_tau = 5.0;
  double timeout = 120.0;
  double goal_radius = 2.0;
  double min_goal_distance = 10.0;
  double max_goal_distance = 20.0;
  double spawn_clearance = 1.0;
  SensorConfig sensor;
  CollisionConfig collision;
};

struct EpisodeSpec {
  std::size_t world = 0;  // index into the evaluated world list
  std::uint64_t world_seed = 0;
  Pose start;
  Vec2 goal = Vec2::Zero();
  double timeout = 120.0;
  double goal_radius = 2.0;
  std::uint64_t noise_seed = 0;
};

/// Seeded start/goal pairs, round-robin over worlds. The start heading faces
/// the goal.
std::vector<EpisodeSpec> make_specs(const std::vector<WorldSpec>& worlds, int n, std::uint64_t seed,
                                    const EvalConfig& config = {});

enum class Outcome { success, stuck, trapped, timeout, no_path };
std::string to_string(Outcome outcome);

struct EpisodeResult {
  Outcome outcome = Outcome::timeout;
  double path_length = 0.0;
  double elapsed = 0.0;
  Pose final_pose;
};

/// What a policy may look at during an episode.
class EpisodeView {
 public:
  EpisodeView(const WorldSpec& world, const EpisodeSpec& spec, const EvalConfig& config);

  const WorldSpec& world() const { return world_; }
  const EpisodeSpec& spec() const { return spec_; }
  const EvalConfig& config() const { return config_; }
  const RobotState& state() const { return state_; }
  long step_index() const { return step_; }

  /// Sensor observation at the current step; past positions are sampled at
  /// f_tau and padded with the start position.
  Observation observe(int past = 10) const;

  void advance(const RobotState& next);

 private:
  const WorldSpec& world_;
  const EpisodeSpec& spec_;
  const EvalConfig& config_;
  RobotState state_;
  long step_ = 0;
  std::vector<Vec2> positions_;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const EpisodeView& view) = 0;
  virtual Action act(const EpisodeView& view) = 0;
  /// True if the policy already knows the episode cannot be completed.
  virtual bool gave_up() const { return false; }
};

EpisodeResult run_episode(const WorldSpec& world, Policy& policy, const EpisodeSpec& spec,
                          const EvalConfig& config = {});

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

class PlannerPolicy : public Policy {
 public:
  PlannerPolicy(const TrajectoryLibrary& library, const ImitativeModel* model, PlannerConfig config,
                Gains gains = {});
  void reset(const EpisodeView& view) override;
  Action act(const EpisodeView& view) override;

 private:
  const TrajectoryLibrary& library_;
  const ImitativeModel* model_;
  PlannerConfig config_;
  Gains gains_;
  ControllerMemory memory_;
  Trajectory waypoints_;
  long period_ = 30;
};

class StraightPolicy : public Policy {
 public:
  explicit StraightPolicy(Gains gains = {}) : gains_(gains) {}
  void reset(const EpisodeView&) override { memory_ = {}; }
  Action act(const EpisodeView& view) override;

 private:
  Gains gains_;
  ControllerMemory memory_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(CollectConfig config = {}) : config_(config) {}
  void reset(const EpisodeView& view) override;
  Action act(const EpisodeView& view) override;

 private:
  CollectConfig config_;
  std::optional<StickyRandomPolicy> sticky_;
};

/// Grid A* over the geofence. Cells whose centers are closer than the robot
/// radius to anything rigid are blocked; grass is free. 8-connected without
/// corner cutting. Returns start, cell centers, goal.
std::optional<Trajectory> astar(const WorldSpec& world, const Vec2& start, const Vec2& goal, double resolution);
double path_length(std::span<const Vec2> path);

class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(double resolution = 0.5, Gains gains = {}) : resolution_(resolution), gains_(gains) {}
  void reset(const EpisodeView& view) override;
  Action act(const EpisodeView& view) override;
  bool gave_up() const override { return !path_; }

 private:
  double resolution_;
  Gains gains_;
  ControllerMemory memory_;
  std::optional<Trajectory> path_;
};

// ---------------------------------------------------------------------------
// Behavior cloning baseline
// ---------------------------------------------------------------------------

struct BcConfig {
  int patch_rows = 20;
  int patch_cols = 20;
  int pool_factor = 5;
  int past = 10;
  std::vector<int> encoder_hidden{128, 64};
  std::vector<int> head_hidden{64, 64};
  std::array<float, 4> channel_mask{1.0f, 1.0f, 1.0f, 1.0f};
  // Pooled patch samples around the robot, as the learner's step network
  // reads them around its previous point.
  double patch_extent = 10.0;
  std::vector<std::array<double, 2>> local_offsets{{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}};
  double goal_reach = 2.0;  // goal input at eval: unit direction to d times this
  double replan_hz = 5.0;
};

struct BcModel {
  BcConfig config;
  nn::ParamVector params;
  std::uint64_t train_seed = 0;
  ChannelStats channels;
  nn::Mlp encoder;
  nn::Mlp head;
};

BcModel make_bc(const BcConfig& config, std::uint64_t seed);
void rebuild(BcModel& model);

/// Predicted first displacement for a pooled patch, past positions and a
/// local-frame goal.
Vec2 bc_predict(const BcModel& model, const Patch& pooled, std::span<const Vec2> past, const Vec2& goal);

struct BcTrainResult {
  BcModel model;
  std::vector<double> epoch_loss;
};

/// Regresses the first future displacement given the hindsight goal (the
/// example's final future point). Mean squared error, Adam.
BcTrainResult train_bc(const Dataset& dataset, const TrainConfig& config, const BcConfig& bc_config = {});

class BcPolicy : public Policy {
 public:
  explicit BcPolicy(const BcModel& model, Gains gains = {}) : model_(model), gains_(gains) {}
  void reset(const EpisodeView& view) override;
  Action act(const EpisodeView& view) override;

 private:
  const BcModel& model_;
  Gains gains_;
  ControllerMemory memory_;
  Trajectory waypoints_;
  long period_ = 6;
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

enum class Method { hybrid, learner_only, costmap_only, bc, straight, random, oracle };
std::string to_string(Method method);
Method method_from_string(const std::string& s);

struct MetricsReport {
  std::string method;
  double phi = 0.0;
  std::string environment;
  std::size_t episodes = 0;
  std::size_t success = 0, stuck = 0, trapped = 0, timeout = 0, no_path = 0;
  double raw_rate = 0.0;
  double normalized_rate = 0.0;
  double ci = 0.0;  // 95% binomial half-width
};

/// Everything a method may need; unused members may be null.
struct EvalAssets {
  const TrajectoryLibrary* library = nullptr;
  const ImitativeModel* model = nullptr;
  const BcModel* bc = nullptr;
  PlannerConfig planner;
  Gains gains;
  CollectConfig random;
  double oracle_resolution = 0.5;
};

std::unique_ptr<Policy> make_policy(Method method, double phi, const EvalAssets& assets);

std::vector<EpisodeResult> run_episodes(Method method, double phi, const std::vector<WorldSpec>& worlds,
                                        const std::vector<EpisodeSpec>& specs, const EvalAssets& assets,
                                        const EvalConfig& config = {});

/// oracle_rate <= 0 leaves the normalized rate at 0.
MetricsReport summarize(const std::string& method, double phi, const std::string& environment,
                        const std::vector<EpisodeResult>& results, double oracle_rate);

/// Seeded specs, one method, one report.
MetricsReport evaluate(Method method, double phi, const std::vector<WorldSpec>& worlds, int n_episodes,
                       std::uint64_t seed, const EvalAssets& assets, const std::string& environment,
                       double oracle_rate, const EvalConfig& config = {});

void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> read_report_csv(std::istream& in);

/// Bar chart of normalized rates, or a line over phi when every report is a
/// hybrid sweep entry.
void write_report_svg(std::ostream& out, const std::vector<MetricsReport>& reports, const std::string& title);

}  // namespace hip
