#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "hip/common.hpp"
#include "hip/datakit.hpp"
#include "hip/geomcost.hpp"
#include "hip/imitative.hpp"
#include "hip/worldsim.hpp"

namespace hip {

/// Goal-ward rectangle: its axis starts at the robot and points at the goal;
/// it covers [near, near + length] along the axis and width/2 to either side.
/// The boundary counts as inside.
struct DirectiveRegion {
  double width = 2.0;
  double near = 1.0;
  double length = 4.0;
};

struct PlannerConfig {
  double phi = 0.75;
  double eta = 64.0;
  double delta = 129.0;  // 2 * eta + 1
  double replan_hz = 1.0;
  DirectiveRegion region;
  GridSpec grid;
  NormalizeMode normalize = NormalizeMode::cellwise;
};

/// 0 if the last point of the world-frame trajectory lies in the region, delta
/// otherwise. Throws if goal coincides with the pose position.
double directive_cost(std::span<const Vec2> trajectory_world, const Pose& pose, const Vec2& goal,
                      const DirectiveRegion& region, double delta);

struct CostTerms {
  double directive = 0.0;
  double learned = 0.0;   // min(-log q, eta)
  double costmap = 0.0;   // summed over the trajectory
  double total = 0.0;
  bool learned_invalid = false;  // log q was not finite; learned was set to the floor
};

/// Clamps the learned term and assembles the criterion from its parts.
CostTerms combine_terms(double directive, double log_prob, double costmap_sum, const PlannerConfig& config);

CostTerms combined_cost(const Trajectory& trajectory_local, const Observation& observation,
                        const ImitativeModel& model, const Costmap& costmap, const Vec2& goal,
                        const PlannerConfig& config);

struct Plan {
  std::size_t index = 0;
  Trajectory local;
  Trajectory world;
  std::vector<CostTerms> breakdown;  // one entry per library candidate
};

/// Minimizes the criterion over the library; ties go to the lowest index.
/// model may be null only when phi == 1, in which case the learned term is
/// not evaluated and reported as 0.
Plan plan(const TrajectoryLibrary& library, const ImitativeModel* model, const Costmap& costmap,
          const Observation& observation, const Vec2& goal, const PlannerConfig& config);

/// Costmap for an observation as the planner builds it.
Costmap observation_costmap(const Observation& observation, const PlannerConfig& config);

void write_breakdown_csv(std::ostream& out, const Plan& plan);

struct Gains {
  double kp = 1.5;
  double kd = 0.1;
  double ki = 0.0;
  double kv = 1.0;
  double v_max = 1.0;
  double omega_max = 1.0;
  double lookahead = 0.5;
  double stop_radius = 0.05;
};

/// Controller state owned by one episode; reset whenever the plan changes.
struct ControllerMemory {
  std::size_t target = 0;
  double previous_error = 0.0;
  double integral = 0.0;
  bool has_previous = false;
};

/// Position-tracking controller over world-frame waypoints.
Action track(std::span<const Vec2> waypoints, const RobotState& state, const Gains& gains,
             ControllerMemory& memory, double dt);

}  // namespace hip
