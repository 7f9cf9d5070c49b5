#include "hip/planner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace hip {

double directive_cost(std::span<const Vec2> trajectory_world, const Pose& pose, const Vec2& goal,
                      const DirectiveRegion& region, double delta) {
  const Vec2 to_goal = goal - pose.position();
  const double dist = to_goal.norm();
  if (!(dist > 1e-9)) throw Error("directive_cost: goal coincides with the robot position");
  if (trajectory_world.empty()) return delta;
  const Vec2 axis = to_goal / dist;
  const Vec2 rel = trajectory_world.back() - pose.position();
  const double along = rel.dot(axis);
  const double across = std::abs(axis.x() * rel.y() - axis.y() * rel.x());
  const bool inside = along >= region.near && along <= region.near + region.length && across <= 0.5 * region.width;
  return inside ? 0.0 : delta;
}

CostTerms combine_terms(double directive, double log_prob, double costmap_sum, const PlannerConfig& config) {
  CostTerms t;
  t.directive = directive;
  if (std::isfinite(log_prob)) {
    t.learned = std::min(-log_prob, config.eta);
  } else {
    t.learned = config.eta;
    t.learned_invalid = true;
  }
  t.costmap = costmap_sum;
  t.total = directive + (1.0 - config.phi) * t.learned + config.phi * costmap_sum;
  return t;
}

CostTerms combined_cost(const Trajectory& trajectory_local, const Observation& observation,
                        const ImitativeModel& model, const Costmap& costmap, const Vec2& goal,
                        const PlannerConfig& config) {
  const Trajectory world = to_world(observation.pose, trajectory_local);
  const double dir = directive_cost(world, observation.pose, goal, config.region, config.delta);
  double lp;
  try {
    lp = log_prob(model, encode(model, observation), trajectory_local);
  } catch (const Error&) {
    lp = std::numeric_limits<double>::quiet_NaN();
  }
  return combine_terms(dir, lp, traj_cost(costmap, world), config);
}

Costmap observation_costmap(const Observation& observation, const PlannerConfig& config) {
  return normalize(build_raw(observation.pointcloud, observation.pose, config.grid), config.eta / 10.0,
                   config.normalize);
}

Plan plan(const TrajectoryLibrary& library, const ImitativeModel* model, const Costmap& costmap,
          const Observation& observation, const Vec2& goal, const PlannerConfig& config) {
  if (library.centroids.empty()) throw Error("plan: empty trajectory library");
  if (config.phi < 0.0 || config.phi > 1.0) throw Error("plan: phi must lie in [0, 1]");
  const bool use_model = config.phi < 1.0;
  if (use_model && !model) throw Error("plan: a model is required when phi < 1");

  std::vector<double> lp(library.size(), 0.0);
  if (use_model) lp = log_prob_batch(*model, encode(*model, observation), library.centroids);

  Plan p;
  p.breakdown.reserve(library.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < library.size(); ++k) {
    const Trajectory world = to_world(observation.pose, library.centroids[k]);
    const double dir = directive_cost(world, observation.pose, goal, config.region, config.delta);
    CostTerms t = combine_terms(dir, lp[k], traj_cost(costmap, world), config);
    if (!use_model) {
      t.learned = 0.0;
      t.total = t.directive + config.phi * t.costmap;
    }
    if (t.total < best) {
      best = t.total;
      p.index = k;
    }
    p.breakdown.push_back(t);
  }
  p.local = library.centroids[p.index];
  p.world = to_world(observation.pose, p.local);
  return p;
}

void write_breakdown_csv(std::ostream& out, const Plan& plan) {
  out << "candidate,directive,learned,costmap,total,chosen\n";
  for (std::size_t k = 0; k < plan.breakdown.size(); ++k) {
    const auto& t = plan.breakdown[k];
    out << k << ',' << t.directive << ',' << t.learned << ',' << t.costmap << ',' << t.total << ','
        << (k == plan.index ? 1 : 0) << '\n';
  }
}

Action track(std::span<const Vec2> waypoints, const RobotState& state, const Gains& gains,
             ControllerMemory& memory, double dt) {
  if (waypoints.empty()) return {};
  const Vec2 pos = state.pose.position();
  std::size_t i = std::min(memory.target, waypoints.size() - 1);
  while (i + 1 < waypoints.size() && (waypoints[i] - pos).norm() < gains.lookahead) ++i;
  memory.target = i;

  const Vec2 rel = waypoints[i] - pos;
  const double dist = rel.norm();
  if (dist < gains.stop_radius) {
    memory.has_previous = false;
    return {0.0, 0.0};
  }
  const double error = wrap_angle(std::atan2(rel.y(), rel.x()) - state.pose.heading);
  const double rate = memory.has_previous && dt > 0.0 ? wrap_angle(error - memory.previous_error) / dt : 0.0;
  memory.integral += error * dt;
  memory.previous_error = error;
  memory.has_previous = true;

  Action a;
  a.angular = std::clamp(gains.kp * error + gains.kd * rate + gains.ki * memory.integral, -gains.omega_max,
                         gains.omega_max);
  a.linear = std::min(gains.v_max, gains.kv * dist) * std::max(0.0, std::cos(error));
  return a;
}

}  // namespace hip
