#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "hip/planner.hpp"

using namespace hip;

namespace {

PlannerConfig region_3_to_7() {
  PlannerConfig c;
  c.region.near = 3.0;
  c.region.length = 4.0;
  c.region.width = 2.0;
  return c;
}

Observation random_observation(const ModelConfig& mc, Rng& rng) {
  Observation o;
  o.pose = Pose{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
  o.patch = testing::random_patch(mc.patch_rows * mc.pool_factor, mc.patch_cols * mc.pool_factor, rng);
  o.past_positions = testing::straight_past(mc.past);
  return o;
}

TrajectoryLibrary random_library(std::size_t k, Rng& rng) {
  TrajectoryLibrary lib;
  for (std::size_t i = 0; i < k; ++i) {
    Trajectory t;
    const double turn = rng.uniform(-0.3, 0.3), speed = rng.uniform(0.1, 0.7);
    double h = 0.0;
    Vec2 p = Vec2::Zero();
    for (int j = 0; j < 10; ++j) {
      h += turn;
      p += speed * Vec2(std::cos(h), std::sin(h));
      t.push_back(p);
    }
    lib.centroids.push_back(t);
  }
  return lib;
}

// Own rectangle test, written from the region definition.
double reference_directive(const Vec2& end, const Pose& pose, const Vec2& goal, const PlannerConfig& c) {
  const double theta = std::atan2(goal.y() - pose.y, goal.x() - pose.x);
  const Vec2 rel = end - pose.position();
  const double along = std::cos(theta) * rel.x() + std::sin(theta) * rel.y();
  const double across = -std::sin(theta) * rel.x() + std::cos(theta) * rel.y();
  const bool in = along >= c.region.near && along <= c.region.near + c.region.length &&
                  std::abs(across) <= c.region.width / 2;
  return in ? 0.0 : c.delta;
}

Costmap random_costmap(const Pose& pose, Rng& rng, const PlannerConfig& c) {
  std::vector<Vec2> pts;
  const int n = static_cast<int>(rng.below(60));
  for (int k = 0; k < n; ++k) pts.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5));
  return normalize(build_raw(pts, pose, c.grid), c.eta / 10, c.normalize);
}

}  // namespace

TEST_CASE("directive region membership") {
  const auto c = region_3_to_7();
  const Pose pose{};
  const Vec2 goal(20, 0);
  auto cost = [&](Vec2 end) {
    const std::vector<Vec2> t{Vec2(0.1, 0), end};
    return directive_cost(t, pose, goal, c.region, c.delta);
  };
  CHECK(cost(Vec2(3.5, 0)) == 0.0);
  CHECK(cost(Vec2(0, -5)) == 129.0);
  CHECK(cost(Vec2(3.0, 1.0)) == 0.0);
  CHECK(cost(Vec2(7.0, -1.0)) == 0.0);
  CHECK(cost(Vec2(7.01, 0)) == 129.0);
  CHECK(cost(Vec2(5.0, 1.01)) == 129.0);
  const std::vector<Vec2> t{Vec2(1, 1)};
  CHECK_THROWS_AS(directive_cost(t, pose, Vec2(0, 0), c.region, c.delta), Error);
}

TEST_CASE("directive region follows the goal direction") {
  const auto c = region_3_to_7();
  const Pose pose{1.0, 2.0, 2.5};  // heading is irrelevant
  const Vec2 goal(1.0, -10.0);
  const std::vector<Vec2> in{Vec2(1.5, -3.0)}, out{Vec2(1.5, 7.0)};
  CHECK(directive_cost(in, pose, goal, c.region, c.delta) == 0.0);
  CHECK(directive_cost(out, pose, goal, c.region, c.delta) == c.delta);
}

TEST_CASE("delta defaults to twice eta plus one") {
  const PlannerConfig c;
  CHECK(c.delta == 2 * c.eta + 1);
  CHECK(c.phi == 0.75);
}

TEST_CASE("combine_terms arithmetic") {
  auto c = region_3_to_7();
  c.phi = 0.5;
  const auto t = combine_terms(0.0, -10.0, 4.0, c);
  CHECK(t.learned == 10.0);
  CHECK(t.total == 7.0);
  // Learned term is clamped at eta, non-finite values go to the clamp and are flagged.
  CHECK(combine_terms(0.0, -500.0, 0.0, c).learned == 64.0);
  const auto bad = combine_terms(0.0, std::numeric_limits<double>::quiet_NaN(), 0.0, c);
  CHECK(bad.learned == 64.0);
  CHECK(bad.learned_invalid);
  CHECK(combine_terms(0.0, 64.0, 0.0, c).learned == -64.0);
}

TEST_CASE("phi endpoints drop the other term") {
  const auto mc = testing::small_model_config();
  Rng rng(1);
  const auto obs = random_observation(mc, rng);
  const auto lib = random_library(8, rng);
  const Vec2 goal = obs.pose.to_world(Vec2(10, 0));
  auto c = region_3_to_7();
  const auto m1 = make_model(mc, 1), m2 = make_model(mc, 2);
  const auto cm1 = random_costmap(obs.pose, rng, c), cm2 = random_costmap(obs.pose, rng, c);

  c.phi = 1.0;
  const auto a = plan(lib, &m1, cm1, obs, goal, c), b = plan(lib, &m2, cm1, obs, goal, c);
  const auto n = plan(lib, nullptr, cm1, obs, goal, c);
  for (std::size_t k = 0; k < lib.size(); ++k) {
    CHECK(a.breakdown[k].total == b.breakdown[k].total);
    CHECK(a.breakdown[k].total == n.breakdown[k].total);
    CHECK(a.breakdown[k].total == a.breakdown[k].directive + a.breakdown[k].costmap);
  }
  c.phi = 0.0;
  const auto d = plan(lib, &m1, cm1, obs, goal, c), e = plan(lib, &m1, cm2, obs, goal, c);
  for (std::size_t k = 0; k < lib.size(); ++k) {
    CHECK(d.breakdown[k].total == e.breakdown[k].total);
    CHECK(d.breakdown[k].total == d.breakdown[k].directive + d.breakdown[k].learned);
  }
  CHECK_THROWS_AS(plan(lib, nullptr, cm1, obs, goal, c), Error);
  CHECK_THROWS_AS(plan(TrajectoryLibrary{}, &m1, cm1, obs, goal, c), Error);
}

TEST_CASE("plan agrees with exhaustive re-evaluation") {
  const auto mc = testing::small_model_config();
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = region_3_to_7();
    c.phi = rng.uniform();
    auto m = make_model(mc, trial);
    const auto obs = random_observation(mc, rng);
    const auto lib = random_library(1 + rng.below(10), rng);
    const Vec2 goal = obs.pose.to_world(Vec2(rng.uniform(5, 15), rng.uniform(-5, 5)));
    const auto cm = random_costmap(obs.pose, rng, c);
    const auto p = plan(lib, &m, cm, obs, goal, c);

    const Context ctx = encode(m, obs);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < lib.size(); ++k) {
      Trajectory world;
      double cost_sum = 0.0;
      for (const auto& q : lib.centroids[k]) {
        world.push_back(obs.pose.to_world(q));
        cost_sum += query(cm, world.back());
      }
      const double learned = std::min(-log_prob(m, ctx, lib.centroids[k]), c.eta);
      const double total = reference_directive(world.back(), obs.pose, goal, c) + (1 - c.phi) * learned + c.phi * cost_sum;
      CHECK(p.breakdown[k].total == doctest::Approx(total).epsilon(1e-9));
      if (total < best) {
        best = total;
        arg = k;
      }
    }
    CHECK(p.index == arg);
    CHECK(p.local == lib.centroids[arg]);
  }
}

TEST_CASE("ties go to the lowest index") {
  const auto mc = testing::small_model_config();
  Rng rng(3);
  const auto obs = random_observation(mc, rng);
  auto lib = random_library(1, rng);
  lib.centroids.push_back(lib.centroids[0]);
  lib.centroids.push_back(lib.centroids[0]);
  const auto m = make_model(mc, 3);
  const auto c = region_3_to_7();
  const auto cm = random_costmap(obs.pose, rng, c);
  const auto p = plan(lib, &m, cm, obs, obs.pose.to_world(Vec2(10, 0)), c);
  CHECK(p.index == 0);
  TrajectoryLibrary one{{lib.centroids[0]}};
  CHECK(plan(one, &m, cm, obs, obs.pose.to_world(Vec2(10, 0)), c).index == 0);
}

TEST_CASE("argmin is invariant to shifts and common scaling") {
  Rng rng(4);
  auto argmin = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  for (int trial = 0; trial < 500; ++trial) {
    PlannerConfig c;
    c.phi = rng.uniform();
    const std::size_t k = 2 + rng.below(9);
    std::vector<double> base, shifted, scaled;
    const double shift = rng.uniform(-100, 100), scale = rng.uniform(0.1, 10);
    for (std::size_t i = 0; i < k; ++i) {
      const double lp = rng.uniform(-6, 6), cost = rng.uniform(0, 6);
      const auto t = combine_terms(0.0, lp, cost, c);
      base.push_back(t.total);
      shifted.push_back(t.total + shift);
      scaled.push_back((1 - c.phi) * scale * t.learned + c.phi * scale * t.costmap);
    }
    CHECK(argmin(base) == argmin(shifted));
    CHECK(argmin(base) == argmin(scaled));
  }
}

TEST_CASE("an in-region candidate dominates every out-of-region one") {
  Rng rng(5);
  PlannerConfig c;
  // The model's density is bounded, so log q never exceeds eta.
  for (int trial = 0; trial < 10000; ++trial) {
    c.phi = rng.uniform();
    const auto in = combine_terms(0.0, rng.uniform(-1e3, c.eta), rng.uniform(0, 64), c);
    const auto out = combine_terms(c.delta, rng.uniform(-1e3, c.eta), rng.uniform(0, 64), c);
    REQUIRE(in.total < out.total);
  }
}

TEST_CASE("phi one picks the costmap-greedy in-region candidate") {
  const auto mc = testing::small_model_config();
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = region_3_to_7();
    c.phi = 1.0;
    c.region.near = 1.0;
    c.region.length = 6.0;
    c.region.width = 8.0;
    const auto obs = random_observation(mc, rng);
    const auto lib = random_library(10, rng);
    const Vec2 goal = obs.pose.to_world(Vec2(10, 0));
    const auto cm = random_costmap(obs.pose, rng, c);
    const auto p = plan(lib, nullptr, cm, obs, goal, c);
    if (p.breakdown[p.index].directive != 0.0) continue;
    for (const auto& t : p.breakdown) {
      if (t.directive == 0.0) CHECK(p.breakdown[p.index].costmap <= t.costmap);
    }
  }
}

TEST_CASE("replanning is deterministic and the breakdown exports") {
  const auto mc = testing::small_model_config();
  Rng rng(7);
  const auto obs = random_observation(mc, rng);
  const auto lib = random_library(10, rng);
  const auto m = make_model(mc, 7);
  const auto c = region_3_to_7();
  const auto cm = random_costmap(obs.pose, rng, c);
  const Vec2 goal = obs.pose.to_world(Vec2(9, 1));
  const auto a = plan(lib, &m, cm, obs, goal, c), b = plan(lib, &m, cm, obs, goal, c);
  CHECK(a.index == b.index);
  std::ostringstream sa, sb;
  write_breakdown_csv(sa, a);
  write_breakdown_csv(sb, b);
  CHECK(sa.str() == sb.str());
  const std::string text = sa.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}

TEST_CASE("observation costmap comes from the lidar") {
  auto w = testing::empty_world();
  w.obstacles.push_back(testing::circle(ObstacleKind::tree, Vec2(3, 0), 0.5, 2.0));
  Observation obs;
  obs.pose = Pose{};
  obs.pointcloud = raycast_lidar(w, obs.pose);
  const PlannerConfig c;
  const auto cm = observation_costmap(obs, c);
  CHECK(query(cm, Vec2(2.55, 0.0)) == doctest::Approx(c.eta / 10));
  CHECK(query(cm, Vec2(0.0, 0.0)) < 1e-100);
}

TEST_CASE("tracking controller conventions") {
  const Gains g;
  RobotState s;
  ControllerMemory mem;
  const std::vector<Vec2> ahead{Vec2(1, 0)};
  const auto a = track(ahead, s, g, mem, 1.0 / 30);
  CHECK(std::abs(a.angular) < 1e-12);
  CHECK(a.linear > 0.0);
  CHECK(a.linear <= g.v_max);

  mem = {};
  const std::vector<Vec2> left{Vec2(0, 1)};
  CHECK(track(left, s, g, mem, 1.0 / 30).angular > 0.0);
  mem = {};
  const std::vector<Vec2> right{Vec2(0, -1)};
  CHECK(track(right, s, g, mem, 1.0 / 30).angular < 0.0);

  mem = {};
  const std::vector<Vec2> here{Vec2(0, 0)};
  CHECK(track(here, s, g, mem, 1.0 / 30).linear == 0.0);

  mem = {};
  const std::vector<Vec2> far{Vec2(30, 0)};
  CHECK(track(far, s, g, mem, 1.0 / 30).linear == g.v_max);
}

TEST_CASE("tracking advances past waypoints within the lookahead") {
  const Gains g;
  RobotState s;
  ControllerMemory mem;
  const std::vector<Vec2> path{Vec2(0.2, 0), Vec2(0.4, 0), Vec2(1.0, 1.0)};
  const auto a = track(path, s, g, mem, 1.0 / 30);
  CHECK(mem.target == 2);
  CHECK(a.angular > 0.0);
}
