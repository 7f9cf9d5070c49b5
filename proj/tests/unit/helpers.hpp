#pragma once

#include <cmath>
#include <vector>

#include "hip/datakit.hpp"
#include "hip/imitative.hpp"
#include "hip/worldsim.hpp"

namespace testing {

inline hip::WorldSpec empty_world(double side = 40.0) {
  hip::WorldSpec w;
  w.extent = hip::Vec2(side, side);
  return w;
}

inline hip::Obstacle circle(hip::ObstacleKind kind, hip::Vec2 center, double radius, double height,
                            hip::Rgb appearance = {0.5, 0.5, 0.5}) {
  hip::Obstacle o;
  o.kind = kind;
  o.center = center;
  o.half_extents = hip::Vec2(radius, radius);
  o.height = height;
  o.appearance = appearance;
  o.traversable = kind == hip::ObstacleKind::grass;
  return o;
}

inline hip::Obstacle wall(hip::Vec2 center, hip::Vec2 half) {
  hip::Obstacle o;
  o.kind = hip::ObstacleKind::wall;
  o.center = center;
  o.half_extents = half;
  o.height = 2.0;
  return o;
}

// 4x4 pooled patches and narrow layers keep gradient checks cheap.
inline hip::ModelConfig small_model_config(bool local_features = true) {
  hip::ModelConfig c;
  c.patch_rows = 4;
  c.patch_cols = 4;
  c.pool_factor = 1;
  c.patch_extent = 10.0;
  c.encoder_hidden = {8};
  c.step_hidden = {8};
  c.local_features = local_features;
  return c;
}

inline hip::Patch random_patch(int rows, int cols, hip::Rng& rng) {
  hip::Patch p(rows, cols);
  for (auto& v : p.data) v = static_cast<float>(rng.uniform());
  return p;
}

inline std::vector<hip::Vec2> straight_past(int n, double speed_per_step = 0.2) {
  std::vector<hip::Vec2> past;
  for (int j = 0; j < n; ++j) past.emplace_back(-speed_per_step * (n - 1 - j), 0.0);
  return past;
}

inline hip::Trajectory random_trajectory(int h, hip::Rng& rng, double spread = 0.3) {
  hip::Trajectory t;
  hip::Vec2 p = hip::Vec2::Zero();
  for (int i = 0; i < h; ++i) {
    p += hip::Vec2(0.2 + spread * rng.normal() * 0.3, spread * rng.normal() * 0.3);
    t.push_back(p);
  }
  return t;
}

inline hip::Example random_example(const hip::ModelConfig& c, hip::Rng& rng) {
  hip::Example e;
  e.patch = random_patch(c.patch_rows, c.patch_cols, rng);
  for (int j = 0; j < c.past; ++j) e.past.emplace_back(-0.2 * (c.past - 1 - j) + 0.02 * rng.normal(), 0.02 * rng.normal());
  e.past.back() = hip::Vec2::Zero();
  e.future = random_trajectory(c.horizon, rng);
  return e;
}

}  // namespace testing
