#include "hip/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hip {

std::string to_string(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::tree: return "tree";
    case ObstacleKind::rock: return "rock";
    case ObstacleKind::grass: return "grass";
    case ObstacleKind::bush: return "bush";
    case ObstacleKind::wall: return "wall";
    case ObstacleKind::novel: return "novel";
  }
  return "unknown";
}

std::string to_string(Profile profile) {
  return profile == Profile::in_distribution ? "in_distribution" : "out_of_distribution";
}

ObstacleKind obstacle_kind_from_string(const std::string& s) {
  for (auto k : {ObstacleKind::tree, ObstacleKind::rock, ObstacleKind::grass, ObstacleKind::bush,
                 ObstacleKind::wall, ObstacleKind::novel}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown obstacle kind: " + s);
}

Profile profile_from_string(const std::string& s) {
  if (s == "in_distribution" || s == "in") return Profile::in_distribution;
  if (s == "out_of_distribution" || s == "ood") return Profile::out_of_distribution;
  throw Error("unknown profile: " + s);
}

std::string to_string(CollisionKind kind) {
  return kind == CollisionKind::stuck ? "stuck" : "trapped";
}

double Obstacle::signed_distance(const Vec2& p) const {
  if (!is_rectangle()) return (p - center).norm() - radius();
  const double dx = std::abs(p.x() - center.x()) - half_extents.x();
  const double dy = std::abs(p.y() - center.y()) - half_extents.y();
  const double outside = std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  return outside + std::min(std::max(dx, dy), 0.0);
}

double WorldSpec::rigid_clearance(const Vec2& p) const {
  double c = std::min(0.5 * extent.x() - std::abs(p.x()), 0.5 * extent.y() - std::abs(p.y()));
  for (const auto& o : obstacles) {
    if (o.traversable) continue;
    c = std::min(c, o.signed_distance(p));
  }
  return c;
}

bool WorldSpec::in_grass(const Vec2& p) const {
  for (const auto& o : obstacles) {
    if (o.traversable && o.contains(p)) return true;
  }
  return false;
}

std::span<const Action> discrete_actions() {
  static const std::vector<Action> actions = [] {
    std::vector<Action> a;
    for (double v : {0.0, 0.5, 1.0}) {
      for (double w : {-1.0, -0.5, 0.0, 0.5, 1.0}) a.push_back({v, w});
    }
    return a;
  }();
  return actions;
}

// ---------------------------------------------------------------------------
// World generation
// ---------------------------------------------------------------------------

namespace {

double gap_between(const Obstacle& a, const Obstacle& b) {
  if (!a.is_rectangle() && !b.is_rectangle()) {
    return (a.center - b.center).norm() - a.radius() - b.radius();
  }
  if (a.is_rectangle() && b.is_rectangle()) {
    const double dx = std::max(0.0, std::abs(a.center.x() - b.center.x()) -
                                        a.half_extents.x() - b.half_extents.x());
    const double dy = std::max(0.0, std::abs(a.center.y() - b.center.y()) -
                                        a.half_extents.y() - b.half_extents.y());
    return std::hypot(dx, dy);
  }
  const Obstacle& rect = a.is_rectangle() ? a : b;
  const Obstacle& circ = a.is_rectangle() ? b : a;
  return rect.signed_distance(circ.center) - circ.radius();
}

Rgb jittered(const Rgb& base, double jitter, Rng& rng) {
  Rgb c{};
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + rng.uniform(-jitter, jitter), 0.0, 1.0);
  return c;
}

// Coarse occupancy used to keep the free space connected while placing.
class ConnectivityGrid {
 public:
  ConnectivityGrid(const Vec2& extent, double cell, double robot_radius)
      : cell_(cell), robot_radius_(robot_radius) {
    nx_ = static_cast<int>(std::floor(extent.x() / cell));
    ny_ = static_cast<int>(std::floor(extent.y() / cell));
    origin_ = Vec2(-0.5 * extent.x(), -0.5 * extent.y());
    blocked_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
    for (int ix = 0; ix < nx_; ++ix) {
      for (int iy = 0; iy < ny_; ++iy) {
        const Vec2 c = center(ix, iy);
        if (std::abs(c.x()) > 0.5 * extent.x() - robot_radius ||
            std::abs(c.y()) > 0.5 * extent.y() - robot_radius) {
          blocked_[index(ix, iy)] = 1;
        }
      }
    }
  }

  Vec2 center(int ix, int iy) const {
    return origin_ + Vec2((ix + 0.5) * cell_, (iy + 0.5) * cell_);
  }

  /// Marks cells the obstacle blocks; returns the indices newly marked.
  std::vector<std::size_t> mark(const Obstacle& o) {
    std::vector<std::size_t> marked;
    const double reach = std::max(o.half_extents.x(), o.half_extents.y()) + robot_radius_ + cell_;
    const int x0 = std::max(0, static_cast<int>(std::floor((o.center.x() - reach - origin_.x()) / cell_)));
    const int x1 = std::min(nx_ - 1, static_cast<int>(std::floor((o.center.x() + reach - origin_.x()) / cell_)));
    const int y0 = std::max(0, static_cast<int>(std::floor((o.center.y() - reach - origin_.y()) / cell_)));
    const int y1 = std::min(ny_ - 1, static_cast<int>(std::floor((o.center.y() + reach - origin_.y()) / cell_)));
    for (int ix = x0; ix <= x1; ++ix) {
      for (int iy = y0; iy <= y1; ++iy) {
        const std::size_t k = index(ix, iy);
        if (!blocked_[k] && o.signed_distance(center(ix, iy)) < robot_radius_) {
          blocked_[k] = 1;
          marked.push_back(k);
        }
      }
    }
    return marked;
  }

  void unmark(const std::vector<std::size_t>& cells) {
    for (auto k : cells) blocked_[k] = 0;
  }

  bool connected() const {
    std::size_t free_total = 0, start = blocked_.size();
    for (std::size_t k = 0; k < blocked_.size(); ++k) {
      if (!blocked_[k]) {
        ++free_total;
        if (start == blocked_.size()) start = k;
      }
    }
    if (free_total == 0) return false;
    std::vector<char> seen(blocked_.size(), 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      ++reached;
      const int ix = static_cast<int>(k / ny_), iy = static_cast<int>(k % ny_);
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int n = 0; n < 4; ++n) {
        const int jx = ix + dx[n], jy = iy + dy[n];
        if (jx < 0 || jy < 0 || jx >= nx_ || jy >= ny_) continue;
        const std::size_t j = index(jx, jy);
        if (!blocked_[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    return reached == free_total;
  }

 private:
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(ix) * ny_ + iy; }

  double cell_;
  double robot_radius_;
  int nx_ = 0, ny_ = 0;
  Vec2 origin_;
  std::vector<char> blocked_;
};

struct KindPlan {
  ObstacleKind kind;
  const KindParams* params;
  const char* density_name;
};

}  // namespace

WorldSpec generate_world(std::uint64_t seed, const Vec2& extent, Profile profile,
                         const WorldParams& params) {
  if (extent.x() < 20.0 || extent.y() < 20.0) {
    throw Error("world extent must be at least 20 x 20 m");
  }
  WorldSpec world;
  world.seed = seed;
  world.extent = extent;
  world.profile = profile;
  world.grass_slowdown = params.grass_slowdown;
  world.robot_radius = params.robot_radius;
  world.ground = params.ground;
  world.max_height = std::max({params.height_tree, params.height_wall, params.height_bush,
                               params.height_grass, params.height_rock, params.height_novel});

  Rng rng(derive_seed(seed, to_string(profile)));
  ConnectivityGrid grid(extent, params.connectivity_cell, params.robot_radius);

  std::vector<KindPlan> plan = {
      {ObstacleKind::tree, &params.tree, "tree_density"},
      {ObstacleKind::bush, &params.bush, "bush_density"},
      {ObstacleKind::rock, &params.rock, "rock_density"},
      {ObstacleKind::grass, &params.grass, "grass_density"},
  };
  if (profile == Profile::out_of_distribution) {
    plan.push_back({ObstacleKind::wall, &params.wall, "wall_density"});
    plan.push_back({ObstacleKind::novel, &params.novel, "novel_density"});
  }

  const double area = extent.x() * extent.y();
  for (const auto& kp : plan) {
    const int count = static_cast<int>(std::lround(kp.params->density * area / 100.0));
    for (int n = 0; n < count; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < params.max_tries && !placed; ++attempt) {
        Obstacle o;
        o.kind = kp.kind;
        const double size = rng.uniform(kp.params->min_size, kp.params->max_size);
        if (kp.kind == ObstacleKind::wall) {
          const bool along_x = rng.uniform() < 0.5;
          o.half_extents = along_x ? Vec2(size, params.wall_half_thickness)
                                   : Vec2(params.wall_half_thickness, size);
        } else {
          o.half_extents = Vec2(size, size);
        }
        const double reach = std::max(o.half_extents.x(), o.half_extents.y()) + params.border_margin;
        o.center = Vec2(rng.uniform(-0.5 * extent.x() + reach, 0.5 * extent.x() - reach),
                        rng.uniform(-0.5 * extent.y() + reach, 0.5 * extent.y() - reach));
        o.traversable = kp.kind == ObstacleKind::grass;
        switch (kp.kind) {
          case ObstacleKind::tree:
            o.height = params.height_tree;
            o.appearance = jittered(params.color_tree, params.color_jitter, rng);
            break;
          case ObstacleKind::bush:
            o.height = params.height_bush;
            o.appearance = jittered(params.color_bush, params.color_jitter, rng);
            break;
          case ObstacleKind::rock:
            o.height = params.height_rock;
            o.appearance = jittered(params.color_rock, params.color_jitter, rng);
            break;
          case ObstacleKind::grass:
            o.height = params.height_grass;
            o.appearance = jittered(params.color_grass, params.color_jitter, rng);
            break;
          case ObstacleKind::wall:
          case ObstacleKind::novel:
            o.height = kp.kind == ObstacleKind::wall ? params.height_wall : params.height_novel;
            for (int i = 0; i < 3; ++i) o.appearance[i] = rng.uniform(params.novel_lo[i], params.novel_hi[i]);
            break;
        }

        bool ok = true;
        for (const auto& other : world.obstacles) {
          if (o.traversable && other.traversable) continue;  // grass may overlap grass
          const double required = (o.traversable || other.traversable) ? 0.2 : params.corridor;
          if (gap_between(o, other) < required) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        if (!o.traversable) {
          auto marked = grid.mark(o);
          if (!grid.connected()) {
            grid.unmark(marked);
            continue;
          }
        }
        world.obstacles.push_back(o);
        placed = true;
      }
      if (!placed) {
        throw WorldGenError(std::string("obstacle placement failed after bounded retries; reduce ") +
                            kp.density_name);
      }
    }
  }
  return world;
}

// ---------------------------------------------------------------------------
// Kinematics
// ---------------------------------------------------------------------------

RobotState step(const WorldSpec& world, const RobotState& state, const Action& action, double dt) {
  RobotState next = state;
  next.time = state.time + dt;
  const Vec2 p = state.pose.position();
  double v = action.linear;
  if (world.in_grass(p)) v *= world.grass_slowdown;
  const Vec2 q = p + v * dt * Vec2(std::cos(state.pose.heading), std::sin(state.pose.heading));

  bool blocked = false;
  if (q != p) {
    const double after = world.rigid_clearance(q);
    if (after < world.robot_radius && after < world.rigid_clearance(p)) blocked = true;
  }
  if (!blocked) {
    next.pose.x = q.x();
    next.pose.y = q.y();
  }
  next.pose.heading = wrap_angle(state.pose.heading + action.angular * dt);
  return next;
}

// ---------------------------------------------------------------------------
// Sensors
// ---------------------------------------------------------------------------

namespace {

// Smallest t >= 0 where origin + t * dir enters the obstacle, or +inf.
double ray_hit(const Obstacle& o, const Vec2& origin, const Vec2& dir) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (!o.is_rectangle()) {
    const Vec2 f = origin - o.center;
    const double b = f.dot(dir);
    const double c = f.squaredNorm() - o.radius() * o.radius();
    const double disc = b * b - c;
    if (disc < 0.0) return kInf;
    const double s = std::sqrt(disc);
    double t = -b - s;
    if (t < 0.0) t = -b + s;
    return t >= 0.0 ? t : kInf;
  }
  double t0 = -kInf, t1 = kInf;
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = o.center[axis] - o.half_extents[axis];
    const double hi = o.center[axis] + o.half_extents[axis];
    if (std::abs(dir[axis]) < 1e-15) {
      if (origin[axis] < lo || origin[axis] > hi) return kInf;
      continue;
    }
    double ta = (lo - origin[axis]) / dir[axis];
    double tb = (hi - origin[axis]) / dir[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 < 0.0) return kInf;
  return t0 >= 0.0 ? t0 : t1;
}

}  // namespace

std::vector<Vec2> raycast_lidar(const WorldSpec& world, const Pose& pose, const SensorConfig& sensor) {
  const Vec2 origin = pose.position();
  std::vector<const Obstacle*> visible;
  for (const auto& o : world.obstacles) {
    if (o.height < sensor.lidar_plane_height) continue;
    const double reach = o.half_extents.norm();
    if ((o.center - origin).norm() - reach > sensor.max_range) continue;
    visible.push_back(&o);
  }
  std::vector<Vec2> points;
  for (int k = 0; k < sensor.n_rays; ++k) {
    const double local_angle = 2.0 * std::numbers::pi * k / sensor.n_rays;
    const double a = pose.heading + local_angle;
    const Vec2 dir(std::cos(a), std::sin(a));
    double best = std::numeric_limits<double>::infinity();
    for (const auto* o : visible) best = std::min(best, ray_hit(*o, origin, dir));
    if (best <= sensor.max_range) {
      points.emplace_back(best * std::cos(local_angle), best * std::sin(local_angle));
    }
  }
  return points;
}

Patch render_patch(const WorldSpec& world, const Pose& pose, std::uint64_t noise_seed,
                   const SensorConfig& sensor) {
  const int n = sensor.patch_cells;
  const double extent = sensor.patch_extent;
  const double cell = extent / n;
  Patch patch(n, n);
  std::vector<double> top(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<const Obstacle*> owner(static_cast<std::size_t>(n) * n, nullptr);

  for (const auto& o : world.obstacles) {
    // Local-frame bounding box of the obstacle.
    const Vec2 c = pose.to_local(o.center);
    double hx, hy;
    if (o.is_rectangle()) {
      const double cs = std::abs(std::cos(pose.heading)), sn = std::abs(std::sin(pose.heading));
      hx = cs * o.half_extents.x() + sn * o.half_extents.y();
      hy = sn * o.half_extents.x() + cs * o.half_extents.y();
    } else {
      hx = hy = o.radius();
    }
    if (c.x() + hx < 0.0 || c.x() - hx > extent) continue;
    if (c.y() + hy < -0.5 * extent || c.y() - hy > 0.5 * extent) continue;
    const int r0 = std::max(0, static_cast<int>(std::floor((c.x() - hx) / cell)));
    const int r1 = std::min(n - 1, static_cast<int>(std::floor((c.x() + hx) / cell)));
    // column j covers y in [E/2 - (j+1) cell, E/2 - j cell]
    const int c0 = std::max(0, static_cast<int>(std::floor((0.5 * extent - (c.y() + hy)) / cell)));
    const int c1 = std::min(n - 1, static_cast<int>(std::floor((0.5 * extent - (c.y() - hy)) / cell)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const Vec2 local((r + 0.5) * cell, 0.5 * extent - (col + 0.5) * cell);
        const Vec2 w = pose.to_world(local);
        if (!o.contains(w)) continue;
        const std::size_t k = static_cast<std::size_t>(r) * n + col;
        if (owner[k] == nullptr || o.height > top[k]) {
          owner[k] = &o;
          top[k] = o.height;
        }
      }
    }
  }

  Rng rng(noise_seed);
  const double amp = sensor.patch_noise;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      const std::size_t k = static_cast<std::size_t>(r) * n + col;
      const Rgb& rgb = owner[k] ? owner[k]->appearance : world.ground;
      const double h = owner[k] ? owner[k]->height / world.max_height : 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        patch.at(r, col, ch) = static_cast<float>(std::clamp(rgb[ch] + rng.uniform(-amp, amp), 0.0, 1.0));
      }
      patch.at(r, col, 3) = static_cast<float>(std::clamp(h + rng.uniform(-amp, amp), 0.0, 1.0));
    }
  }
  return patch;
}

Patch pool_patch(const Patch& patch, int factor) {
  if (factor <= 0 || patch.rows % factor != 0 || patch.cols % factor != 0) {
    throw Error("patch dimensions are not divisible by the pooling factor");
  }
  Patch out(patch.rows / factor, patch.cols / factor);
  const float norm = 1.0f / static_cast<float>(factor * factor);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int ch = 0; ch < Patch::kChannels; ++ch) {
        float s = 0.0f;
        for (int i = 0; i < factor; ++i) {
          for (int j = 0; j < factor; ++j) s += patch.at(r * factor + i, c * factor + j, ch);
        }
        out.at(r, c, ch) = s * norm;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collision heuristics
// ---------------------------------------------------------------------------

std::optional<CollisionEvent> detect_collision(std::span<const HistorySample> history,
                                               const CollisionConfig& config) {
  if (history.empty()) return std::nullopt;
  constexpr double kTol = 1e-9;
  const HistorySample& now = history.back();

  if (history.front().time <= now.time - config.stuck_duration + kTol) {
    bool stuck = true;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      if (it->time < now.time - config.stuck_duration - kTol) break;
      if ((it->position - now.position).norm() >= config.stuck_eps || it->commanded_linear == 0.0) {
        stuck = false;
        break;
      }
    }
    if (stuck) return CollisionEvent{CollisionKind::stuck, now.time};
  }

  if (history.front().time <= now.time - config.trapped_window + kTol) {
    // First sample inside the trailing window.
    const HistorySample* first = &history.front();
    for (const auto& s : history) {
      if (s.time >= now.time - config.trapped_window - kTol) {
        first = &s;
        break;
      }
    }
    if ((now.position - first->position).norm() < config.trapped_distance) {
      return CollisionEvent{CollisionKind::trapped, now.time};
    }
  }
  return std::nullopt;
}

std::optional<CollisionEvent> CollisionMonitor::push(const HistorySample& sample) {
  history_.push_back(sample);
  const double keep = std::max(config_.stuck_duration, config_.trapped_window) + 1.0;
  std::size_t drop = 0;
  while (drop + 1 < history_.size() && history_[drop + 1].time < sample.time - keep) ++drop;
  if (drop > 64) history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(drop));
  return detect_collision(history_, config_);
}

std::optional<Pose> sample_free_pose(const WorldSpec& world, Rng& rng, double clearance, int max_tries) {
  const double margin = world.robot_radius + clearance;
  for (int i = 0; i < max_tries; ++i) {
    const Vec2 p(rng.uniform(-0.5 * world.extent.x() + margin, 0.5 * world.extent.x() - margin),
                 rng.uniform(-0.5 * world.extent.y() + margin, 0.5 * world.extent.y() - margin));
    const double heading = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    if (world.is_free(p, clearance)) return Pose{p.x(), p.y(), heading};
  }
  return std::nullopt;
}

}  // namespace hip
