#include "hip/config.hpp"

#include <fstream>
#include <sstream>

namespace hip {

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

// Walks every setting once; the same table drives serialization and parsing.
struct Binder {
  json* doc;
  bool writing;

  json* locate(const std::string& path) {
    json* node = doc;
    for (const auto& part : split_path(path)) {
      if (writing) {
        node = &(*node)[part];
      } else {
        if (!node->is_object() || !node->contains(part)) throw Error("config: missing key " + path);
        node = &(*node)[part];
      }
    }
    return node;
  }

  template <class T>
  void operator()(const std::string& path, T& value) {
    json* node = locate(path);
    if (writing) {
      *node = value;
      return;
    }
    try {
      value = node->get<T>();
    } catch (const json::exception&) {
      throw Error("config: wrong type for " + path);
    }
  }

  void operator()(const std::string& path, Vec2& v) {
    std::array<double, 2> a{v.x(), v.y()};
    (*this)(path, a);
    v = Vec2(a[0], a[1]);
  }

  void operator()(const std::string& path, KindParams& k) {
    (*this)(path + ".density", k.density);
    (*this)(path + ".min_size", k.min_size);
    (*this)(path + ".max_size", k.max_size);
  }

  void operator()(const std::string& path, NormalizeMode& m) {
    std::string s = to_string(m);
    (*this)(path, s);
    m = normalize_mode_from_string(s);
  }
};

void bind_all(Settings& s, Binder& b) {
  b("seed", s.seed);

  b("world.extent", s.extent);
  auto& w = s.world;
  b("world.tree", w.tree);
  b("world.bush", w.bush);
  b("world.rock", w.rock);
  b("world.grass", w.grass);
  b("world.wall", w.wall);
  b("world.novel", w.novel);
  b("world.wall_half_thickness", w.wall_half_thickness);
  b("world.height.tree", w.height_tree);
  b("world.height.wall", w.height_wall);
  b("world.height.bush", w.height_bush);
  b("world.height.grass", w.height_grass);
  b("world.height.rock", w.height_rock);
  b("world.height.novel", w.height_novel);
  b("world.color.ground", w.ground);
  b("world.color.tree", w.color_tree);
  b("world.color.bush", w.color_bush);
  b("world.color.grass", w.color_grass);
  b("world.color.rock", w.color_rock);
  b("world.color.jitter", w.color_jitter);
  b("world.color.novel_lo", w.novel_lo);
  b("world.color.novel_hi", w.novel_hi);
  b("world.grass_slowdown", w.grass_slowdown);
  b("world.robot_radius", w.robot_radius);
  b("world.corridor", w.corridor);
  b("world.border_margin", w.border_margin);
  b("world.connectivity_cell", w.connectivity_cell);
  b("world.max_tries", w.max_tries);

  b("collect.dt", s.collect.dt);
  b("collect.sticky_min", s.collect.sticky_min);
  b("collect.sticky_max", s.collect.sticky_max);
  b("collect.spawn_clearance", s.collect.spawn_clearance);
  b("collect.linear_weights", s.collect.linear_weights);
  b("collect.angular_weights", s.collect.angular_weights);
  b("collect.worlds", s.train_worlds);
  b("collect.steps_per_world", s.steps_per_world);

  b("sensor.lidar_plane_height", s.dataset.sensor.lidar_plane_height);
  b("sensor.n_rays", s.dataset.sensor.n_rays);
  b("sensor.max_range", s.dataset.sensor.max_range);
  b("sensor.patch_extent", s.dataset.sensor.patch_extent);
  b("sensor.patch_cells", s.dataset.sensor.patch_cells);
  b("sensor.patch_noise", s.dataset.sensor.patch_noise);

  b("collision.stuck_duration", s.dataset.collision.stuck_duration);
  b("collision.stuck_eps", s.dataset.collision.stuck_eps);
  b("collision.trapped_window", s.dataset.collision.trapped_window);
  b("collision.trapped_distance", s.dataset.collision.trapped_distance);

  b("dataset.f_tau", s.dataset.f_tau);
  b("dataset.horizon", s.dataset.horizon);
  b("dataset.past", s.dataset.past);
  b("dataset.collision_margin", s.dataset.collision_margin);
  b("dataset.pool_factor", s.dataset.pool_factor);

  b("model.encoder_hidden", s.model.encoder_hidden);
  b("model.step_hidden", s.model.step_hidden);
  b("model.local_features", s.model.local_features);
  b("model.local_offsets", s.model.local_offsets);
  b("model.channel_mask", s.model.channel_mask);
  b("model.eta", s.model.eta);
  b("model.init_scale", s.model.init_scale);

  b("train.batch_size", s.train.batch_size);
  b("train.learning_rate", s.train.learning_rate);
  b("train.perturbation_sigma", s.train.perturbation_sigma);
  b("train.epochs", s.train.epochs);
  b("train.held_in", s.train.held_in);

  b("bc.encoder_hidden", s.bc.encoder_hidden);
  b("bc.head_hidden", s.bc.head_hidden);
  b("bc.goal_reach", s.bc.goal_reach);
  b("bc.replan_hz", s.bc.replan_hz);

  b("library.k", s.library_k);
  b("library.max_iterations", s.library_iterations);

  b("planner.phi", s.planner.phi);
  b("planner.delta", s.planner.delta);
  b("planner.replan_hz", s.planner.replan_hz);
  b("planner.region.width", s.planner.region.width);
  b("planner.region.near", s.planner.region.near);
  b("planner.region.length", s.planner.region.length);
  b("planner.costmap.resolution", s.planner.grid.resolution);
  b("planner.costmap.width", s.planner.grid.width);
  b("planner.costmap.height", s.planner.grid.height);
  b("planner.costmap.inflation_radius", s.planner.grid.inflation_radius);
  b("planner.costmap.cost_scaling", s.planner.grid.cost_scaling);
  b("planner.costmap.inscribed_radius", s.planner.grid.inscribed_radius);
  b("planner.costmap.normalize", s.planner.normalize);

  b("controller.kp", s.gains.kp);
  b("controller.kd", s.gains.kd);
  b("controller.ki", s.gains.ki);
  b("controller.kv", s.gains.kv);
  b("controller.v_max", s.gains.v_max);
  b("controller.omega_max", s.gains.omega_max);
  b("controller.lookahead", s.gains.lookahead);
  b("controller.stop_radius", s.gains.stop_radius);

  b("eval.episodes", s.episodes);
  b("eval.worlds", s.eval_worlds);
  b("eval.timeout", s.eval.timeout);
  b("eval.goal_radius", s.eval.goal_radius);
  b("eval.min_goal_distance", s.eval.min_goal_distance);
  b("eval.max_goal_distance", s.eval.max_goal_distance);
  b("eval.spawn_clearance", s.eval.spawn_clearance);
  b("eval.oracle_resolution", s.oracle_resolution);
  b("eval.sweep", s.sweep);
}

// Values that several modules must agree on are stored once.
void propagate(Settings& s) {
  s.dataset.sensor.patch_cells = std::max(1, s.dataset.sensor.patch_cells);
  s.collect.collision = s.dataset.collision;
  s.eval.collision = s.dataset.collision;
  s.eval.sensor = s.dataset.sensor;
  s.eval.dt = s.collect.dt;
  s.eval.f_tau = s.dataset.f_tau;
  s.model.horizon = s.dataset.horizon;
  s.model.past = s.dataset.past;
  s.model.pool_factor = s.dataset.pool_factor;
  s.model.patch_rows = s.dataset.sensor.patch_cells / s.dataset.pool_factor;
  s.model.patch_cols = s.model.patch_rows;
  s.model.patch_extent = s.dataset.sensor.patch_extent;
  s.bc.patch_rows = s.model.patch_rows;
  s.bc.patch_cols = s.model.patch_cols;
  s.bc.pool_factor = s.model.pool_factor;
  s.bc.past = s.model.past;
  s.bc.patch_extent = s.model.patch_extent;
  s.bc.local_offsets = s.model.local_features ? s.model.local_offsets : std::vector<std::array<double, 2>>{};
  s.planner.eta = s.model.eta;
  s.train.seed = derive_seed(s.seed, "train");
}

void validate(const Settings& s) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("config: invalid ") + what);
  };
  check(s.extent.x() >= 20.0 && s.extent.y() >= 20.0, "world.extent");
  check(s.collect.dt > 0.0, "collect.dt");
  check(s.collect.sticky_min > 0.0 && s.collect.sticky_max >= s.collect.sticky_min, "collect.sticky_min/max");
  check(s.train_worlds >= 1 && s.steps_per_world >= 1, "collect.worlds/steps_per_world");
  check(s.dataset.f_tau > 0.0 && s.dataset.horizon >= 1 && s.dataset.past >= 2, "dataset");
  check(s.dataset.pool_factor >= 1 && s.dataset.sensor.patch_cells % s.dataset.pool_factor == 0,
        "dataset.pool_factor");
  check(s.model.eta > 0.0, "model.eta");
  check(s.train.batch_size > 0 && s.train.learning_rate > 0.0 && s.train.perturbation_sigma > 0.0 &&
            s.train.epochs > 0,
        "train");
  check(s.library_k >= 1, "library.k");
  check(s.planner.phi >= 0.0 && s.planner.phi <= 1.0, "planner.phi");
  check(s.planner.replan_hz > 0.0, "planner.replan_hz");
  check(s.episodes >= 1 && s.eval_worlds >= 1, "eval.episodes/worlds");
  for (double p : s.sweep) check(p >= 0.0 && p <= 1.0, "eval.sweep");
}

}  // namespace

json to_json(const Settings& s) {
  json j = json::object();
  Settings copy = s;
  Binder b{&j, true};
  bind_all(copy, b);
  return j;
}

Settings settings_from_json(const json& j) {
  json known = to_json(Settings{});
  overlay_config(known, j);
  Settings s;
  json doc = j;
  Binder b{&doc, false};
  bind_all(s, b);
  propagate(s);
  validate(s);
  return s;
}

namespace {

void overlay_at(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw Error("config: expected an object at " + (prefix.empty() ? "<root>" : prefix));
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error("config: unknown key " + key);
    json& target = base[it.key()];
    if (target.is_object()) {
      overlay_at(target, it.value(), key);
      continue;
    }
    const bool compatible = (target.is_number() && it.value().is_number()) ||
                            (target.is_boolean() && it.value().is_boolean()) ||
                            (target.is_string() && it.value().is_string()) ||
                            (target.is_array() && it.value().is_array());
    if (!compatible) throw Error("config: wrong type for " + key);
    target = it.value();
  }
}

}  // namespace

void overlay_config(json& base, const json& patch) { overlay_at(base, patch, ""); }

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("config: override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json patch = value;
  const auto parts = split_path(key);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  overlay_config(config, patch);
}

Settings load_settings(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = to_json(Settings{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("config: " + path + " is not valid JSON: " + e.what());
    }
    overlay_config(doc, file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return settings_from_json(doc);
}

}  // namespace hip
