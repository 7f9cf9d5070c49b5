#include "hip/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hip {

namespace {

template <std::size_t N>
std::size_t weighted_pick(const std::array<double, N>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return N - 1;
}

}  // namespace

StickyRandomPolicy::StickyRandomPolicy(std::uint64_t seed, const CollectConfig& config)
    : rng_(seed), config_(config) {}

Action StickyRandomPolicy::next() {
  if (hold_ <= 0) {
    static constexpr std::array<double, 3> kLinear{0.0, 0.5, 1.0};
    static constexpr std::array<double, 5> kAngular{-1.0, -0.5, 0.0, 0.5, 1.0};
    current_.linear = kLinear[weighted_pick(config_.linear_weights, rng_)];
    current_.angular = kAngular[weighted_pick(config_.angular_weights, rng_)];
    const double duration = rng_.uniform(config_.sticky_min, config_.sticky_max);
    hold_ = std::max(1L, std::lround(duration / config_.dt));
  }
  --hold_;
  return current_;
}

RawLog collect(const WorldSpec& world, long steps, std::uint64_t seed, const CollectConfig& config) {
  if (steps <= 0) throw Error("collect: steps must be positive");
  RawLog log;
  log.world = world;
  log.seed = seed;
  log.dt = config.dt;
  log.records.reserve(static_cast<std::size_t>(steps));

  Rng spawn_rng(derive_seed(seed, "spawn"));
  auto spawn = [&] {
    auto pose = sample_free_pose(world, spawn_rng, config.spawn_clearance, 10000);
    if (!pose) throw Error("collect: no free respawn pose found");
    return *pose;
  };
  StickyRandomPolicy policy(derive_seed(seed, "actions"), config);
  CollisionMonitor monitor(config.collision);
  RobotState state{spawn(), 0.0};
  bool respawned = false;

  for (long i = 0; i < steps; ++i) {
    const Action action = policy.next();
    log.records.push_back({state.time, state.pose, action, respawned});
    respawned = false;
    state = step(world, state, action, config.dt);
    if (auto event = monitor.push({state.time, state.pose.position(), action.linear})) {
      log.events.push_back(*event);
      state.pose = spawn();
      monitor.reset();
      policy.reset_hold();
      respawned = true;
    }
  }
  return log;
}

std::vector<ExclusionSpan> exclusion_spans(const RawLog& log, const DatasetConfig& config) {
  std::vector<ExclusionSpan> spans;
  for (const auto& e : log.events) {
    ExclusionSpan span{e.time - config.collision_margin,
                       std::numeric_limits<double>::infinity()};
    for (const auto& r : log.records) {
      if (r.respawn && r.time >= e.time - 1e-9) {
        span.end = r.time;
        break;
      }
    }
    spans.push_back(span);
  }
  return spans;
}

Dataset make_dataset(const RawLog& log, const DatasetConfig& config) {
  const double ratio = 1.0 / (log.dt * config.f_tau);
  const long stride = std::lround(ratio);
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-6) {
    throw Error("make_dataset: simulator rate must be an integer multiple of f_tau");
  }
  Dataset data;
  data.meta.collection_seed = log.seed;
  data.meta.world_seeds = {log.world.seed};
  data.meta.f_tau = config.f_tau;
  data.meta.horizon = config.horizon;
  data.meta.past = config.past;
  data.meta.patch_rows = config.sensor.patch_cells / config.pool_factor;
  data.meta.patch_cols = config.sensor.patch_cells / config.pool_factor;

  const auto spans = exclusion_spans(log, config);
  auto excluded = [&](double t0, double t1) {
    for (const auto& s : spans) {
      if (t0 <= s.end && s.begin <= t1) return true;
    }
    return false;
  };

  const std::size_t n = log.records.size();
  std::size_t seg_begin = 0;
  while (seg_begin < n) {
    std::size_t seg_end = seg_begin + 1;
    while (seg_end < n && !log.records[seg_end].respawn) ++seg_end;

    std::vector<std::size_t> sub;
    for (std::size_t i = seg_begin; i < seg_end; i += static_cast<std::size_t>(stride)) sub.push_back(i);

    for (std::size_t k = config.past - 1; k + config.horizon < sub.size(); ++k) {
      const std::size_t first = sub[k + 1 - config.past];
      const std::size_t last = sub[k + config.horizon];
      ++data.meta.windows_total;
      if (excluded(log.records[first].time, log.records[last].time)) {
        ++data.meta.windows_dropped;
        continue;
      }
      const Pose& ref = log.records[sub[k]].pose;
      Example ex;
      ex.past.reserve(config.past);
      for (int j = 0; j < config.past; ++j) {
        ex.past.push_back(ref.to_local(log.records[sub[k + 1 + j - config.past]].pose.position()));
      }
      ex.future.reserve(config.horizon);
      for (int j = 0; j < config.horizon; ++j) {
        ex.future.push_back(ref.to_local(log.records[sub[k + 1 + j]].pose.position()));
      }
      ex.patch = pool_patch(render_patch(log.world, ref, log.patch_seed(sub[k]), config.sensor),
                            config.pool_factor);
      data.examples.push_back(std::move(ex));
    }
    seg_begin = seg_end;
  }
  return data;
}

void merge(Dataset& into, Dataset&& other) {
  if (into.examples.empty() && into.meta.world_seeds.empty()) {
    into = std::move(other);
    return;
  }
  if (into.meta.horizon != other.meta.horizon || into.meta.past != other.meta.past ||
      into.meta.patch_rows != other.meta.patch_rows || into.meta.f_tau != other.meta.f_tau) {
    throw Error("merge: datasets have different shapes");
  }
  for (auto s : other.meta.world_seeds) into.meta.world_seeds.push_back(s);
  into.meta.windows_total += other.meta.windows_total;
  into.meta.windows_dropped += other.meta.windows_dropped;
  into.examples.reserve(into.examples.size() + other.examples.size());
  for (auto& e : other.examples) into.examples.push_back(std::move(e));
}

// ---------------------------------------------------------------------------
// k-means trajectory library
// ---------------------------------------------------------------------------

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

}  // namespace

double within_cluster_ss(const std::vector<Trajectory>& points, const std::vector<Trajectory>& centroids) {
  double total = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centroids) {
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - c[i]).squaredNorm();
      best = std::min(best, s);
    }
    total += best;
  }
  return total;
}

TrajectoryLibrary build_library(const Dataset& dataset, int k, std::uint64_t seed, int max_iterations) {
  const std::size_t n = dataset.examples.size();
  if (k <= 0 || static_cast<std::size_t>(k) > n) {
    throw Error("build_library: K must be in [1, dataset size]");
  }
  const int h = static_cast<int>(dataset.examples.front().future.size());
  const int d = 2 * h;
  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < h; ++j) {
      x[i * d + 2 * j] = dataset.examples[i].future[j].x();
      x[i * d + 2 * j + 1] = dataset.examples[i].future[j].y();
    }
  }

  // Seeded initialization from distinct examples (partial Fisher-Yates).
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> c(static_cast<std::size_t>(k) * d);
  for (int j = 0; j < k; ++j) {
    const std::size_t pick = j + rng.below(n - j);
    std::swap(order[j], order[pick]);
    std::copy_n(&x[order[j] * d], d, &c[static_cast<std::size_t>(j) * d]);
  }

  std::vector<int> assign(n, -1);
  std::vector<double> dist(n, 0.0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double dd = sq_dist(&x[i * d], &c[static_cast<std::size_t>(j) * d], d);
        if (dd < best_d) {
          best_d = dd;
          best = j;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      dist[i] = best_d;
    }

    std::vector<double> sum(static_cast<std::size_t>(k) * d, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[assign[i]];
      for (int t = 0; t < d; ++t) sum[static_cast<std::size_t>(assign[i]) * d + t] += x[i * d + t];
    }
    bool reseeded = false;
    std::vector<char> taken(n, 0);
    for (int j = 0; j < k; ++j) {
      if (count[j] > 0) {
        for (int t = 0; t < d; ++t) {
          c[static_cast<std::size_t>(j) * d + t] = sum[static_cast<std::size_t>(j) * d + t] / count[j];
        }
        continue;
      }
      // Empty cluster: re-seed from the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = 1;
      dist[far] = 0.0;
      std::copy_n(&x[far * d], d, &c[static_cast<std::size_t>(j) * d]);
      reseeded = true;
    }
    if (!changed && !reseeded) break;
  }

  TrajectoryLibrary lib;
  for (int j = 0; j < k; ++j) {
    Trajectory t(h);
    for (int s = 0; s < h; ++s) {
      t[s] = Vec2(c[static_cast<std::size_t>(j) * d + 2 * s], c[static_cast<std::size_t>(j) * d + 2 * s + 1]);
    }
    lib.centroids.push_back(std::move(t));
  }
  std::stable_sort(lib.centroids.begin(), lib.centroids.end(), [](const Trajectory& a, const Trajectory& b) {
    for (std::size_t s = a.size(); s-- > 0;) {
      if (a[s].x() != b[s].x()) return a[s].x() < b[s].x();
      if (a[s].y() != b[s].y()) return a[s].y() < b[s].y();
    }
    return false;
  });
  return lib;
}

}  // namespace hip
