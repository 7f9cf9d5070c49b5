#include "hip/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>

namespace hip {

namespace {

long steps_per(double hz, double dt) { return std::max(1L, std::lround(1.0 / (hz * dt))); }

}  // namespace

std::vector<EpisodeSpec> make_specs(const std::vector<WorldSpec>& worlds, int n, std::uint64_t seed,
                                    const EvalConfig& config) {
  if (worlds.empty()) throw Error("make_specs: no worlds");
  if (n < 1) throw Error("make_specs: need at least one episode");
  std::vector<EpisodeSpec> specs;
  for (int i = 0; i < n; ++i) {
    const std::size_t w = static_cast<std::size_t>(i) % worlds.size();
    const WorldSpec& world = worlds[w];
    Rng rng(derive_seed(seed, "episode", static_cast<std::uint64_t>(i)));
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      auto start = sample_free_pose(world, rng, config.spawn_clearance, 1000);
      if (!start) break;
      for (int g = 0; g < 200; ++g) {
        auto goal = sample_free_pose(world, rng, config.spawn_clearance, 1000);
        if (!goal) break;
        const double d = (goal->position() - start->position()).norm();
        if (d < config.min_goal_distance || d > config.max_goal_distance) continue;
        EpisodeSpec s;
        s.world = w;
        s.world_seed = world.seed;
        s.goal = goal->position();
        s.start = *start;
        s.start.heading = std::atan2(s.goal.y() - start->y, s.goal.x() - start->x);
        s.timeout = config.timeout;
        s.goal_radius = config.goal_radius;
        s.noise_seed = derive_seed(seed, "noise", static_cast<std::uint64_t>(i));
        specs.push_back(s);
        placed = true;
        break;
      }
    }
    if (!placed) throw Error("make_specs: could not place a start/goal pair in world " + std::to_string(w));
  }
  return specs;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::stuck: return "stuck";
    case Outcome::trapped: return "trapped";
    case Outcome::timeout: return "timeout";
    case Outcome::no_path: return "no_path";
  }
  return "unknown";
}

EpisodeView::EpisodeView(const WorldSpec& world, const EpisodeSpec& spec, const EvalConfig& config)
    : world_(world), spec_(spec), config_(config), state_{spec.start, 0.0} {
  positions_.push_back(spec.start.position());
}

void EpisodeView::advance(const RobotState& next) {
  state_ = next;
  ++step_;
  positions_.push_back(next.pose.position());
}

Observation EpisodeView::observe(int past) const {
  Observation obs;
  obs.pose = state_.pose;
  obs.pointcloud = raycast_lidar(world_, state_.pose, config_.sensor);
  obs.patch = render_patch(world_, state_.pose,
                           derive_seed(spec_.noise_seed, "patch", static_cast<std::uint64_t>(step_)),
                           config_.sensor);
  const long stride = steps_per(config_.f_tau, config_.dt);
  obs.past_positions.resize(past);
  for (int j = 0; j < past; ++j) {
    const long s = std::max(0L, step_ - (past - 1 - j) * stride);
    obs.past_positions[j] = state_.pose.to_local(positions_[static_cast<std::size_t>(s)]);
  }
  return obs;
}

EpisodeResult run_episode(const WorldSpec& world, Policy& policy, const EpisodeSpec& spec,
                          const EvalConfig& config) {
  EpisodeView view(world, spec, config);
  CollisionMonitor monitor(config.collision);
  EpisodeResult result;
  result.final_pose = spec.start;
  policy.reset(view);
  if (policy.gave_up()) {
    result.outcome = Outcome::no_path;
    return result;
  }
  const long max_steps = std::lround(spec.timeout / config.dt);
  for (long i = 0; i < max_steps; ++i) {
    if ((view.state().pose.position() - spec.goal).norm() <= spec.goal_radius) {
      result.outcome = Outcome::success;
      result.elapsed = view.state().time;
      return result;
    }
    const Action a = policy.act(view);
    const RobotState next = step(world, view.state(), a, config.dt);
    result.path_length += (next.pose.position() - view.state().pose.position()).norm();
    view.advance(next);
    result.final_pose = next.pose;
    if (auto e = monitor.push({next.time, next.pose.position(), a.linear})) {
      result.outcome = e->kind == CollisionKind::stuck ? Outcome::stuck : Outcome::trapped;
      result.elapsed = next.time;
      return result;
    }
  }
  result.outcome = (view.state().pose.position() - spec.goal).norm() <= spec.goal_radius ? Outcome::success
                                                                                          : Outcome::timeout;
  result.elapsed = view.state().time;
  return result;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

PlannerPolicy::PlannerPolicy(const TrajectoryLibrary& library, const ImitativeModel* model, PlannerConfig config,
                             Gains gains)
    : library_(library), model_(model), config_(config), gains_(gains) {}

void PlannerPolicy::reset(const EpisodeView& view) {
  memory_ = {};
  waypoints_.clear();
  period_ = steps_per(config_.replan_hz, view.config().dt);
}

Action PlannerPolicy::act(const EpisodeView& view) {
  if (view.step_index() % period_ == 0) {
    const int past = model_ ? model_->config.past : 10;
    const Observation obs = view.observe(past);
    const Costmap cm = observation_costmap(obs, config_);
    waypoints_ = plan(library_, model_, cm, obs, view.spec().goal, config_).world;
    memory_ = {};
  }
  return track(waypoints_, view.state(), gains_, memory_, view.config().dt);
}

Action StraightPolicy::act(const EpisodeView& view) {
  const Vec2 goal = view.spec().goal;
  return track(std::span<const Vec2>(&goal, 1), view.state(), gains_, memory_, view.config().dt);
}

void RandomPolicy::reset(const EpisodeView& view) {
  CollectConfig c = config_;
  c.dt = view.config().dt;
  sticky_.emplace(derive_seed(view.spec().noise_seed, "random"), c);
}

Action RandomPolicy::act(const EpisodeView&) { return sticky_->next(); }

std::optional<Trajectory> astar(const WorldSpec& world, const Vec2& start, const Vec2& goal, double resolution) {
  if (!(resolution > 0.0)) throw Error("astar: resolution must be positive");
  const int nx = static_cast<int>(std::floor(world.extent.x() / resolution));
  const int ny = static_cast<int>(std::floor(world.extent.y() / resolution));
  const Vec2 origin = -0.5 * world.extent;
  auto center = [&](int ix, int iy) { return Vec2(origin.x() + (ix + 0.5) * resolution, origin.y() + (iy + 0.5) * resolution); };
  std::vector<char> free(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) free[static_cast<std::size_t>(iy) * nx + ix] = world.is_free(center(ix, iy));
  }
  auto nearest_free = [&](const Vec2& p) -> long {
    const int cx = std::clamp(static_cast<int>(std::floor((p.x() - origin.x()) / resolution)), 0, nx - 1);
    const int cy = std::clamp(static_cast<int>(std::floor((p.y() - origin.y()) / resolution)), 0, ny - 1);
    long best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int reach = static_cast<int>(std::ceil(1.0 / resolution));
    for (int iy = std::max(0, cy - reach); iy <= std::min(ny - 1, cy + reach); ++iy) {
      for (int ix = std::max(0, cx - reach); ix <= std::min(nx - 1, cx + reach); ++ix) {
        if (!free[static_cast<std::size_t>(iy) * nx + ix]) continue;
        const double d = (center(ix, iy) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<long>(iy) * nx + ix;
        }
      }
    }
    return best;
  };
  const long s = nearest_free(start), g = nearest_free(goal);
  if (s < 0 || g < 0) return std::nullopt;

  const double diag = std::sqrt(2.0);
  auto h = [&](long c) {
    const double dx = std::abs(static_cast<double>(c % nx - g % nx));
    const double dy = std::abs(static_cast<double>(c / nx - g / nx));
    return resolution * (std::max(dx, dy) + (diag - 1.0) * std::min(dx, dy));
  };
  std::vector<double> cost(free.size(), std::numeric_limits<double>::infinity());
  std::vector<long> parent(free.size(), -1);
  std::vector<char> closed(free.size(), 0);
  using Item = std::tuple<double, std::uint64_t, long>;  // f, insertion order, cell
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  std::uint64_t counter = 0;
  cost[s] = 0.0;
  open.emplace(h(s), counter++, s);
  while (!open.empty()) {
    const long c = std::get<2>(open.top());
    open.pop();
    if (closed[c]) continue;
    closed[c] = 1;
    if (c == g) break;
    const int cx = static_cast<int>(c % nx), cy = static_cast<int>(c / nx);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= nx || y >= ny) continue;
        const long n = static_cast<long>(y) * nx + x;
        if (!free[n] || closed[n]) continue;
        if (dx && dy && (!free[static_cast<long>(cy) * nx + x] || !free[static_cast<long>(y) * nx + cx])) continue;
        const double nc = cost[c] + resolution * ((dx && dy) ? diag : 1.0);
        if (nc < cost[n]) {
          cost[n] = nc;
          parent[n] = c;
          open.emplace(nc + h(n), counter++, n);
        }
      }
    }
  }
  if (!closed[g]) return std::nullopt;
  Trajectory path;
  for (long c = g; c >= 0; c = parent[c]) path.push_back(center(static_cast<int>(c % nx), static_cast<int>(c / nx)));
  path.push_back(start);
  std::reverse(path.begin(), path.end());
  path.push_back(goal);
  return path;
}

double path_length(std::span<const Vec2> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += (path[i] - path[i - 1]).norm();
  return total;
}

void OraclePolicy::reset(const EpisodeView& view) {
  memory_ = {};
  path_ = astar(view.world(), view.state().pose.position(), view.spec().goal, resolution_);
}

Action OraclePolicy::act(const EpisodeView& view) {
  if (!path_) return {};
  return track(*path_, view.state(), gains_, memory_, view.config().dt);
}

// ---------------------------------------------------------------------------
// Behavior cloning
// ---------------------------------------------------------------------------

namespace {

Eigen::RowVectorXd bc_encoder_input(const BcModel& m, const Patch& pooled) {
  if (pooled.rows != m.config.patch_rows || pooled.cols != m.config.patch_cols) throw Error("patch shape mismatch");
  Eigen::RowVectorXd x(pooled.data.size());
  for (std::size_t k = 0; k < pooled.data.size(); ++k) {
    const int ch = static_cast<int>(k % Patch::kChannels);
    x[static_cast<Eigen::Index>(k)] = m.channels.apply(pooled.data[k], ch) * m.config.channel_mask[ch];
  }
  return x;
}

std::span<const double> enc_params(const BcModel& m) { return {m.params.data(), m.encoder.param_count()}; }
std::span<const double> head_params(const BcModel& m) {
  return {m.params.data() + m.encoder.param_count(), m.head.param_count()};
}

}  // namespace

void rebuild(BcModel& m) {
  const auto& c = m.config;
  std::vector<int> enc{c.patch_rows * c.patch_cols * Patch::kChannels};
  for (int w : c.encoder_hidden) enc.push_back(w);
  m.encoder = nn::Mlp(enc);
  std::vector<int> head{m.encoder.output_dim() + 2 * c.past + 2 + 4 * static_cast<int>(c.local_offsets.size())};
  for (int w : c.head_hidden) head.push_back(w);
  head.push_back(2);
  m.head = nn::Mlp(head);
  const std::size_t n = m.encoder.param_count() + m.head.param_count();
  if (m.params.empty()) m.params.assign(n, 0.0);
  if (m.params.size() != n) throw Error("parameter count does not match the BC configuration");
}

BcModel make_bc(const BcConfig& config, std::uint64_t seed) {
  BcModel m;
  m.config = config;
  m.train_seed = seed;
  rebuild(m);
  Rng rng(seed);
  m.encoder.init({m.params.data(), m.encoder.param_count()}, rng);
  m.head.init({m.params.data() + m.encoder.param_count(), m.head.param_count()}, rng);
  return m;
}

namespace {

nn::Matrix bc_head_input(const BcModel& m, const nn::Matrix& enc, std::span<const Patch* const> patches,
                         std::span<const std::vector<Vec2>* const> pasts, std::span<const Vec2> goals) {
  const int e = m.encoder.output_dim();
  nn::Matrix in(enc.rows(), m.head.input_dim());
  for (Eigen::Index n = 0; n < enc.rows(); ++n) {
    in.block(n, 0, 1, e) = enc.row(n);
    const auto& past = *pasts[n];
    if (static_cast<int>(past.size()) != m.config.past) throw Error("past horizon mismatch");
    for (int j = 0; j < m.config.past; ++j) {
      in(n, e + 2 * j) = past[j].x();
      in(n, e + 2 * j + 1) = past[j].y();
    }
    in(n, e + 2 * m.config.past) = goals[n].x();
    in(n, e + 2 * m.config.past + 1) = goals[n].y();
    Vec2 u = past.back() - past[past.size() - 2];
    u = u.norm() > 1e-6 ? Vec2(u.normalized()) : Vec2(1.0, 0.0);
    const Vec2 left(-u.y(), u.x());
    int k = e + 2 * m.config.past + 2;
    for (const auto& [ahead, side] : m.config.local_offsets) {
      const auto v = sample_patch(*patches[n], m.config.patch_extent, past.back() + ahead * u + side * left);
      for (int ch = 0; ch < 4; ++ch) in(n, k++) = m.channels.apply(static_cast<float>(v[ch]), ch) * m.config.channel_mask[ch];
    }
  }
  return in;
}

}  // namespace

Vec2 bc_predict(const BcModel& m, const Patch& pooled, std::span<const Vec2> past, const Vec2& goal) {
  nn::Matrix x = bc_encoder_input(m, pooled);
  const nn::Matrix enc = m.encoder.forward(enc_params(m), x);
  const std::vector<Vec2> p(past.begin(), past.end());
  const std::vector<Vec2>* pp = &p;
  const Patch* patch = &pooled;
  const nn::Matrix out = m.head.forward(head_params(m), bc_head_input(m, enc, {&patch, 1}, {&pp, 1}, {&goal, 1}));
  return {out(0, 0), out(0, 1)};
}

BcTrainResult train_bc(const Dataset& dataset, const TrainConfig& config, const BcConfig& bc_config) {
  if (dataset.examples.empty()) throw Error("train_bc: dataset is empty");
  if (config.batch_size <= 0 || config.learning_rate <= 0.0 || config.epochs <= 0) {
    throw Error("train_bc: invalid configuration");
  }
  BcTrainResult result;
  result.model = make_bc(bc_config, config.seed);
  BcModel& m = result.model;
  const auto& ex = dataset.examples;
  const std::size_t n = ex.size();
  m.channels = fit_channel_stats(ex);
  Rng rng(derive_seed(config.seed, "train_bc"));
  nn::Adam adam(m.params.size(), config.learning_rate);
  nn::ParamVector grad(m.params.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t ne = m.encoder.param_count();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(config.batch_size));
      const auto b = static_cast<Eigen::Index>(end - begin);
      nn::Matrix enc_in(b, m.encoder.input_dim());
      std::vector<const std::vector<Vec2>*> pasts;
      std::vector<const Patch*> patches;
      std::vector<Vec2> goals;
      nn::Matrix target(b, 2);
      for (Eigen::Index r = 0; r < b; ++r) {
        const Example& e = ex[order[begin + static_cast<std::size_t>(r)]];
        enc_in.row(r) = bc_encoder_input(m, e.patch);
        pasts.push_back(&e.past);
        patches.push_back(&e.patch);
        goals.push_back(e.future.back());
        target(r, 0) = e.future.front().x() - e.past.back().x();
        target(r, 1) = e.future.front().y() - e.past.back().y();
      }
      nn::Mlp::Cache ec, hc;
      const nn::Matrix enc = m.encoder.forward(enc_params(m), enc_in, &ec);
      const nn::Matrix out = m.head.forward(head_params(m), bc_head_input(m, enc, patches, pasts, goals), &hc);
      const nn::Matrix diff = out - target;
      const double loss = diff.squaredNorm() / static_cast<double>(b);
      if (!std::isfinite(loss)) throw DivergenceError("train_bc: loss became non-finite");
      std::fill(grad.begin(), grad.end(), 0.0);
      nn::Matrix g_in;
      m.head.backward(head_params(m), hc, diff * (2.0 / static_cast<double>(b)),
                      {grad.data() + ne, m.head.param_count()}, &g_in);
      m.encoder.backward(enc_params(m), ec, g_in.leftCols(m.encoder.output_dim()), {grad.data(), ne});
      adam.step(m.params, grad);
      total += loss;
      ++batches;
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return result;
}

void BcPolicy::reset(const EpisodeView& view) {
  memory_ = {};
  waypoints_.clear();
  period_ = steps_per(model_.config.replan_hz, view.config().dt);
}

Action BcPolicy::act(const EpisodeView& view) {
  if (view.step_index() % period_ == 0) {
    const Observation obs = view.observe(model_.config.past);
    const Vec2 to_goal = obs.pose.to_local(view.spec().goal);
    const double d = to_goal.norm();
    const Vec2 goal = d > 1e-9 ? Vec2(to_goal / d * model_.config.goal_reach) : Vec2::Zero();
    const Vec2 delta = bc_predict(model_, pool_patch(obs.patch, model_.config.pool_factor), obs.past_positions, goal);
    Trajectory local;
    for (int k = 1; k <= 10; ++k) local.push_back(k * delta);
    waypoints_ = to_world(obs.pose, local);
    memory_ = {};
  }
  return track(waypoints_, view.state(), gains_, memory_, view.config().dt);
}

// ---------------------------------------------------------------------------
// Methods and reports
// ---------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::hybrid: return "hybrid";
    case Method::learner_only: return "learner_only";
    case Method::costmap_only: return "costmap_only";
    case Method::bc: return "bc";
    case Method::straight: return "straight";
    case Method::random: return "random";
    case Method::oracle: return "oracle";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::hybrid, Method::learner_only, Method::costmap_only, Method::bc, Method::straight,
                   Method::random, Method::oracle}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown method: " + s);
}

std::unique_ptr<Policy> make_policy(Method method, double phi, const EvalAssets& a) {
  auto need = [](const void* p, const char* what) {
    if (!p) throw Error(std::string("evaluation needs a ") + what);
  };
  switch (method) {
    case Method::hybrid:
    case Method::learner_only:
    case Method::costmap_only: {
      PlannerConfig pc = a.planner;
      pc.phi = method == Method::learner_only ? 0.0 : method == Method::costmap_only ? 1.0 : phi;
      need(a.library, "trajectory library");
      if (pc.phi < 1.0) need(a.model, "trained model");
      return std::make_unique<PlannerPolicy>(*a.library, a.model, pc, a.gains);
    }
    case Method::bc: need(a.bc, "behavior cloning model"); return std::make_unique<BcPolicy>(*a.bc, a.gains);
    case Method::straight: return std::make_unique<StraightPolicy>(a.gains);
    case Method::random: return std::make_unique<RandomPolicy>(a.random);
    case Method::oracle: return std::make_unique<OraclePolicy>(a.oracle_resolution, a.gains);
  }
  throw Error("unknown method");
}

std::vector<EpisodeResult> run_episodes(Method method, double phi, const std::vector<WorldSpec>& worlds,
                                        const std::vector<EpisodeSpec>& specs, const EvalAssets& assets,
                                        const EvalConfig& config) {
  auto policy = make_policy(method, phi, assets);
  std::vector<EpisodeResult> results;
  results.reserve(specs.size());
  for (const auto& s : specs) {
    if (s.world >= worlds.size()) throw Error("episode refers to a missing world");
    results.push_back(run_episode(worlds[s.world], *policy, s, config));
  }
  return results;
}

MetricsReport summarize(const std::string& method, double phi, const std::string& environment,
                        const std::vector<EpisodeResult>& results, double oracle_rate) {
  MetricsReport r;
  r.method = method;
  r.phi = phi;
  r.environment = environment;
  r.episodes = results.size();
  for (const auto& e : results) {
    switch (e.outcome) {
      case Outcome::success: ++r.success; break;
      case Outcome::stuck: ++r.stuck; break;
      case Outcome::trapped: ++r.trapped; break;
      case Outcome::timeout: ++r.timeout; break;
      case Outcome::no_path: ++r.no_path; break;
    }
  }
  if (r.episodes > 0) {
    const double n = static_cast<double>(r.episodes);
    r.raw_rate = static_cast<double>(r.success) / n;
    r.ci = 1.96 * std::sqrt(r.raw_rate * (1.0 - r.raw_rate) / n);
  }
  r.normalized_rate = oracle_rate > 0.0 ? r.raw_rate / oracle_rate : 0.0;
  return r;
}

MetricsReport evaluate(Method method, double phi, const std::vector<WorldSpec>& worlds, int n_episodes,
                       std::uint64_t seed, const EvalAssets& assets, const std::string& environment,
                       double oracle_rate, const EvalConfig& config) {
  const auto specs = make_specs(worlds, n_episodes, seed, config);
  const auto results = run_episodes(method, phi, worlds, specs, assets, config);
  if (method == Method::oracle) {
    const double rate = summarize("oracle", phi, environment, results, 0.0).raw_rate;
    return summarize(to_string(method), phi, environment, results, rate);
  }
  return summarize(to_string(method), phi, environment, results, oracle_rate);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "method,phi,environment,raw_rate,normalized_rate,ci,episodes,success,stuck,trapped,timeout,no_path\n";
  for (const auto& r : reports) {
    out << r.method << ',' << fmt(r.phi) << ',' << r.environment << ',' << fmt(r.raw_rate) << ','
        << fmt(r.normalized_rate) << ',' << fmt(r.ci) << ',' << r.episodes << ',' << r.success << ',' << r.stuck
        << ',' << r.trapped << ',' << r.timeout << ',' << r.no_path << '\n';
  }
}

std::vector<MetricsReport> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("method,phi,environment,raw_rate,normalized_rate,ci", 0) != 0) {
    throw Error("report csv: unexpected header");
  }
  std::vector<MetricsReport> reports;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 6) throw Error("report csv: short row");
    MetricsReport r;
    r.method = f[0];
    r.phi = std::stod(f[1]);
    r.environment = f[2];
    r.raw_rate = std::stod(f[3]);
    r.normalized_rate = std::stod(f[4]);
    r.ci = std::stod(f[5]);
    if (f.size() >= 12) {
      r.episodes = std::stoul(f[6]);
      r.success = std::stoul(f[7]);
      r.stuck = std::stoul(f[8]);
      r.trapped = std::stoul(f[9]);
      r.timeout = std::stoul(f[10]);
      r.no_path = std::stoul(f[11]);
    }
    reports.push_back(r);
  }
  return reports;
}

void write_report_svg(std::ostream& out, const std::vector<MetricsReport>& reports, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 80;
  const double pw = W - L - R, ph = H - T - B;
  double ymax = 1.0;
  for (const auto& r : reports) ymax = std::max(ymax, r.normalized_rate + r.ci);
  auto y_of = [&](double v) { return T + ph * (1.0 - v / ymax); };
  const bool sweep = !reports.empty() && std::all_of(reports.begin(), reports.end(), [](const MetricsReport& r) {
    return r.method == "hybrid";
  }) && reports.size() > 1;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<title>" << title << "</title>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v)
        << "</text>\n";
  }
  const std::size_t n = reports.size();
  std::string points;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    const double slot = pw / std::max<std::size_t>(n, 1);
    const double cx = sweep ? L + pw * r.phi : L + slot * (i + 0.5);
    const double y = y_of(r.normalized_rate);
    const std::string label = sweep ? "phi=" + fmt(r.phi) : r.method + " (" + r.environment + ")";
    if (sweep) {
      points += fmt(cx) + "," + fmt(y) + " ";
      out << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(y) << "\" r=\"4\" data-phi=\"" << fmt(r.phi)
          << "\" data-rate=\"" << fmt(r.normalized_rate) << "\"/>\n";
    } else {
      out << "<rect x=\"" << fmt(cx - 0.35 * slot) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(0.7 * slot)
          << "\" height=\"" << fmt(T + ph - y) << "\" fill=\"steelblue\" data-method=\"" << r.method
          << "\" data-rate=\"" << fmt(r.normalized_rate) << "\"/>\n";
    }
    out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(y_of(r.normalized_rate - r.ci)) << "\" x2=\"" << fmt(cx)
        << "\" y2=\"" << fmt(y_of(r.normalized_rate + r.ci)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(cx) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << label << "</text>\n";
  }
  if (sweep) out << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"steelblue\"/>\n";
  out << "<text x=\"14\" y=\"" << T + ph / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << T + ph / 2
      << ")\" text-anchor=\"middle\">normalized success rate</text>\n";
  out << "</svg>\n";
}

}  // namespace hip
