#include "hip/imitative.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace hip {

namespace {

constexpr int kStepOutputs = 5;  // residual x, residual y, diag a, diag b, off-diagonal
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double softplus(double a) { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }
double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

int step_input_dim(const ImitativeModel& m) { return m.context_dim() + 5 + m.local_feature_dim(); }

StepDistribution to_distribution(const double* out, const Vec2& base, double floor) {
  StepDistribution s;
  s.mean = base + Vec2(out[0], out[1]);
  s.scale << floor + softplus(out[2]), 0.0, out[4], floor + softplus(out[3]);
  return s;
}

// -log N(target; base + residual, L L^T); optional gradient w.r.t. the raw outputs.
double step_nll(const double* out, const Vec2& base, const Vec2& target, double floor, double* grad) {
  const double l11 = floor + softplus(out[2]);
  const double l22 = floor + softplus(out[3]);
  const double l21 = out[4];
  const double y1 = target.x() - base.x() - out[0];
  const double y2 = target.y() - base.y() - out[1];
  const double z1 = y1 / l11;
  const double z2 = (y2 - l21 * z1) / l22;
  const double nll = kLog2Pi + std::log(l11) + std::log(l22) + 0.5 * (z1 * z1 + z2 * z2);
  if (grad) {
    const double gz2 = z2;
    const double gy2 = gz2 / l22;
    const double gl21 = -gz2 * z1 / l22;
    const double gz1 = z1 - gz2 * l21 / l22;
    const double gl22 = 1.0 / l22 - z2 * z2 / l22;
    const double gy1 = gz1 / l11;
    const double gl11 = 1.0 / l11 - gz1 * z1 / l11;
    grad[0] = -gy1;
    grad[1] = -gy2;
    grad[2] = gl11 * sigmoid(out[2]);
    grad[3] = gl22 * sigmoid(out[3]);
    grad[4] = gl21;
  }
  return nll;
}

// Writes one step-network input row.
void fill_step_row(const ImitativeModel& m, const double* features, const Patch& patch, const Vec2& x1,
                   const Vec2& x2, int step_index, double* row) {
  const int c = m.context_dim();
  std::copy_n(features, c, row);
  row[c + 0] = x1.x();
  row[c + 1] = x1.y();
  row[c + 2] = x2.x();
  row[c + 3] = x2.y();
  row[c + 4] = static_cast<double>(step_index) / m.config.horizon;
  if (!m.config.local_features) return;
  Vec2 u = x1 - x2;
  const double norm = u.norm();
  u = norm > 1e-6 ? Vec2(u / norm) : Vec2(1.0, 0.0);
  const Vec2 left(-u.y(), u.x());
  int k = c + 5;
  for (const auto& [ahead, side] : m.config.local_offsets) {
    const auto v = sample_patch(patch, m.config.patch_extent, x1 + ahead * u + side * left);
    for (int ch = 0; ch < 4; ++ch) row[k++] = m.patch_input(static_cast<float>(v[ch]), ch);
  }
}

// Previous two points feeding step i (0-based) of a trajectory.
std::pair<Vec2, Vec2> previous_points(std::span<const Vec2> past, std::span<const Vec2> traj, int i) {
  const std::size_t p = past.size();
  const Vec2 x1 = i == 0 ? past[p - 1] : traj[i - 1];
  const Vec2 x2 = i == 0 ? past[p - 2] : (i == 1 ? past[p - 1] : traj[i - 2]);
  return {x1, x2};
}

void check_context(const ImitativeModel& m, const Context& ctx) {
  if (ctx.features.size() != m.context_dim()) throw Error("context dimension mismatch");
  if (static_cast<int>(ctx.past.size()) != m.config.past) throw Error("past horizon mismatch");
}

void check_trajectory(const ImitativeModel& m, std::span<const Vec2> traj) {
  if (static_cast<int>(traj.size()) != m.config.horizon) throw Error("trajectory horizon mismatch");
  for (const auto& p : traj) {
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) throw Error("non-finite trajectory point");
  }
}

}  // namespace

double sigma_floor_for(double eta, int horizon) {
  return std::exp(-(eta / horizon + kLog2Pi) / 2.0);
}

std::array<double, 4> sample_patch(const Patch& pooled, double extent, const Vec2& local) {
  const double cell = extent / pooled.rows;
  const double fr = std::clamp(local.x() / cell - 0.5, 0.0, static_cast<double>(pooled.rows - 1));
  const double fc = std::clamp((0.5 * extent - local.y()) / cell - 0.5, 0.0, static_cast<double>(pooled.cols - 1));
  const int r0 = std::min(static_cast<int>(fr), pooled.rows - 1);
  const int c0 = std::min(static_cast<int>(fc), pooled.cols - 1);
  const int r1 = std::min(r0 + 1, pooled.rows - 1);
  const int c1 = std::min(c0 + 1, pooled.cols - 1);
  const double ar = fr - r0, ac = fc - c0;
  std::array<double, 4> v{};
  for (int ch = 0; ch < 4; ++ch) {
    v[ch] = (1 - ar) * ((1 - ac) * pooled.at(r0, c0, ch) + ac * pooled.at(r0, c1, ch)) +
            ar * ((1 - ac) * pooled.at(r1, c0, ch) + ac * pooled.at(r1, c1, ch));
  }
  return v;
}

void rebuild(ImitativeModel& m) {
  const auto& cfg = m.config;
  std::vector<int> enc{cfg.patch_rows * cfg.patch_cols * Patch::kChannels};
  for (int w : cfg.encoder_hidden) enc.push_back(w);
  if (enc.size() < 2) throw Error("encoder needs at least one layer");
  m.encoder = nn::Mlp(enc);
  std::vector<int> step{m.context_dim() + 5 + m.local_feature_dim()};
  for (int w : cfg.step_hidden) step.push_back(w);
  step.push_back(kStepOutputs);
  m.step_net = nn::Mlp(step);
  m.eta = cfg.eta;
  m.sigma_floor = sigma_floor_for(cfg.eta, cfg.horizon);
  const std::size_t n = m.encoder.param_count() + m.step_net.param_count();
  if (m.params.empty()) m.params.assign(n, 0.0);
  if (m.params.size() != n) throw Error("parameter count does not match the model configuration");
}

ImitativeModel make_model(const ModelConfig& config, std::uint64_t seed) {
  ImitativeModel m;
  m.config = config;
  m.train_seed = seed;
  rebuild(m);
  Rng rng(seed);
  m.encoder.init(m.encoder_params(), rng);
  m.step_net.init(m.step_params(), rng);
  // Start with small residuals and an isotropic scale of init_scale.
  auto step = m.step_params();
  const auto& widths = m.step_net.widths();
  const int last_in = widths[widths.size() - 2];
  const std::size_t w_off = step.size() - (static_cast<std::size_t>(last_in) * kStepOutputs + kStepOutputs);
  for (std::size_t k = w_off; k < step.size() - kStepOutputs; ++k) step[k] *= 0.1;
  const double diag = std::log(std::expm1(std::max(config.init_scale - m.sigma_floor, 1e-6)));
  step[step.size() - kStepOutputs + 2] = diag;
  step[step.size() - kStepOutputs + 3] = diag;
  return m;
}

ChannelStats fit_channel_stats(std::span<const Example> examples) {
  ChannelStats stats;
  std::array<double, 4> sum{}, sq{};
  std::size_t count = 0;
  for (const auto& e : examples) {
    for (std::size_t k = 0; k < e.patch.data.size(); ++k) {
      const double v = e.patch.data[k];
      sum[k % Patch::kChannels] += v;
      sq[k % Patch::kChannels] += v * v;
    }
    count += e.patch.data.size() / Patch::kChannels;
  }
  if (count == 0) return stats;
  for (int ch = 0; ch < 4; ++ch) {
    const double mean = sum[ch] / count;
    const double var = std::max(sq[ch] / count - mean * mean, 0.0);
    stats.offset[ch] = mean;
    stats.scale[ch] = 1.0 / std::max(std::sqrt(var), 1e-3);
  }
  return stats;
}

Eigen::RowVectorXd encoder_input(const ImitativeModel& m, const Patch& pooled) {
  if (pooled.rows != m.config.patch_rows || pooled.cols != m.config.patch_cols) {
    throw Error("patch shape mismatch");
  }
  Eigen::RowVectorXd x(pooled.data.size());
  for (std::size_t k = 0; k < pooled.data.size(); ++k) {
    x[static_cast<Eigen::Index>(k)] = m.patch_input(pooled.data[k], static_cast<int>(k % Patch::kChannels));
  }
  return x;
}

Context encode_pooled(const ImitativeModel& m, const Patch& pooled, std::span<const Vec2> past) {
  if (static_cast<int>(past.size()) != m.config.past) throw Error("past horizon mismatch");
  nn::Matrix x = encoder_input(m, pooled);
  const nn::Matrix e = m.encoder.forward(m.encoder_params(), x);
  Context ctx;
  ctx.features.resize(m.context_dim());
  ctx.features.head(e.cols()) = e.row(0).transpose();
  for (std::size_t j = 0; j < past.size(); ++j) {
    ctx.features[e.cols() + 2 * j] = past[j].x();
    ctx.features[e.cols() + 2 * j + 1] = past[j].y();
  }
  ctx.patch = pooled;
  ctx.past.assign(past.begin(), past.end());
  return ctx;
}

Context encode(const ImitativeModel& m, const Observation& obs) {
  if (obs.patch.rows != m.config.patch_rows * m.config.pool_factor ||
      obs.patch.cols != m.config.patch_cols * m.config.pool_factor) {
    throw Error("observation patch shape mismatch");
  }
  return encode_pooled(m, pool_patch(obs.patch, m.config.pool_factor), obs.past_positions);
}

double gaussian_log_density(const Vec2& x, const StepDistribution& s) {
  const double l11 = s.scale(0, 0), l21 = s.scale(1, 0), l22 = s.scale(1, 1);
  const Vec2 y = x - s.mean;
  const double z1 = y.x() / l11;
  const double z2 = (y.y() - l21 * z1) / l22;
  return -kLog2Pi - std::log(l11) - std::log(l22) - 0.5 * (z1 * z1 + z2 * z2);
}

std::vector<StepDistribution> step_distributions(const ImitativeModel& m, const Context& ctx,
                                                 std::span<const Vec2> traj) {
  check_context(m, ctx);
  check_trajectory(m, traj);
  const int h = m.config.horizon;
  nn::Matrix in(h, step_input_dim(m));
  for (int i = 0; i < h; ++i) {
    const auto [x1, x2] = previous_points(ctx.past, traj, i);
    fill_step_row(m, ctx.features.data(), ctx.patch, x1, x2, i, in.row(i).data());
  }
  const nn::Matrix out = m.step_net.forward(m.step_params(), in);
  std::vector<StepDistribution> steps;
  for (int i = 0; i < h; ++i) {
    const auto [x1, x2] = previous_points(ctx.past, traj, i);
    steps.push_back(to_distribution(out.row(i).data(), 2.0 * x1 - x2, m.sigma_floor));
  }
  return steps;
}

std::vector<double> log_prob_batch(const ImitativeModel& m, const Context& ctx,
                                   std::span<const Trajectory> trajs) {
  check_context(m, ctx);
  const int h = m.config.horizon;
  const auto n = static_cast<Eigen::Index>(trajs.size());
  nn::Matrix in(n * h, step_input_dim(m));
  for (Eigen::Index t = 0; t < n; ++t) {
    check_trajectory(m, trajs[t]);
    for (int i = 0; i < h; ++i) {
      const auto [x1, x2] = previous_points(ctx.past, trajs[t], i);
      fill_step_row(m, ctx.features.data(), ctx.patch, x1, x2, i, in.row(t * h + i).data());
    }
  }
  const nn::Matrix out = m.step_net.forward(m.step_params(), in);
  std::vector<double> lp(trajs.size(), 0.0);
  for (Eigen::Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (int i = 0; i < h; ++i) {
      const auto [x1, x2] = previous_points(ctx.past, trajs[t], i);
      s -= step_nll(out.row(t * h + i).data(), 2.0 * x1 - x2, trajs[t][i], m.sigma_floor, nullptr);
    }
    lp[t] = s;
  }
  return lp;
}

double log_prob(const ImitativeModel& m, const Context& ctx, std::span<const Vec2> traj) {
  const Trajectory t(traj.begin(), traj.end());
  return log_prob_batch(m, ctx, std::span<const Trajectory>(&t, 1)).front();
}

Trajectory sample_with_noise(const ImitativeModel& m, const Context& ctx, std::span<const Vec2> noise,
                             double* log_density) {
  check_context(m, ctx);
  const int h = m.config.horizon;
  if (static_cast<int>(noise.size()) != h) throw Error("noise length must equal the horizon");
  Trajectory traj;
  traj.reserve(h);
  nn::Matrix in(1, step_input_dim(m));
  double acc = 0.0;
  for (int i = 0; i < h; ++i) {
    const auto [x1, x2] = previous_points(ctx.past, traj, i);
    fill_step_row(m, ctx.features.data(), ctx.patch, x1, x2, i, in.row(0).data());
    const nn::Matrix out = m.step_net.forward(m.step_params(), in);
    const StepDistribution s = to_distribution(out.row(0).data(), 2.0 * x1 - x2, m.sigma_floor);
    traj.push_back(s.mean + s.scale * noise[i]);
    acc += -kLog2Pi - 0.5 * noise[i].squaredNorm() - std::log(s.scale(0, 0)) - std::log(s.scale(1, 1));
  }
  if (log_density) *log_density = acc;
  return traj;
}

Trajectory sample(const ImitativeModel& m, const Context& ctx, Rng& rng) {
  std::vector<Vec2> z(m.config.horizon);
  for (auto& v : z) v = Vec2(rng.normal(), rng.normal());
  return sample_with_noise(m, ctx, z);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

double batch_nll(const ImitativeModel& m, std::span<const Example* const> examples,
                 std::span<const Trajectory> targets, std::span<double> grad) {
  const auto b = static_cast<Eigen::Index>(examples.size());
  if (b == 0) throw Error("empty batch");
  const int h = m.config.horizon;
  const bool want_grad = !grad.empty();

  nn::Matrix enc_in(b, m.encoder.input_dim());
  for (Eigen::Index n = 0; n < b; ++n) enc_in.row(n) = encoder_input(m, examples[n]->patch);
  nn::Mlp::Cache enc_cache;
  const nn::Matrix enc = m.encoder.forward(m.encoder_params(), enc_in, want_grad ? &enc_cache : nullptr);
  const int enc_dim = m.encoder.output_dim();

  nn::Matrix in(b * h, step_input_dim(m));
  Eigen::VectorXd features(m.context_dim());
  for (Eigen::Index n = 0; n < b; ++n) {
    const Example& ex = *examples[n];
    if (static_cast<int>(ex.past.size()) != m.config.past) throw Error("past horizon mismatch");
    features.head(enc_dim) = enc.row(n).transpose();
    for (std::size_t j = 0; j < ex.past.size(); ++j) {
      features[enc_dim + 2 * j] = ex.past[j].x();
      features[enc_dim + 2 * j + 1] = ex.past[j].y();
    }
    const Trajectory& tau = targets[n];
    for (int i = 0; i < h; ++i) {
      const auto [x1, x2] = previous_points(ex.past, tau, i);
      fill_step_row(m, features.data(), ex.patch, x1, x2, i, in.row(n * h + i).data());
    }
  }

  nn::Mlp::Cache step_cache;
  const nn::Matrix out = m.step_net.forward(m.step_params(), in, want_grad ? &step_cache : nullptr);
  nn::Matrix g_out(b * h, kStepOutputs);
  double total = 0.0;
  for (Eigen::Index n = 0; n < b; ++n) {
    const Trajectory& tau = targets[n];
    for (int i = 0; i < h; ++i) {
      const auto [x1, x2] = previous_points(examples[n]->past, tau, i);
      total += step_nll(out.row(n * h + i).data(), 2.0 * x1 - x2, tau[i], m.sigma_floor,
                        want_grad ? g_out.row(n * h + i).data() : nullptr);
    }
  }
  const double mean = total / static_cast<double>(b);
  if (!want_grad) return mean;

  g_out /= static_cast<double>(b);
  auto g_enc_params = grad.subspan(0, m.encoder.param_count());
  auto g_step_params = grad.subspan(m.encoder.param_count(), m.step_net.param_count());
  nn::Matrix g_in;
  m.step_net.backward(m.step_params(), step_cache, g_out, g_step_params, &g_in);
  nn::Matrix g_enc = nn::Matrix::Zero(b, enc_dim);
  for (Eigen::Index n = 0; n < b; ++n) {
    for (int i = 0; i < h; ++i) g_enc.row(n) += g_in.block(n * h + i, 0, 1, enc_dim);
  }
  m.encoder.backward(m.encoder_params(), enc_cache, g_enc, g_enc_params);
  return mean;
}

double mean_nll(const ImitativeModel& m, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
    const std::size_t end = std::min(examples.size(), begin + kChunk);
    std::vector<const Example*> ptrs;
    std::vector<Trajectory> targets;
    for (std::size_t i = begin; i < end; ++i) {
      ptrs.push_back(&examples[i]);
      targets.push_back(examples[i].future);
    }
    total += batch_nll(m, ptrs, targets, {}) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(examples.size());
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const ModelConfig& model_config) {
  if (dataset.examples.empty()) throw Error("train: dataset is empty");
  if (config.batch_size <= 0 || config.learning_rate <= 0.0 || config.perturbation_sigma < 0.0 ||
      config.epochs <= 0) {
    throw Error("train: invalid configuration");
  }
  TrainResult result;
  result.model = make_model(model_config, config.seed);
  ImitativeModel& m = result.model;
  const auto& ex = dataset.examples;
  const std::size_t n = ex.size();
  m.channels = fit_channel_stats(ex);
  const std::span<const Example> held_in(ex.data(), std::min(config.held_in, n));
  result.held_in_before = mean_nll(m, held_in);

  Rng rng(derive_seed(config.seed, "train"));
  nn::Adam adam(m.params.size(), config.learning_rate);
  nn::ParamVector grad(m.params.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Trajectory> perturbed(n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) {
      perturbed[i] = ex[i].future;
      for (auto& p : perturbed[i]) {
        p.x() += config.perturbation_sigma * rng.normal();
        p.y() += config.perturbation_sigma * rng.normal();
      }
    }
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_total = 0.0;
    std::size_t batches = 0;
    std::vector<const Example*> ptrs;
    std::vector<Trajectory> targets;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(config.batch_size));
      ptrs.clear();
      targets.clear();
      for (std::size_t k = begin; k < end; ++k) {
        ptrs.push_back(&ex[order[k]]);
        targets.push_back(perturbed[order[k]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_nll(m, ptrs, targets, grad);
      if (!std::isfinite(loss)) throw DivergenceError("train: loss became non-finite");
      adam.step(m.params, grad);
      epoch_total += loss;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
  }
  result.held_in_after = mean_nll(m, held_in);
  if (!std::isfinite(result.held_in_after)) throw DivergenceError("train: held-in loss is non-finite");
  return result;
}

double grad_check(ImitativeModel m, const Example& example, double step, double floor) {
  const Example* ptr = &example;
  const std::span<const Example* const> batch(&ptr, 1);
  const std::span<const Trajectory> target(&example.future, 1);
  nn::ParamVector analytic(m.params.size(), 0.0);
  batch_nll(m, batch, target, analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const double saved = m.params[i];
    m.params[i] = saved + step;
    const double up = batch_nll(m, batch, target, {});
    m.params[i] = saved - step;
    const double down = batch_nll(m, batch, target, {});
    m.params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(std::abs(analytic[i]) + std::abs(numeric), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hip
