#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "hip/imitative.hpp"

using namespace hip;
using testing::random_example;
using testing::small_model_config;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Zeroes the step network and sets the output bias directly.
void force_step_output(ImitativeModel& m, double rx, double ry, double a, double b, double off) {
  auto p = m.step_params();
  std::fill(p.begin(), p.end(), 0.0);
  const std::size_t n = p.size();
  p[n - 5] = rx;
  p[n - 4] = ry;
  p[n - 3] = a;
  p[n - 2] = b;
  p[n - 1] = off;
}

// Independent density: explicit inverse and determinant of the covariance.
double reference_log_density(const Vec2& x, const StepDistribution& s) {
  const Eigen::Matrix2d cov = s.scale * s.scale.transpose();
  const Vec2 d = x - s.mean;
  return -kLog2Pi - 0.5 * std::log(cov.determinant()) - 0.5 * d.dot(cov.inverse() * d);
}

Context random_context(const ImitativeModel& m, Rng& rng) {
  const auto ex = random_example(m.config, rng);
  return encode_pooled(m, ex.patch, ex.past);
}

}  // namespace

TEST_CASE("sigma floor reproduces eta") {
  const double f = sigma_floor_for(64.0, 10);
  CHECK(f == doctest::Approx(0.01626).epsilon(1e-3));
  CHECK(10 * (-kLog2Pi - 2 * std::log(f)) == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("encode is deterministic and sensitive to appearance") {
  const auto cfg = small_model_config();
  auto m = make_model(cfg, 1);
  Rng rng(2);
  const auto ex = random_example(cfg, rng);
  const auto a = encode_pooled(m, ex.patch, ex.past);
  const auto b = encode_pooled(m, ex.patch, ex.past);
  CHECK(a.features == b.features);
  CHECK(a.features.size() == m.context_dim());

  Patch other = ex.patch;
  for (int r = 0; r < other.rows; ++r)
    for (int c = 0; c < other.cols; ++c) other.at(r, c, 1) = 1.0f - other.at(r, c, 1);
  const auto d = encode_pooled(m, other, ex.past);
  CHECK((d.features - a.features).norm() > 1e-6);

  auto zero = m;
  std::fill(zero.params.begin(), zero.params.end(), 0.0);
  const auto z = encode_pooled(zero, ex.patch, ex.past);
  CHECK(z.features.head(zero.encoder.output_dim()).norm() == 0.0);

  CHECK_THROWS_AS(encode_pooled(m, Patch(3, 4), ex.past), Error);
}

TEST_CASE("a model pinned to the constant-velocity mode at the floor scores eta") {
  auto m = make_model(small_model_config(), 3);
  force_step_output(m, 0, 0, -60, -60, 0);
  Rng rng(4);
  const auto ctx = random_context(m, rng);
  Trajectory tau;
  Vec2 x2 = ctx.past[ctx.past.size() - 2], x1 = ctx.past.back();
  for (int i = 0; i < 10; ++i) {
    const Vec2 x = 2 * x1 - x2;
    tau.push_back(x);
    x2 = x1;
    x1 = x;
  }
  CHECK(log_prob(m, ctx, tau) == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("standard Gaussian density at its mean") {
  StepDistribution s;
  CHECK(gaussian_log_density(Vec2::Zero(), s) == doctest::Approx(-kLog2Pi).epsilon(1e-14));
  CHECK(gaussian_log_density(Vec2::Zero(), s) == doctest::Approx(-1.8379).epsilon(1e-4));
}

TEST_CASE("log_prob matches a step-by-step closed-form evaluation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = make_model(small_model_config(), seed);
    Rng rng(seed + 100);
    for (auto& p : m.params) p += 0.3 * rng.normal();
    const auto ctx = random_context(m, rng);
    const auto tau = testing::random_trajectory(10, rng);
    const auto steps = step_distributions(m, ctx, tau);
    REQUIRE(steps.size() == 10);
    double total = 0.0;
    for (int i = 0; i < 10; ++i) {
      CHECK(steps[i].scale(0, 0) >= m.sigma_floor);
      CHECK(steps[i].scale(1, 1) >= m.sigma_floor);
      CHECK(steps[i].scale(0, 1) == 0.0);
      total += reference_log_density(tau[i], steps[i]);
    }
    CHECK(log_prob(m, ctx, tau) == doctest::Approx(total).epsilon(1e-10));
    const std::vector<Trajectory> batch{tau, testing::random_trajectory(10, rng)};
    const auto lp = log_prob_batch(m, ctx, batch);
    CHECK(lp[0] == doctest::Approx(total).epsilon(1e-10));
    CHECK(lp[1] == doctest::Approx(log_prob(m, ctx, batch[1])).epsilon(1e-10));
  }
}

TEST_CASE("first step mean is the constant-velocity continuation plus the residual") {
  auto m = make_model(small_model_config(false), 5);
  force_step_output(m, 0.1, -0.2, 0, 0, 0);
  Rng rng(6);
  const auto ctx = random_context(m, rng);
  const auto steps = step_distributions(m, ctx, testing::random_trajectory(10, rng));
  const Vec2 cv = 2 * ctx.past.back() - ctx.past[ctx.past.size() - 2];
  CHECK((steps[0].mean - (cv + Vec2(0.1, -0.2))).norm() < 1e-12);
}

TEST_CASE("log_prob never exceeds eta") {
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    auto m = make_model(small_model_config(), trial % 10);
    for (auto& p : m.params) p += rng.normal();
    const auto ctx = random_context(m, rng);
    const auto tau = testing::random_trajectory(10, rng, rng.uniform(0.0, 2.0));
    REQUIRE(log_prob(m, ctx, tau) <= m.eta);
  }
}

TEST_CASE("zero noise sample is the mean rollout") {
  auto m = make_model(small_model_config(), 8);
  Rng rng(9);
  const auto ctx = random_context(m, rng);
  const std::vector<Vec2> zeros(10, Vec2::Zero());
  const auto tau = sample_with_noise(m, ctx, zeros);
  const auto steps = step_distributions(m, ctx, tau);
  for (int i = 0; i < 10; ++i) CHECK((tau[i] - steps[i].mean).norm() < 1e-12);

  Rng a(3), b(3);
  const auto s1 = sample(m, ctx, a), s2 = sample(m, ctx, b);
  for (int i = 0; i < 10; ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("Monte Carlo mean matches the analytic mean rollout") {
  // Residuals independent of previous points keep the rollout mean linear.
  auto cfg = small_model_config(false);
  auto m = make_model(cfg, 10);
  Rng init(11);
  for (auto& p : m.step_params()) p += 0.2 * init.normal();
  const int c = m.context_dim();
  const int width = cfg.step_hidden.front();
  for (int row = c; row < c + 4; ++row)
    for (int j = 0; j < width; ++j) m.step_params()[static_cast<std::size_t>(row) * width + j] = 0.0;
  const auto ctx = random_context(m, init);

  const std::vector<Vec2> zeros(10, Vec2::Zero());
  const auto mean = sample_with_noise(m, ctx, zeros);
  const int n = 10000;
  std::vector<Vec2> sum(10, Vec2::Zero()), sq(10, Vec2::Zero());
  Rng rng(12);
  for (int k = 0; k < n; ++k) {
    const auto s = sample(m, ctx, rng);
    for (int i = 0; i < 10; ++i) {
      sum[i] += s[i];
      sq[i] += s[i].cwiseProduct(s[i]);
    }
  }
  for (int i = 0; i < 10; ++i) {
    const Vec2 mu = sum[i] / n;
    const Vec2 var = sq[i] / n - mu.cwiseProduct(mu);
    for (int d = 0; d < 2; ++d) {
      const double se = std::sqrt(var[d] / n);
      CHECK(std::abs(mu[d] - mean[i][d]) <= 3.0 * se);
    }
  }
}

TEST_CASE("a single step density integrates to one") {
  StepDistribution s;
  s.mean = Vec2(0.3, -0.1);
  s.scale << 0.4, 0.0, 0.25, 0.2;
  const Eigen::Matrix2d cov = s.scale * s.scale.transpose();
  const double rx = 6 * std::sqrt(cov(0, 0)), ry = 6 * std::sqrt(cov(1, 1));
  const int n = 600;
  const double hx = 2 * rx / n, hy = 2 * ry / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec2 x(s.mean.x() - rx + (i + 0.5) * hx, s.mean.y() - ry + (j + 0.5) * hy);
      total += std::exp(gaussian_log_density(x, s)) * hx * hy;
    }
  CHECK(std::abs(total - 1.0) < 1e-3);
}

TEST_CASE("sampling and density agree through the change of variables") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = make_model(small_model_config(), trial);
    for (auto& p : m.params) p += 0.3 * rng.normal();
    const auto ctx = random_context(m, rng);
    std::vector<Vec2> z;
    for (int i = 0; i < 10; ++i) z.emplace_back(rng.normal(), rng.normal());
    double flow = 0.0;
    const auto tau = sample_with_noise(m, ctx, z, &flow);
    CHECK(std::abs(flow - log_prob(m, ctx, tau)) < 1e-9);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = make_model(small_model_config(), seed);
    Rng rng(seed + 500);
    const auto ex = random_example(m.config, rng);
    CHECK(grad_check(m, ex) < 1e-4);
  }
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 1.0);
}

TEST_CASE("finite-difference steps agree to leading order") {
  auto m = make_model(small_model_config(), 21);
  Rng rng(22);
  const auto ex = random_example(m.config, rng);
  const double coarse = grad_check(m, ex, 1e-4);
  const double fine = grad_check(m, ex, 1e-6);
  CHECK(coarse < 1e-4);
  CHECK(fine < 1e-4);
}

TEST_CASE("a masked channel's encoder weights get zero gradient") {
  auto cfg = small_model_config();
  cfg.channel_mask = {0.0f, 1.0f, 1.0f, 1.0f};
  auto m = make_model(cfg, 23);
  Rng rng(24);
  const auto ex = random_example(cfg, rng);
  const Example* ptr = &ex;
  nn::ParamVector grad(m.params.size(), 0.0);
  batch_nll(m, std::span<const Example* const>(&ptr, 1), std::span<const Trajectory>(&ex.future, 1), grad);
  const int width = cfg.encoder_hidden.front();
  const int inputs = cfg.patch_rows * cfg.patch_cols * 4;
  for (int k = 0; k < inputs; k += 4) {
    for (int j = 0; j < width; ++j) {
      const std::size_t idx = static_cast<std::size_t>(k) * width + j;
      CHECK(grad[idx] == 0.0);
      auto up = m, down = m;
      up.params[idx] += 1e-5;
      down.params[idx] -= 1e-5;
      const double numeric = (mean_nll(up, std::span<const Example>(&ex, 1)) -
                              mean_nll(down, std::span<const Example>(&ex, 1))) / 2e-5;
      CHECK(std::abs(numeric) < 1e-9);
    }
  }
}

namespace {
Dataset small_dataset(const ModelConfig& cfg, int n, std::uint64_t seed) {
  Dataset d;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) d.examples.push_back(random_example(cfg, rng));
  return d;
}
}  // namespace

TEST_CASE("training lowers held-in loss and is deterministic") {
  const auto cfg = small_model_config();
  const Dataset d = small_dataset(cfg, 96, 30);
  TrainConfig tc;
  tc.epochs = 5;
  tc.held_in = 32;
  tc.seed = 4;
  const auto a = train(d, tc, cfg);
  const auto b = train(d, tc, cfg);
  CHECK(a.held_in_after <= a.held_in_before);
  CHECK(a.epoch_loss.size() == 5);
  CHECK(a.model.params == b.model.params);
  tc.seed = 5;
  CHECK(train(d, tc, cfg).model.params != a.model.params);
}

TEST_CASE("training rejects an empty dataset") {
  CHECK_THROWS_AS(train(Dataset{}, TrainConfig{}, small_model_config()), Error);
}

TEST_CASE("a single example is fit up to the clamp") {
  const auto cfg = small_model_config();
  const Dataset d = small_dataset(cfg, 1, 31);
  TrainConfig tc;
  tc.epochs = 60000;
  tc.batch_size = 1;
  tc.held_in = 1;
  tc.perturbation_sigma = 0.0;  // target jitter alone keeps the gap above a nat
  const auto r = train(d, tc, cfg);
  const auto& ex = d.examples.front();
  const auto ctx = encode_pooled(r.model, ex.patch, ex.past);
  const double lp = log_prob(r.model, ctx, ex.future);
  CHECK(lp <= r.model.eta);
  CHECK(r.model.eta - lp <= 0.5);
}

TEST_CASE("channel statistics standardize each channel") {
  const auto cfg = small_model_config();
  const Dataset d = small_dataset(cfg, 20, 40);
  const auto stats = fit_channel_stats(d.examples);
  for (int ch = 0; ch < 4; ++ch) {
    double sum = 0, sq = 0;
    int n = 0;
    for (const auto& e : d.examples)
      for (std::size_t k = ch; k < e.patch.data.size(); k += 4) {
        const double v = stats.apply(e.patch.data[k], ch);
        sum += v;
        sq += v * v;
        ++n;
      }
    CHECK(std::abs(sum / n) < 1e-6);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-4));
  }
}
