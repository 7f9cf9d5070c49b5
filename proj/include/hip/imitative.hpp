#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hip/common.hpp"
#include "hip/datakit.hpp"
#include "hip/nn.hpp"
#include "hip/worldsim.hpp"

namespace hip {

/// Per-channel standardization (value - offset) * scale of patch inputs,
/// fitted on the training patches.
struct ChannelStats {
  std::array<double, 4> offset{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> scale{1.0, 1.0, 1.0, 1.0};
  double apply(float value, int channel) const { return (value - offset[channel]) * scale[channel]; }
};

ChannelStats fit_channel_stats(std::span<const Example> examples);

struct ModelConfig {
  int patch_rows = 20;  // pooled encoder resolution
  int patch_cols = 20;
  double patch_extent = 10.0;  // meters covered by the patch side
  int pool_factor = 5;         // raw observation patch -> encoder resolution
  int horizon = 10;
  int past = 10;
  std::vector<int> encoder_hidden{128, 64};
  std::vector<int> step_hidden{64, 64};
  // Step network also reads the pooled patch around the previous trajectory
  // point, at these (ahead, left) offsets in the direction of travel.
  bool local_features = true;
  std::vector<std::array<double, 2>> local_offsets{{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}};
  // Multiplies patch channels (rgb, height) before they reach the network.
  std::array<float, 4> channel_mask{1.0f, 1.0f, 1.0f, 1.0f};
  double eta = 64.0;
  double init_scale = 0.1;
};

/// sigma_floor such that H steps at the floor scale give log-density eta.
double sigma_floor_for(double eta, int horizon);

/// Conditional trajectory density q(tau | o): an encoder producing a context
/// vector and an autoregressive Gaussian step network.
struct ImitativeModel {
  ModelConfig config;
  nn::ParamVector params;
  double sigma_floor = 0.0;
  double eta = 64.0;
  std::uint64_t train_seed = 0;
  ChannelStats channels;

  double patch_input(float value, int channel) const {
    return channels.apply(value, channel) * config.channel_mask[channel];
  }

  nn::Mlp encoder;
  nn::Mlp step_net;

  std::size_t encoder_param_count() const { return encoder.param_count(); }
  std::span<double> encoder_params() { return {params.data(), encoder.param_count()}; }
  std::span<const double> encoder_params() const { return {params.data(), encoder.param_count()}; }
  std::span<double> step_params() { return {params.data() + encoder.param_count(), step_net.param_count()}; }
  std::span<const double> step_params() const {
    return {params.data() + encoder.param_count(), step_net.param_count()};
  }
  int context_dim() const { return encoder.output_dim() + 2 * config.past; }
  int local_feature_dim() const { return config.local_features ? 4 * static_cast<int>(config.local_offsets.size()) : 0; }
};

/// Builds the networks for config and initializes weights from seed.
ImitativeModel make_model(const ModelConfig& config, std::uint64_t seed);

/// Rebuilds the network objects after config or params were loaded.
void rebuild(ImitativeModel& model);

struct Context {
  Eigen::VectorXd features;  // encoder output followed by flattened past positions
  Patch patch;               // pooled
  std::vector<Vec2> past;
};

/// Encodes a raw observation (full-resolution patch).
Context encode(const ImitativeModel& model, const Observation& observation);
/// Encodes an already pooled patch.
Context encode_pooled(const ImitativeModel& model, const Patch& pooled, std::span<const Vec2> past);

/// One autoregressive step: tau_i ~ N(mean, scale * scale^T), scale lower
/// triangular with diagonal >= sigma_floor.
struct StepDistribution {
  Vec2 mean = Vec2::Zero();
  Eigen::Matrix2d scale = Eigen::Matrix2d::Identity();
};

/// Step distributions along tau (teacher forced on tau's own prefix).
std::vector<StepDistribution> step_distributions(const ImitativeModel& model, const Context& context,
                                                 std::span<const Vec2> trajectory);

/// log N(x; mean, scale scale^T) for lower-triangular scale.
double gaussian_log_density(const Vec2& x, const StepDistribution& step);

double log_prob(const ImitativeModel& model, const Context& context, std::span<const Vec2> trajectory);

/// log_prob for many candidates sharing a context (one batched pass).
std::vector<double> log_prob_batch(const ImitativeModel& model, const Context& context,
                                   std::span<const Trajectory> trajectories);

/// tau_i = mean_i + S_i z_i. When log_density is given, accumulates the
/// change-of-variables value sum(log N(z_i; 0, I) - log|det S_i|).
Trajectory sample_with_noise(const ImitativeModel& model, const Context& context, std::span<const Vec2> noise,
                             double* log_density = nullptr);
Trajectory sample(const ImitativeModel& model, const Context& context, Rng& rng);

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  double perturbation_sigma = 0.01;
  int epochs = 40;
  std::uint64_t seed = 0;
  std::size_t held_in = 256;
};

struct TrainResult {
  ImitativeModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double held_in_before = 0.0;     // mean -log_prob on the held-in slice
  double held_in_after = 0.0;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config, const ModelConfig& model_config);

/// Mean negative log-likelihood over a batch; accumulates d(mean NLL)/dparams
/// into grad when it is non-empty. targets[i] replaces examples[i]->future.
double batch_nll(const ImitativeModel& model, std::span<const Example* const> examples,
                 std::span<const Trajectory> targets, std::span<double> grad);

double mean_nll(const ImitativeModel& model, std::span<const Example> examples);

/// Central-difference check of the analytic gradient of -log_prob on one
/// example. Returns max_i |a_i - n_i| / max(|a_i| + |n_i|, floor).
double grad_check(ImitativeModel model, const Example& example, double step = 1e-5, double floor = 1e-7);

/// Encoder input row for a pooled patch with the model's channel mask.
Eigen::RowVectorXd encoder_input(const ImitativeModel& model, const Patch& pooled);

/// Bilinear lookup of the pooled patch at a local-frame position.
std::array<double, 4> sample_patch(const Patch& pooled, double extent, const Vec2& local);

}  // namespace hip
