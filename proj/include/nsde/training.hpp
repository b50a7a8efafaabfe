#pragma once

// Decoupled maximum-likelihood training. Each iteration takes one
// mini-batch of transitions, moves the states to a random point of their
// segment, perturbs them with Gaussian noise and then updates, in order,
// the flow (log-squared residual loss), the diffusion (residual variance
// matching, seeing the freshly updated flow) and optionally the denoiser
// (denoising score matching on the interpolated states, which brings its
// own perturbation).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "nsde/datasets.hpp"
#include "nsde/losses.hpp"
#include "nsde/sde.hpp"

namespace nsde {

enum class OptimizerKind { sgd, adam };

const char* to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

// SGD: p -= lr g. Adam: bias-corrected first/second moment update.
void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerConfig& config, double lr);

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t batch_size = 256;
    std::size_t iterations = 2000;
    double lr_flow = 1e-3;
    double lr_diffusion = 1e-3;
    double lr_denoiser = 1e-3;
    OptimizerConfig optimizer;
    double delta = 1e-3;
    // Absolute noise-injection std; unset means 0.01 x per-dimension data std.
    std::optional<double> sigma_inject;
    double sigma_dsm = 0.1;
    bool interpolate = true;
    bool denoiser = true;
    std::size_t history = 1;
    std::size_t checkpoint_interval = 0;  // 0: no intermediate checkpoints
    std::vector<std::size_t> hidden{64, 64};
    Activation activation = Activation::tanh;
    double sigma2_min = 1e-6;
    // Guidance stored in the trained model (forced off without a denoiser).
    Guidance guidance = Guidance::constant(0.1);
    double validation_delta = 1e-3;

    void validate() const;
};

struct TrainLogRow {
    std::size_t iteration = 0;
    LossReport losses;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    // Wall-clock seconds per logging interval.
    std::vector<double> interval_seconds;

    // Header `iteration,flow_loss,diffusion_loss,dsm_loss,reduced_validation_loss`;
    // dsm_loss is left empty when no denoiser is trained.
    void write_csv(std::ostream& os) const;
};

struct TrainResult {
    SdeModel model;
    TrainLog log;
};

using CheckpointCallback = std::function<void(std::size_t iteration, const SdeModel& model)>;

// Fresh, untrained model for `state_dim`-dimensional data.
SdeModel init_model(std::size_t state_dim, const TrainConfig& config);

TrainResult train(const Dataset& dataset, const TrainConfig& config, const CheckpointCallback& on_checkpoint = {});

// Same, starting from explicit transitions and an initial model.
TrainResult train(std::span<const TransitionTuple> transitions, SdeModel model, const TrainConfig& config,
                  std::span<const double> inject_std, const CheckpointCallback& on_checkpoint = {});

// x <- (1 - tau) x + tau x_next per row; velocity and dt are kept.
TransitionBatch interpolate_batch(TransitionBatch batch, std::span<const double> tau);
TransitionBatch interpolate_batch(TransitionBatch batch, NoiseSource& noise);

// x <- x + eta. The per-dimension form draws eta_i ~ N(0, sigma_i^2) where
// sigma repeats across history frames.
TransitionBatch inject_noise(TransitionBatch batch, const Tensor& eta);
TransitionBatch inject_noise(TransitionBatch batch, double sigma, NoiseSource& noise);
TransitionBatch inject_noise(TransitionBatch batch, std::span<const double> sigma_per_dim, NoiseSource& noise);

}  // namespace nsde
