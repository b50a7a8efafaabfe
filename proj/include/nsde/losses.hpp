#pragma once

// Training objectives. Every batch reduction is a mean over transitions.
//
//   nll            1/2 sum_i (f_i - v_i)^2 / sigma_i^2 * dt + 1/2 sum_i log sigma_i^2
//   flow           1/2 sum_i log((f_i - v_i)^2 + delta)
//   diffusion      1/2 sum_i (sigma_i^2 - (f_i - v_i)^2 dt)^2     (f held constant)
//   dsm            || d(x + eps) + eps / sigma^2 ||^2,  eps ~ N(0, sigma^2 I)
//                  so that d approximates the score of the perturbed data
//   reduced val.   1/(N d) sum log((f - v)^2 + delta) - log delta
//
// where v = (x_next - x) / dt on the newest frame is the observed rate.

#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "nsde/nets.hpp"
#include "nsde/sde.hpp"
#include "nsde/tensor.hpp"

namespace nsde {

struct TransitionTuple {
    std::vector<double> x;
    std::vector<double> x_next;
    double dt = 1.0;

    friend bool operator==(const TransitionTuple&, const TransitionTuple&) = default;
};

// Struct-of-arrays form of a set of transitions. `velocity` is the target
// rate of the newest frame; it is fixed when the batch is built so that
// per-batch augmentations may move `x` without changing the target.
struct TransitionBatch {
    Tensor x;         // n x input_dim
    Tensor x_next;    // n x input_dim
    Tensor velocity;  // n x state_dim
    Tensor dt;        // n x state_dim, dt repeated across columns

    std::size_t size() const { return x.rank() == 2 ? x.rows() : 0; }
    std::size_t state_dim() const { return velocity.cols(); }
};

TransitionBatch make_batch(std::span<const TransitionTuple> tuples, std::size_t state_dim);

struct LossReport {
    double flow_loss = 0.0;
    double diffusion_loss = 0.0;
    std::optional<double> dsm_loss;
    double nll = 0.0;
    double reduced_validation_loss = 0.0;
};

// ---- differentiable forms (graph built on the nets' tape) ----

Var nll_loss(const BoundNet& flow, const BoundNet& diffusion, const TransitionBatch& batch);
Var flow_loss(const BoundNet& flow, const TransitionBatch& batch, double delta);
// No gradient reaches the flow parameters.
Var diffusion_loss(const BoundNet& flow, const BoundNet& diffusion, const TransitionBatch& batch);
Var dsm_loss(const BoundNet& denoiser, const Tensor& states, double sigma, NoiseSource& noise);
// DSM with a caller-supplied perturbation eps (same shape as states).
Var dsm_loss(const BoundNet& denoiser, const Tensor& states, double sigma, const Tensor& eps);

// ---- plain evaluations ----

double nll_per_step(const SdeModel& model, const TransitionTuple& t);
double nll_loss(const SdeModel& model, const TransitionBatch& batch);
double flow_loss(const MlpParams& flow, const TransitionBatch& batch, double delta);
double diffusion_loss(const SdeModel& model, const TransitionBatch& batch);
double dsm_loss(const MlpParams& denoiser, const Tensor& states, double sigma, NoiseSource& noise);
double reduced_validation_loss(const MlpParams& flow, const TransitionBatch& batch, double delta = 1e-3);

LossReport evaluate_losses(const SdeModel& model, const TransitionBatch& batch, double sigma_dsm, NoiseSource& noise,
                           double validation_delta = 1e-3);

}  // namespace nsde

namespace nsde {

struct LossGradientCheck {
    std::string loss;
    std::size_t points = 0;
    double max_error = 0.0;  // worst grad_check() value over the points
};

// Gradient checks of flow_loss, diffusion_loss, dsm_loss and the per-step
// NLL at `points` random (parameters, batch) draws each, on small 2-D
// networks alternating tanh and softplus activations.
std::vector<LossGradientCheck> check_loss_gradients(std::uint64_t seed, std::size_t points, double h = 1e-5);

}  // namespace nsde
