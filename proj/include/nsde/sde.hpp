#pragma once

// The learned SDE  dx = [f(x) + guidance(x)] dt + sigma(x) (.) dw  with a
// diagonal diffusion, its Euler–Maruyama simulator and its one-step
// Gaussian transition density.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nsde/nets.hpp"
#include "nsde/trajectory.hpp"

namespace nsde {

// Score guidance added to the flow at simulation time.
//   none      drift = f
//   constant  drift = f + alpha * d(x)
//   half_gg   drift = f + 0.5 * sigma^2(x) (.) d(x)
enum class AlphaMode { none, constant, half_gg };

const char* to_string(AlphaMode m);
AlphaMode parse_alpha_mode(const std::string& s);

struct Guidance {
    AlphaMode mode = AlphaMode::none;
    double alpha = 0.0;  // used by `constant`

    static Guidance off() { return {}; }
    static Guidance constant(double alpha) { return {AlphaMode::constant, alpha}; }
    static Guidance half_gg() { return {AlphaMode::half_gg, 0.0}; }
};

struct SdeModel {
    MlpParams flow;
    MlpParams diffusion;  // predicts sigma^2, positive head
    std::optional<MlpParams> denoiser;
    double delta = 1e-3;  // desingularization constant used in training
    Guidance guidance;
    // Rescaling factor lambda: effective flow is f/lambda and effective
    // sigma^2 is sigma^2/lambda, for use with steps lambda * dt.
    double time_scale = 1.0;

    std::size_t state_dim() const noexcept { return flow.output_dim(); }
    std::size_t input_dim() const noexcept { return flow.input_dim(); }
    std::size_t history() const noexcept { return flow.input_dim() / flow.output_dim(); }
    double sigma2_min() const noexcept { return diffusion.floor(); }

    // Checks the invariants tying the three networks together.
    void validate() const;
};

// Seeded stream of standard normal (and uniform) draws.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal_(engine_);
    }
    std::vector<double> normals(std::size_t n) {
        std::vector<double> z(n);
        fill_normal(z);
        return z;
    }
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Network evaluations (batch x input_dim in), including the time scale.
Tensor flow_net(const SdeModel& model, const Tensor& x);
Tensor diffusion_net(const SdeModel& model, const Tensor& x);
Tensor denoiser_net(const SdeModel& model, const Tensor& x);

// Flow plus score guidance, batch x state_dim.
Tensor drift(const SdeModel& model, const Tensor& x);

// One Euler–Maruyama step of the (windowed) state x:
//   x_new = x + drift(x) dt + sqrt(sigma^2(x) dt) (.) z
// For a history window the newest frame is first and the window shifts.
// `z` must hold state_dim standard normal draws.
std::vector<double> euler_maruyama_step(const SdeModel& model, std::span<const double> x, double dt,
                                        std::span<const double> z);
std::vector<double> euler_maruyama_step(const SdeModel& model, std::span<const double> x, double dt,
                                        NoiseSource& noise);

// n_steps Euler–Maruyama steps of size dt from x0 (times k*dt). The returned
// trajectory holds the newest frame of each state.
Trajectory simulate(const SdeModel& model, std::span<const double> x0, std::size_t n_steps, double dt,
                    NoiseSource& noise);

// log N(x_next; x + f(x) dt, diag(sigma^2(x)) dt), constants included. For a
// history window only the newest frame of x_next is scored.
double transition_log_density(const SdeModel& model, std::span<const double> x, std::span<const double> x_next,
                              double dt);

// Copy of `model` with flow f/lambda and squared diffusion sigma^2/lambda.
// Simulating it with step lambda*dt reproduces the original path given the
// same normal draws.
SdeModel rescale_time(const SdeModel& model, double lambda);

// The same model with guidance replaced.
SdeModel with_guidance(SdeModel model, Guidance guidance);

}  // namespace nsde
