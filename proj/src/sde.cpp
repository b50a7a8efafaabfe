#include "nsde/sde.hpp"

#include <cmath>
#include <numbers>

namespace nsde {

const char* to_string(AlphaMode m) {
    switch (m) {
        case AlphaMode::none: return "none";
        case AlphaMode::constant: return "constant";
        case AlphaMode::half_gg: return "half_gg";
    }
    return "?";
}

AlphaMode parse_alpha_mode(const std::string& s) {
    if (s == "none") return AlphaMode::none;
    if (s == "constant") return AlphaMode::constant;
    if (s == "half_gg") return AlphaMode::half_gg;
    throw DomainError("unknown alpha mode '" + s + "' (expected none, constant or half_gg)");
}

void SdeModel::validate() const {
    if (flow.head() != Head::linear) throw DomainError("flow network must use a linear head");
    if (diffusion.head() != Head::positive) throw DomainError("diffusion network must use a positive head");
    if (flow.input_dim() != diffusion.input_dim()) throw ShapeError("flow and diffusion input dimensions differ");
    if (diffusion.output_dim() != flow.output_dim()) throw ShapeError("diffusion output must match the state dimension");
    if (flow.input_dim() % flow.output_dim() != 0) {
        throw ShapeError("flow input must be a whole number of state frames");
    }
    if (denoiser) {
        if (denoiser->input_dim() != flow.input_dim() || denoiser->output_dim() != flow.input_dim()) {
            throw ShapeError("denoiser must map the model input space to itself");
        }
    }
    if (guidance.mode != AlphaMode::none && !denoiser) {
        throw DomainError(std::string("alpha mode '") + to_string(guidance.mode) + "' requires a denoiser network");
    }
    if (guidance.mode == AlphaMode::constant && !(guidance.alpha >= 0.0)) throw DomainError("alpha must be >= 0");
    if (!(time_scale > 0.0)) throw DomainError("time scale must be positive");
}

namespace {

void divide_in_place(Tensor& t, double lambda) {
    if (lambda == 1.0) return;
    for (double& v : t.values()) v /= lambda;
}

}  // namespace

Tensor flow_net(const SdeModel& model, const Tensor& x) {
    Tensor f = mlp_forward(model.flow, x);
    divide_in_place(f, model.time_scale);
    return f;
}

Tensor diffusion_net(const SdeModel& model, const Tensor& x) {
    Tensor s2 = mlp_forward(model.diffusion, x);
    divide_in_place(s2, model.time_scale);
    return s2;
}

Tensor denoiser_net(const SdeModel& model, const Tensor& x) {
    if (!model.denoiser) throw DomainError("model has no denoiser network");
    return mlp_forward(*model.denoiser, x);
}

Tensor drift(const SdeModel& model, const Tensor& x) {
    Tensor f = mlp_forward(model.flow, x);
    const std::size_t d = model.state_dim();
    const AlphaMode mode = model.guidance.mode;
    if (mode != AlphaMode::none) {
        if (!model.denoiser) {
            throw DomainError(std::string("alpha mode '") + to_string(mode) + "' requires a denoiser network");
        }
        const Tensor score = mlp_forward(*model.denoiser, x);
        const std::size_t width = score.cols();
        Tensor sigma2;
        if (mode == AlphaMode::half_gg) sigma2 = mlp_forward(model.diffusion, x);
        for (std::size_t r = 0; r < f.rows(); ++r) {
            for (std::size_t i = 0; i < d; ++i) {
                const double s = score[r * width + i];
                const double weight = mode == AlphaMode::constant ? model.guidance.alpha : 0.5 * sigma2[r * d + i];
                f[r * d + i] += weight * s;
            }
        }
    }
    divide_in_place(f, model.time_scale);
    if (!f.all_finite()) throw NonFiniteError("non-finite drift");
    return f;
}

std::vector<double> euler_maruyama_step(const SdeModel& model, std::span<const double> x, double dt,
                                        std::span<const double> z) {
    if (!(dt > 0.0)) throw DomainError("Euler-Maruyama step needs dt > 0");
    const std::size_t d = model.state_dim();
    if (x.size() != model.input_dim()) {
        throw ShapeError("state has " + std::to_string(x.size()) + " values, model expects " +
                         std::to_string(model.input_dim()));
    }
    if (z.size() != d) throw ShapeError("noise draw must have one value per state dimension");
    const Tensor xin = Tensor::row(x);
    const Tensor f = drift(model, xin);
    const Tensor s2 = diffusion_net(model, xin);
    std::vector<double> next(x.size());
    for (std::size_t i = 0; i < d; ++i) next[i] = x[i] + f[i] * dt + std::sqrt(s2[i] * dt) * z[i];
    // Shift the history window: older frames move one slot back.
    for (std::size_t i = d; i < x.size(); ++i) next[i] = x[i - d];
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(next[i])) throw NonFiniteError("Euler-Maruyama step produced a non-finite state");
    }
    return next;
}

std::vector<double> euler_maruyama_step(const SdeModel& model, std::span<const double> x, double dt,
                                        NoiseSource& noise) {
    const std::vector<double> z = noise.normals(model.state_dim());
    return euler_maruyama_step(model, x, dt, z);
}

Trajectory simulate(const SdeModel& model, std::span<const double> x0, std::size_t n_steps, double dt,
                    NoiseSource& noise) {
    if (n_steps == 0) throw DomainError("simulate needs n_steps >= 1");
    if (!(dt > 0.0)) throw DomainError("simulate needs dt > 0");
    const std::size_t d = model.state_dim();
    Trajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    std::vector<double> x(x0.begin(), x0.end());
    traj.times.push_back(0.0);
    traj.states.emplace_back(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(std::min(d, x.size())));
    std::vector<double> z(d);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        noise.fill_normal(z);
        x = euler_maruyama_step(model, x, dt, z);
        traj.times.push_back(static_cast<double>(k) * dt);
        traj.states.emplace_back(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
    }
    return traj;
}

double transition_log_density(const SdeModel& model, std::span<const double> x, std::span<const double> x_next,
                              double dt) {
    if (!(dt > 0.0)) throw DomainError("transition density needs dt > 0");
    if (x.size() != model.input_dim() || x_next.size() < model.state_dim()) {
        throw ShapeError("transition density: state dimension mismatch");
    }
    const std::size_t d = model.state_dim();
    const Tensor xin = Tensor::row(x);
    const Tensor f = flow_net(model, xin);
    const Tensor s2 = diffusion_net(model, xin);
    double lp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        if (!(s2[i] > 0.0)) throw DomainError("non-positive diffusion variance");
        const double var = s2[i] * dt;
        const double r = x_next[i] - (x[i] + f[i] * dt);
        lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
    }
    return lp;
}

SdeModel rescale_time(const SdeModel& model, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("time rescaling factor must be positive");
    SdeModel scaled = model;
    scaled.time_scale = model.time_scale * lambda;
    return scaled;
}

SdeModel with_guidance(SdeModel model, Guidance guidance) {
    model.guidance = guidance;
    model.validate();
    return model;
}

}  // namespace nsde
