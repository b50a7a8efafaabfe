#include "nsde/losses.hpp"

#include <cmath>

namespace nsde {

TransitionBatch make_batch(std::span<const TransitionTuple> tuples, std::size_t state_dim) {
    if (tuples.empty()) throw ShapeError("empty transition batch");
    const std::size_t n = tuples.size();
    const std::size_t width = tuples.front().x.size();
    if (state_dim == 0 || width % state_dim != 0) throw ShapeError("state dimension does not divide the input width");
    std::vector<double> x, xn, v, dt;
    x.reserve(n * width);
    xn.reserve(n * width);
    v.reserve(n * state_dim);
    dt.reserve(n * state_dim);
    for (const auto& t : tuples) {
        if (t.x.size() != width || t.x_next.size() != width) throw ShapeError("transition dimensions differ");
        if (!(t.dt > 0.0)) throw DomainError("transition with non-positive dt");
        x.insert(x.end(), t.x.begin(), t.x.end());
        xn.insert(xn.end(), t.x_next.begin(), t.x_next.end());
        for (std::size_t i = 0; i < state_dim; ++i) {
            v.push_back((t.x_next[i] - t.x[i]) / t.dt);
            dt.push_back(t.dt);
        }
    }
    TransitionBatch b;
    b.x = Tensor({n, width}, std::move(x));
    b.x_next = Tensor({n, width}, std::move(xn));
    b.velocity = Tensor({n, state_dim}, std::move(v));
    b.dt = Tensor({n, state_dim}, std::move(dt));
    if (!b.x.all_finite() || !b.x_next.all_finite() || !b.velocity.all_finite()) {
        throw NonFiniteError("transition batch holds non-finite values");
    }
    return b;
}

namespace {

Tape& tape_of(const BoundNet& net) { return *net.parameters().tape(); }

double inv_size(const TransitionBatch& b) { return 1.0 / static_cast<double>(b.size()); }

}  // namespace

Var nll_loss(const BoundNet& flow, const BoundNet& diffusion, const TransitionBatch& batch) {
    Tape& tape = tape_of(flow);
    const Var x = tape.constant(batch.x);
    const Var r = flow(x) - tape.constant(batch.velocity);
    const Var s2 = diffusion(x);
    const Var quad = square(r) / s2 * tape.constant(batch.dt);
    return sum(quad + log(s2)) * (0.5 * inv_size(batch));
}

Var flow_loss(const BoundNet& flow, const TransitionBatch& batch, double delta) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    Tape& tape = tape_of(flow);
    const Var r = flow(tape.constant(batch.x)) - tape.constant(batch.velocity);
    Var r2 = square(r);
    if (delta > 0.0) r2 = r2 + delta;
    return sum(log(r2)) * (0.5 * inv_size(batch));
}

Var diffusion_loss(const BoundNet& flow, const BoundNet& diffusion, const TransitionBatch& batch) {
    Tape& tape = tape_of(diffusion);
    const Var x = tape.constant(batch.x);
    const Var r = detach(flow(x)) - tape.constant(batch.velocity);
    const Var target = square(r) * tape.constant(batch.dt);
    return sum(square(diffusion(x) - target)) * (0.5 * inv_size(batch));
}

Var dsm_loss(const BoundNet& denoiser, const Tensor& states, double sigma, const Tensor& eps) {
    if (!(sigma > 0.0)) throw DomainError("DSM noise scale must be positive");
    if (eps.shape() != states.shape()) throw ShapeError("DSM perturbation shape differs from states");
    Tape& tape = tape_of(denoiser);
    const Var e = tape.constant(eps);
    const Var perturbed = tape.constant(states) + e;
    const Var residual = denoiser(perturbed) + e * (1.0 / (sigma * sigma));
    return sum(square(residual)) * (1.0 / static_cast<double>(states.rows()));
}

Var dsm_loss(const BoundNet& denoiser, const Tensor& states, double sigma, NoiseSource& noise) {
    if (!(sigma > 0.0)) throw DomainError("DSM noise scale must be positive");
    Tensor eps = Tensor::zeros(states.shape());
    noise.fill_normal(eps.values());
    for (double& v : eps.values()) v *= sigma;
    return dsm_loss(denoiser, states, sigma, eps);
}

double nll_per_step(const SdeModel& model, const TransitionTuple& t) {
    const TransitionTuple one[] = {t};
    return nll_loss(model, make_batch(one, model.state_dim()));
}

double nll_loss(const SdeModel& model, const TransitionBatch& batch) {
    Tape tape;
    const BoundNet f(tape, model.flow, false);
    const BoundNet g(tape, model.diffusion, false);
    return nll_loss(f, g, batch).value().item();
}

double flow_loss(const MlpParams& flow, const TransitionBatch& batch, double delta) {
    Tape tape;
    const BoundNet f(tape, flow, false);
    return flow_loss(f, batch, delta).value().item();
}

double diffusion_loss(const SdeModel& model, const TransitionBatch& batch) {
    Tape tape;
    const BoundNet f(tape, model.flow, false);
    const BoundNet g(tape, model.diffusion, false);
    return diffusion_loss(f, g, batch).value().item();
}

double dsm_loss(const MlpParams& denoiser, const Tensor& states, double sigma, NoiseSource& noise) {
    Tape tape;
    const BoundNet d(tape, denoiser, false);
    return dsm_loss(d, states, sigma, noise).value().item();
}

double reduced_validation_loss(const MlpParams& flow, const TransitionBatch& batch, double delta) {
    if (!(delta > 0.0)) throw DomainError("reduced validation loss needs delta > 0");
    const Tensor f = mlp_forward(flow, batch.x);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = f[i] - batch.velocity[i];
        acc += std::log(r * r + delta);
    }
    return acc / static_cast<double>(f.size()) - std::log(delta);
}

LossReport evaluate_losses(const SdeModel& model, const TransitionBatch& batch, double sigma_dsm, NoiseSource& noise,
                           double validation_delta) {
    LossReport report;
    report.flow_loss = flow_loss(model.flow, batch, model.delta);
    report.diffusion_loss = diffusion_loss(model, batch);
    if (model.denoiser) report.dsm_loss = dsm_loss(*model.denoiser, batch.x, sigma_dsm, noise);
    report.nll = nll_loss(model, batch);
    report.reduced_validation_loss = reduced_validation_loss(model.flow, batch, validation_delta);
    return report;
}

}  // namespace nsde
