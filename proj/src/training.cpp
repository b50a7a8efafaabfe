#include "nsde/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "nsde/text_io.hpp"

namespace nsde {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw DomainError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerConfig& config, double lr) {
    if (params.size() != grads.size()) throw ShapeError("gradient and parameter sizes differ");
    for (double g : grads) {
        if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient");
    }
    if (config.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
        ++state.step;
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw DomainError("batch_size must be >= 1");
    if (!(lr_flow > 0.0) || !(lr_diffusion > 0.0) || !(lr_denoiser > 0.0)) {
        throw DomainError("learning rates must be positive");
    }
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    if (sigma_inject && !(*sigma_inject >= 0.0)) throw DomainError("sigma_inject must be >= 0");
    if (!(sigma_dsm > 0.0)) throw DomainError("sigma_dsm must be positive");
    if (history == 0) throw DomainError("history window must be >= 1");
    if (!(sigma2_min >= 0.0)) throw DomainError("sigma2_min must be >= 0");
    if (!(validation_delta > 0.0)) throw DomainError("validation delta must be positive");
}

void TrainLog::write_csv(std::ostream& os) const {
    os << "iteration,flow_loss,diffusion_loss,dsm_loss,reduced_validation_loss\n";
    for (const auto& row : rows) {
        os << row.iteration << ',' << format_double(row.losses.flow_loss) << ','
           << format_double(row.losses.diffusion_loss) << ','
           << (row.losses.dsm_loss ? format_double(*row.losses.dsm_loss) : std::string()) << ','
           << format_double(row.losses.reduced_validation_loss) << '\n';
    }
}

TransitionBatch interpolate_batch(TransitionBatch batch, std::span<const double> tau) {
    const std::size_t n = batch.size();
    if (tau.size() != n) throw ShapeError("one interpolation fraction per transition required");
    const std::size_t w = batch.x.cols();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < w; ++i) {
            batch.x[r * w + i] = (1.0 - tau[r]) * batch.x[r * w + i] + tau[r] * batch.x_next[r * w + i];
        }
    }
    return batch;
}

TransitionBatch interpolate_batch(TransitionBatch batch, NoiseSource& noise) {
    std::vector<double> tau(batch.size());
    for (double& t : tau) t = noise.uniform();
    return interpolate_batch(std::move(batch), tau);
}

TransitionBatch inject_noise(TransitionBatch batch, const Tensor& eta) {
    if (eta.shape() != batch.x.shape()) throw ShapeError("noise shape differs from the state batch");
    for (std::size_t i = 0; i < eta.size(); ++i) batch.x[i] += eta[i];
    return batch;
}

TransitionBatch inject_noise(TransitionBatch batch, std::span<const double> sigma_per_dim, NoiseSource& noise) {
    const std::size_t d = sigma_per_dim.size();
    const std::size_t w = batch.x.cols();
    if (d == 0 || w % d != 0) throw ShapeError("noise scale dimension does not divide the state width");
    for (double s : sigma_per_dim) {
        if (!(s >= 0.0)) throw DomainError("noise-injection std must be >= 0");
    }
    if (std::all_of(sigma_per_dim.begin(), sigma_per_dim.end(), [](double s) { return s == 0.0; })) return batch;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        for (std::size_t i = 0; i < w; ++i) batch.x[r * w + i] += sigma_per_dim[i % d] * noise.normal();
    }
    return batch;
}

TransitionBatch inject_noise(TransitionBatch batch, double sigma, NoiseSource& noise) {
    const double s[] = {sigma};
    return inject_noise(std::move(batch), s, noise);
}

SdeModel init_model(std::size_t state_dim, const TrainConfig& config) {
    config.validate();
    const std::uint64_t seed = config.seed;
    SdeModel model;
    NetSpec fs = flow_spec(state_dim, config.history, config.hidden, seed * 3 + 1);
    NetSpec gs = diffusion_spec(state_dim, config.history, config.hidden, config.sigma2_min, seed * 3 + 2);
    fs.activation = gs.activation = config.activation;
    model.flow = init_params(fs);
    model.diffusion = init_params(gs);
    if (config.denoiser) {
        NetSpec ds = denoiser_spec(state_dim, config.history, config.hidden, seed * 3 + 3);
        ds.activation = config.activation;
        model.denoiser = init_params(ds);
        model.guidance = config.guidance;
    }
    model.delta = config.delta;
    model.validate();
    return model;
}

namespace {

TransitionBatch gather(const TransitionBatch& all, std::span<const std::size_t> rows) {
    const std::size_t w = all.x.cols();
    const std::size_t d = all.velocity.cols();
    const std::size_t n = rows.size();
    std::vector<double> x(n * w), xn(n * w), v(n * d), dt(n * d);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = rows[k];
        std::copy_n(all.x.values().data() + r * w, w, x.data() + k * w);
        std::copy_n(all.x_next.values().data() + r * w, w, xn.data() + k * w);
        std::copy_n(all.velocity.values().data() + r * d, d, v.data() + k * d);
        std::copy_n(all.dt.values().data() + r * d, d, dt.data() + k * d);
    }
    TransitionBatch b;
    b.x = Tensor({n, w}, std::move(x));
    b.x_next = Tensor({n, w}, std::move(xn));
    b.velocity = Tensor({n, d}, std::move(v));
    b.dt = Tensor({n, d}, std::move(dt));
    return b;
}

// One gradient step of `params` on `loss_fn`; returns the pre-step loss.
template <class LossFn>
double update(MlpParams& params, OptimizerState& state, const OptimizerConfig& opt, double lr, LossFn&& loss_fn) {
    Tape tape;
    const BoundNet net(tape, params, true);
    const Var loss = loss_fn(tape, net);
    const double value = loss.value().item();
    tape.backward(loss);
    const Tensor grad = net.parameters().grad();
    optimizer_step(params.values(), grad.values(), state, opt, lr);
    return value;
}

double batch_nll(const Tensor& f, const Tensor& s2, const TransitionBatch& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = f[i] - b.velocity[i];
        acc += r * r / s2[i] * b.dt[i] + std::log(s2[i]);
    }
    return 0.5 * acc / static_cast<double>(b.size());
}

}  // namespace

TrainResult train(std::span<const TransitionTuple> transitions, SdeModel model, const TrainConfig& config,
                  std::span<const double> inject_std, const CheckpointCallback& on_checkpoint) {
    config.validate();
    model.validate();
    if (transitions.empty()) throw DomainError("training needs at least one transition");
    const std::size_t d = model.state_dim();
    if (inject_std.size() != d) throw ShapeError("noise-injection scale must have one entry per state dimension");
    const TransitionBatch all = make_batch(transitions, d);
    const std::size_t n = all.size();
    const std::size_t batch_size = std::min(config.batch_size, n);

    NoiseSource noise(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = n;  // forces a shuffle on the first iteration

    OptimizerState flow_state, diffusion_state, denoiser_state;
    TrainResult result;
    const std::size_t log_interval = config.checkpoint_interval ? config.checkpoint_interval : 100;
    auto interval_start = std::chrono::steady_clock::now();

    for (std::size_t it = 0; it < config.iterations; ++it) {
        if (cursor + batch_size > n) {
            std::shuffle(order.begin(), order.end(), noise.engine());
            cursor = 0;
        }
        const TransitionBatch clean = gather(all, std::span<const std::size_t>(order).subspan(cursor, batch_size));
        cursor += batch_size;

        TrainLogRow row;
        row.iteration = it;
        try {
            row.losses.reduced_validation_loss = reduced_validation_loss(model.flow, clean, config.validation_delta);
            const TransitionBatch interpolated = config.interpolate ? interpolate_batch(clean, noise) : clean;
            const TransitionBatch batch = inject_noise(interpolated, inject_std, noise);

            row.losses.flow_loss =
                update(model.flow, flow_state, config.optimizer, config.lr_flow,
                       [&](Tape&, const BoundNet& f) { return flow_loss(f, batch, config.delta); });

            Tensor flow_out, sigma2_out;
            row.losses.diffusion_loss =
                update(model.diffusion, diffusion_state, config.optimizer, config.lr_diffusion,
                       [&](Tape& tape, const BoundNet& g) {
                           const BoundNet f(tape, model.flow, false);
                           const Var x = tape.constant(batch.x);
                           flow_out = f(x).value();
                           sigma2_out = g(x).value();
                           return diffusion_loss(f, g, batch);
                       });
            row.losses.nll = batch_nll(flow_out, sigma2_out, batch);

            if (model.denoiser) {
                row.losses.dsm_loss = update(*model.denoiser, denoiser_state, config.optimizer, config.lr_denoiser,
                                             [&](Tape&, const BoundNet& den) {
                                                 return dsm_loss(den, interpolated.x, config.sigma_dsm, noise);
                                             });
            }
        } catch (const NonFiniteError& e) {
            throw DivergenceError(it, e.what());
        } catch (const DomainError& e) {
            throw DivergenceError(it, e.what());
        }
        const auto& l = row.losses;
        if (!std::isfinite(l.flow_loss) || !std::isfinite(l.diffusion_loss) ||
            !std::isfinite(l.reduced_validation_loss) || (l.dsm_loss && !std::isfinite(*l.dsm_loss))) {
            throw DivergenceError(it, "non-finite loss");
        }
        result.log.rows.push_back(row);

        if ((it + 1) % log_interval == 0 || it + 1 == config.iterations) {
            const auto now = std::chrono::steady_clock::now();
            result.log.interval_seconds.push_back(std::chrono::duration<double>(now - interval_start).count());
            interval_start = now;
        }
        if (on_checkpoint && config.checkpoint_interval && (it + 1) % config.checkpoint_interval == 0) {
            on_checkpoint(it + 1, model);
        }
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const CheckpointCallback& on_checkpoint) {
    dataset.validate();
    const auto transitions = to_transitions(dataset, config.history);
    if (transitions.empty()) throw DomainError("dataset yields no transitions");
    std::vector<double> inject(dataset.dim);
    for (std::size_t i = 0; i < dataset.dim; ++i) {
        inject[i] = config.sigma_inject ? *config.sigma_inject : 0.01 * dataset.meta.std.at(i);
    }
    return train(transitions, init_model(dataset.dim, config), config, inject, on_checkpoint);
}

}  // namespace nsde
