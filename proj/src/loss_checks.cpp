#include <algorithm>
#include <random>

#include "nsde/grad_check.hpp"
#include "nsde/losses.hpp"

namespace nsde {

namespace {

struct Draw {
    MlpParams flow, diffusion, denoiser;
    TransitionBatch batch;
    TransitionBatch single;
    Tensor eps;
    double sigma_dsm = 0.3;
};

MlpParams random_net(NetSpec spec, std::mt19937_64& rng) {
    spec.init_seed = rng();
    MlpParams p = init_params(spec);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (double& v : p.values()) v += jitter(rng);
    return p;
}

Draw make_draw(std::mt19937_64& rng, Activation act) {
    constexpr std::size_t d = 2;
    constexpr std::size_t n = 6;
    const std::vector<std::size_t> hidden{8, 8};
    Draw w;
    NetSpec fs = flow_spec(d, 1, hidden, 0);
    NetSpec gs = diffusion_spec(d, 1, hidden, 1e-6, 0);
    NetSpec ds = denoiser_spec(d, 1, hidden, 0);
    fs.activation = gs.activation = ds.activation = act;
    w.flow = random_net(fs, rng);
    w.diffusion = random_net(gs, rng);
    w.denoiser = random_net(ds, rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> step(0.05, 0.5);
    std::vector<TransitionTuple> tuples;
    for (std::size_t i = 0; i < n; ++i) {
        TransitionTuple t;
        t.dt = step(rng);
        for (std::size_t j = 0; j < d; ++j) {
            t.x.push_back(normal(rng));
            t.x_next.push_back(t.x.back() + 0.5 * normal(rng));
        }
        tuples.push_back(std::move(t));
    }
    w.batch = make_batch(tuples, d);
    w.single = make_batch(std::span<const TransitionTuple>(tuples).first(1), d);
    std::vector<double> eps(n * d);
    for (double& e : eps) e = w.sigma_dsm * normal(rng);
    w.eps = Tensor({n, d}, std::move(eps));
    return w;
}

Tensor flat(const MlpParams& p) { return Tensor({p.parameter_count()}, {p.values().begin(), p.values().end()}); }

}  // namespace

std::vector<LossGradientCheck> check_loss_gradients(std::uint64_t seed, std::size_t points, double h) {
    std::vector<LossGradientCheck> out{{"flow_loss", 0, 0.0}, {"diffusion_loss", 0, 0.0}, {"dsm_loss", 0, 0.0},
                                       {"nll_per_step", 0, 0.0}};
    std::mt19937_64 rng(seed);
    for (std::size_t p = 0; p < points; ++p) {
        const Draw w = make_draw(rng, p % 2 == 0 ? Activation::tanh : Activation::softplus);
        const double errors[] = {
            grad_check(
                [&](Tape&, const Var& theta) { return flow_loss(BoundNet(w.flow, theta), w.batch, 1e-3); },
                flat(w.flow), h),
            grad_check(
                [&](Tape& tape, const Var& theta) {
                    const BoundNet f(tape, w.flow, false);
                    return diffusion_loss(f, BoundNet(w.diffusion, theta), w.batch);
                },
                flat(w.diffusion), h),
            grad_check(
                [&](Tape&, const Var& theta) {
                    return dsm_loss(BoundNet(w.denoiser, theta), w.batch.x, w.sigma_dsm, w.eps);
                },
                flat(w.denoiser), h),
            grad_check(
                [&](Tape&, const Var& theta) {
                    const std::size_t nf = w.flow.parameter_count();
                    const Var tf = slice(theta, 0, {nf});
                    const Var tg = slice(theta, nf, {w.diffusion.parameter_count()});
                    return nll_loss(BoundNet(w.flow, tf), BoundNet(w.diffusion, tg), w.single);
                },
                [&] {
                    std::vector<double> both(w.flow.values().begin(), w.flow.values().end());
                    both.insert(both.end(), w.diffusion.values().begin(), w.diffusion.values().end());
                    const std::size_t n = both.size();
                    return Tensor({n}, std::move(both));
                }(),
                h),
        };
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].points = p + 1;
            out[i].max_error = std::max(out[i].max_error, errors[i]);
        }
    }
    return out;
}

}  // namespace nsde
