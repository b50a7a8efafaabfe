#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "nsde/losses.hpp"

using namespace nsde;
using nsde::test::affine_model;

namespace {

// Batch whose residuals f - v equal `r` under a zero flow: v = -r.
TransitionBatch residual_batch(const std::vector<std::vector<double>>& r, double dt = 0.1) {
    std::vector<TransitionTuple> tuples;
    for (const auto& row : r) {
        TransitionTuple t;
        t.x.assign(row.size(), 0.0);
        for (double v : row) t.x_next.push_back(-v * dt);
        t.dt = dt;
        tuples.push_back(t);
    }
    return make_batch(tuples, r.front().size());
}

MlpParams zero_flow(std::size_t d) { return MlpParams(flow_spec(d, 1, {}, 0)); }

}  // namespace

TEST_CASE("make_batch computes the observed rate") {
    std::vector<TransitionTuple> t{{{1.0, 2.0}, {1.5, 1.0}, 0.5}};
    TransitionBatch b = make_batch(t, 2);
    CHECK(b.velocity == Tensor::matrix({{1.0, -2.0}}));
    CHECK(b.dt == Tensor::matrix({{0.5, 0.5}}));
    CHECK(b.size() == 1);
    CHECK_THROWS_AS(make_batch({}, 2), ShapeError);
    std::vector<TransitionTuple> bad{{{1.0}, {1.0}, 0.0}};
    CHECK_THROWS_AS(make_batch(bad, 1), DomainError);
}

TEST_CASE("flow loss by hand") {
    TransitionBatch b = residual_batch({{1.0, 2.0}, {3.0, 0.5}});
    const double delta = 0.25;
    const double want = 0.5 * ((0.5 * (std::log(1 + delta) + std::log(4 + delta))) +
                               (0.5 * (std::log(9 + delta) + std::log(0.25 + delta))));
    CHECK(flow_loss(zero_flow(2), b, delta) == doctest::Approx(want).epsilon(1e-14));
    CHECK_THROWS_AS(flow_loss(zero_flow(2), b, -1.0), DomainError);
}

TEST_CASE("flow loss with delta 0 on an exact fit is a domain error") {
    TransitionBatch b = residual_batch({{0.0}});
    CHECK_THROWS_AS(flow_loss(zero_flow(1), b, 0.0), DomainError);
    CHECK(std::isfinite(flow_loss(zero_flow(1), b, 1e-3)));
}

TEST_CASE("flow loss shifts by half the log of the squared scale") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(0.05, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> r(50, std::vector<double>(3));
        for (auto& row : r)
            for (double& v : row) v = n(rng);
        std::vector<double> c{u(rng), u(rng), u(rng)};
        auto scaled = r;
        for (auto& row : scaled)
            for (std::size_t i = 0; i < 3; ++i) row[i] *= c[i];
        const double shift = 0.5 * (std::log(c[0] * c[0]) + std::log(c[1] * c[1]) + std::log(c[2] * c[2]));
        const double diff = flow_loss(zero_flow(3), residual_batch(scaled), 0.0) - flow_loss(zero_flow(3), residual_batch(r), 0.0);
        CHECK(std::abs(diff - shift) < 1e-10);
    }
}

TEST_CASE("reduced validation loss is an affine function of the flow loss") {
    TransitionBatch b = residual_batch({{1.0, -2.0}, {0.1, 0.3}, {4.0, 0.0}});
    const double delta = 1e-3;
    const double fl = flow_loss(zero_flow(2), b, delta);
    CHECK(reduced_validation_loss(zero_flow(2), b, delta) == doctest::Approx(fl - std::log(delta)).epsilon(1e-13));
    CHECK_THROWS_AS(reduced_validation_loss(zero_flow(2), b, 0.0), DomainError);
    // A perfect flow scores exactly zero.
    CHECK(reduced_validation_loss(zero_flow(2), residual_batch({{0.0, 0.0}}), delta) == 0.0);
}

TEST_CASE("per-step NLL equals the negative log density up to the constant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        SdeModel m = affine_model({n(rng), n(rng), n(rng), n(rng)}, {n(rng), n(rng)}, {u(rng), u(rng)});
        TransitionTuple t{{n(rng), n(rng)}, {n(rng), n(rng)}, u(rng)};
        const double constant = 0.5 * 2 * std::log(2 * std::numbers::pi * t.dt);
        CHECK(nll_per_step(m, t) == doctest::Approx(-transition_log_density(m, t.x, t.x_next, t.dt) - constant).epsilon(1e-12));
    }
}

TEST_CASE("per-step NLL is minimized at sigma^2 = r^2 dt") {
    const double r = 1.7, dt = 0.3;
    auto nll_at = [&](double s2) {
        SdeModel m = affine_model({0}, {r}, {s2});
        return nll_per_step(m, {{0.0}, {0.0}, dt});
    };
    const double best = r * r * dt;
    CHECK(nll_at(best) < nll_at(best * 1.01));
    CHECK(nll_at(best) < nll_at(best * 0.99));
}

TEST_CASE("diffusion loss does not reach the flow") {
    SdeModel m;
    m.flow = init_params(flow_spec(2, 1, {4}, 1));
    m.diffusion = init_params(diffusion_spec(2, 1, {4}, 1e-6, 2));
    TransitionBatch b = residual_batch({{1.0, 2.0}, {0.5, -0.5}});
    Tape t;
    BoundNet f(t, m.flow, true), g(t, m.diffusion, true);
    Var loss = diffusion_loss(f, g, b);
    t.backward(loss);
    const Tensor gf = f.parameters().grad(), gg = g.parameters().grad();
    for (double v : gf.values()) CHECK(v == 0.0);
    double norm = 0.0;
    for (double v : gg.values()) norm += v * v;
    CHECK(norm > 0.0);
    CHECK(loss.value().item() == doctest::Approx(diffusion_loss(m, b)).epsilon(1e-14));
}

TEST_CASE("diffusion loss by hand") {
    SdeModel m = affine_model({0}, {0}, {0.5});
    TransitionBatch b = residual_batch({{2.0}, {1.0}}, 0.25);
    const double s2 = diffusion_net(m, Tensor::matrix({{0.0}}))[0];
    const double want = 0.5 * (0.5 * std::pow(s2 - 4 * 0.25, 2) + 0.5 * std::pow(s2 - 1 * 0.25, 2));
    CHECK(diffusion_loss(m, b) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("DSM loss of a zero denoiser is |eps|^2 / sigma^4") {
    MlpParams d(denoiser_spec(2, 1, {}, 0));
    Tensor states = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor eps = Tensor::matrix({{0.1, -0.2}, {0.3, 0.0}});
    Tape t;
    BoundNet net(t, d, true);
    const double sigma = 0.5;
    const double want = 0.5 * ((0.01 + 0.04) + 0.09) / std::pow(sigma, 4);
    CHECK(dsm_loss(net, states, sigma, eps).value().item() == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("DSM loss vanishes for the exact conditional score") {
    // d(x) = -(x - mu) / sigma^2 with states exactly mu: d(mu + eps) = -eps / sigma^2.
    const double sigma = 0.2;
    MlpParams d(denoiser_spec(1, 1, {}, 0));
    d.weight(0)[0] = -1.0 / (sigma * sigma);
    d.bias(0)[0] = 2.0 / (sigma * sigma);
    Tensor states = Tensor::matrix({{2.0}, {2.0}, {2.0}});
    Tensor eps = Tensor::matrix({{0.1}, {-0.3}, {0.05}});
    Tape t;
    BoundNet net(t, d, true);
    CHECK(dsm_loss(net, states, sigma, eps).value().item() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(dsm_loss(net, states, 0.0, eps), DomainError);
    CHECK_THROWS_AS(dsm_loss(net, states, sigma, Tensor::matrix({{0.1}})), ShapeError);
}

TEST_CASE("evaluate_losses fills every field") {
    SdeModel m = affine_model({0, 0, 0, 0}, {0, 0}, {0.1, 0.1});
    TransitionBatch b = residual_batch({{1.0, 2.0}});
    NoiseSource n(1);
    LossReport r = evaluate_losses(m, b, 0.1, n);
    CHECK_FALSE(r.dsm_loss.has_value());
    CHECK(r.flow_loss == flow_loss(m.flow, b, m.delta));
    nsde::test::set_affine_denoiser(m, {0, 0, 0, 0}, {0, 0});
    r = evaluate_losses(m, b, 0.1, n);
    CHECK(r.dsm_loss.has_value());
    CHECK(r.nll == doctest::Approx(nll_loss(m, b)));
}

TEST_CASE("loss gradients agree with central differences") {
    auto checks = check_loss_gradients(1, 5);
    REQUIRE(checks.size() == 4);
    for (const auto& c : checks) {
        CAPTURE(c.loss);
        CHECK(c.points == 5);
        CHECK(c.max_error < 1e-4);
    }
}
