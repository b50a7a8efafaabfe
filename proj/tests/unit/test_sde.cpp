#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "nsde/sde.hpp"

using namespace nsde;
using nsde::test::affine_model;
using nsde::test::set_affine_denoiser;

TEST_CASE("drift under each guidance mode") {
    SdeModel m = affine_model({0, 0, 0, 0}, {1.0, -2.0}, {0.5, 0.25});
    set_affine_denoiser(m, {0, 0, 0, 0}, {4.0, 8.0});
    Tensor x = Tensor::matrix({{0.3, 0.7}});
    const Tensor s2 = diffusion_net(m, x);

    CHECK(drift(m, x) == Tensor::matrix({{1.0, -2.0}}));
    m.guidance = Guidance::constant(0.5);
    CHECK(drift(m, x) == Tensor::matrix({{3.0, 2.0}}));
    m.guidance = Guidance::half_gg();
    Tensor h = drift(m, x);
    CHECK(h[0] == doctest::Approx(1.0 + 0.5 * s2[0] * 4.0).epsilon(1e-15));
    CHECK(h[1] == doctest::Approx(-2.0 + 0.5 * s2[1] * 8.0).epsilon(1e-15));

    m.denoiser.reset();
    CHECK_THROWS_AS(drift(m, x), DomainError);
    CHECK_THROWS_AS(m.validate(), DomainError);
    CHECK_THROWS_AS(denoiser_net(m, x), DomainError);
}

TEST_CASE("one Euler-Maruyama step by hand") {
    SdeModel m = affine_model({-1, 0, 0, 2}, {0.5, 0.0}, {0.04, 0.09});
    const double x[2] = {1.0, -1.0};
    const double z[2] = {1.5, -0.5};
    const double dt = 0.1;
    const Tensor s2 = diffusion_net(m, Tensor::row(x));
    auto next = euler_maruyama_step(m, x, dt, z);
    CHECK(next[0] == 1.0 + (-1.0 + 0.5) * dt + std::sqrt(s2[0] * dt) * 1.5);
    CHECK(next[1] == -1.0 + (-2.0) * dt + std::sqrt(s2[1] * dt) * -0.5);
    CHECK(next[0] == doctest::Approx(0.95 + std::sqrt(0.004) * 1.5));

    const double zero[2] = {0.0, 0.0};
    auto det = euler_maruyama_step(m, x, dt, zero);
    CHECK(det[0] == 1.0 + (-0.5) * dt);
}

TEST_CASE("Euler-Maruyama argument checks") {
    SdeModel m = affine_model({0}, {0}, {1});
    const double x[1] = {0.0};
    const double z[1] = {0.0};
    CHECK_THROWS_AS(euler_maruyama_step(m, x, 0.0, z), DomainError);
    CHECK_THROWS_AS(euler_maruyama_step(m, x, -1.0, z), DomainError);
    const double x2[2] = {0.0, 1.0};
    CHECK_THROWS_AS(euler_maruyama_step(m, x2, 0.1, z), ShapeError);
    NoiseSource n(0);
    CHECK_THROWS_AS(simulate(m, x, 0, 0.1, n), DomainError);
    CHECK_THROWS_AS(simulate(m, x, 5, 0.0, n), DomainError);
}

TEST_CASE("a runaway state is reported rather than propagated") {
    SdeModel m = affine_model({0}, {1e308}, {1});
    const double x[1] = {1e308};
    const double z[1] = {0.0};
    CHECK_THROWS_AS(euler_maruyama_step(m, x, 10.0, z), NonFiniteError);
}

TEST_CASE("single-step Monte Carlo moments") {
    SdeModel m = affine_model({0, 0, 0, 0}, {2.0, -1.0}, {0.5, 2.0});
    const double x[2] = {0.0, 0.0};
    const double dt = 0.2;
    NoiseSource noise(123);
    const int n = 200000;
    double s[2] = {0, 0}, q[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
        auto y = euler_maruyama_step(m, x, dt, noise);
        for (int k = 0; k < 2; ++k) {
            s[k] += y[k];
            q[k] += y[k] * y[k];
        }
    }
    const double mean[2] = {0.4, -0.2}, var[2] = {0.1, 0.4};
    for (int k = 0; k < 2; ++k) {
        const double mu = s[k] / n;
        const double v = q[k] / n - mu * mu;
        CHECK(std::abs(mu - mean[k]) < 5.0 * std::sqrt(var[k] / n));
        CHECK(v == doctest::Approx(var[k]).epsilon(0.02));
    }
}

TEST_CASE("simulate returns n_steps + 1 states on the time grid") {
    SdeModel m = affine_model({-0.5, 0, 0, -0.5}, {0, 0}, {0.1, 0.1});
    NoiseSource a(7), b(7);
    const double x0[2] = {1.0, 2.0};
    Trajectory t = simulate(m, x0, 50, 0.05, a);
    CHECK(t.size() == 51);
    CHECK(t.states[0] == std::vector<double>{1.0, 2.0});
    CHECK(t.times[0] == 0.0);
    CHECK(t.times[50] == 50 * 0.05);
    t.validate();
    CHECK(simulate(m, x0, 50, 0.05, b) == t);
}

TEST_CASE("simulate consumes the noise stream like repeated steps") {
    SdeModel m = affine_model({-0.5, 0.1, 0.2, -0.5}, {0.3, 0}, {0.1, 0.2});
    NoiseSource a(99), b(99);
    std::vector<double> x{0.5, -0.5};
    Trajectory t = simulate(m, x, 10, 0.1, a);
    for (std::size_t k = 1; k <= 10; ++k) {
        x = euler_maruyama_step(m, x, 0.1, b);
        CHECK(t.states[k] == x);
    }
}

TEST_CASE("transition density equals the Gaussian formula") {
    SdeModel m = affine_model({0.5, -1, 0, 1}, {0.25, 0}, {0.3, 0.7});
    const double x[2] = {1.0, 2.0};
    const double xn[2] = {1.2, 2.5};
    const double dt = 0.25;
    const Tensor s2 = diffusion_net(m, Tensor::row(x));
    const double f[2] = {0.5 * 1 - 1 * 2 + 0.25, 2.0};
    double want = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double var = s2[i] * dt;
        const double r = xn[i] - x[i] - f[i] * dt;
        want += -0.5 * std::log(2 * std::numbers::pi * var) - r * r / (2 * var);
    }
    CHECK(transition_log_density(m, x, xn, dt) == doctest::Approx(want).epsilon(1e-14));
    CHECK_THROWS_AS(transition_log_density(m, x, xn, 0.0), DomainError);
}

TEST_CASE("rescaled time reproduces the path bit for bit") {
    SdeModel m;
    m.flow = init_params(flow_spec(2, 1, {16, 16}, 4));
    m.diffusion = init_params(diffusion_spec(2, 1, {16}, 1e-6, 5));
    for (double& b : m.diffusion.bias(1)) b = -3.0;
    const double x0[2] = {0.1, -0.4};
    NoiseSource ref_noise(42);
    Trajectory ref = simulate(m, x0, 100, 0.1, ref_noise);
    for (double lambda : {0.5, 2.0, 4.0}) {
        CAPTURE(lambda);
        SdeModel r = rescale_time(m, lambda);
        NoiseSource n(42);
        Trajectory t = simulate(r, x0, 100, lambda * 0.1, n);
        double worst = 0.0;
        for (std::size_t k = 0; k < t.size(); ++k)
            for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::abs(t.states[k][i] - ref.states[k][i]));
        CHECK(worst == 0.0);
    }
    CHECK_THROWS_AS(rescale_time(m, 0.0), DomainError);
    CHECK_THROWS_AS(rescale_time(m, -2.0), DomainError);
}

TEST_CASE("rescaling composes multiplicatively") {
    SdeModel m = affine_model({0}, {3.0}, {0.5});
    SdeModel r = rescale_time(rescale_time(m, 2.0), 4.0);
    CHECK(r.time_scale == 8.0);
    Tensor x = Tensor::matrix({{1.0}});
    CHECK(flow_net(r, x)[0] == 3.0 / 8.0);
}

TEST_CASE("history window shifts with the newest frame first") {
    SdeModel m;
    m.flow = MlpParams(flow_spec(1, 3, {}, 0));
    // f = x_t - x_{t-1}: extrapolate the last increment.
    m.flow.weight(0)[0] = 1.0;
    m.flow.weight(0)[1] = -1.0;
    m.diffusion = MlpParams(diffusion_spec(1, 3, {}, 1e-6, 0));
    m.validate();
    CHECK(m.history() == 3);
    const double x[3] = {2.0, 1.0, 0.0};
    const double z[1] = {0.0};
    auto y = euler_maruyama_step(m, x, 1.0, z);
    CHECK(y[1] == 2.0);
    CHECK(y[2] == 1.0);
    CHECK(y[0] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("model invariants") {
    SdeModel m = affine_model({0, 0, 0, 0}, {0, 0}, {1, 1});
    m.validate();
    SdeModel bad = m;
    bad.time_scale = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = m;
    bad.diffusion = MlpParams(diffusion_spec(3, 1, {}, 1e-6, 0));
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    bad = m;
    std::swap(bad.flow, bad.diffusion);
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = m;
    set_affine_denoiser(bad, {0, 0, 0, 0}, {0, 0});
    bad.guidance = Guidance::constant(-1.0);
    CHECK_THROWS_AS(bad.validate(), DomainError);
    CHECK_THROWS_AS(parse_alpha_mode("sometimes"), DomainError);
    CHECK(parse_alpha_mode("half_gg") == AlphaMode::half_gg);
}
