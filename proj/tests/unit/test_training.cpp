#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nsde/datasets.hpp"
#include "nsde/training.hpp"

using namespace nsde;

namespace {

Dataset small_ou(std::uint64_t seed = 1) {
    OuParams p;
    p.n_traj = 10;
    p.n_steps = 20;
    p.dt = 0.1;
    p.seed = seed;
    return gen_ou(p);
}

TrainConfig quick_config() {
    TrainConfig c;
    c.seed = 5;
    c.iterations = 30;
    c.batch_size = 32;
    c.hidden = {8};
    return c;
}

}  // namespace

TEST_CASE("SGD step by hand") {
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.5, -1.0};
    OptimizerState s;
    optimizer_step(p, g, s, {.kind = OptimizerKind::sgd}, 0.1);
    CHECK(p == std::vector<double>{0.95, -1.9});
    CHECK(s.step == 1);
}

TEST_CASE("Adam steps by hand") {
    std::vector<double> p{1.0};
    OptimizerState s;
    OptimizerConfig c;
    // First step: m_hat = g, v_hat = g^2, so the move is lr * sign(g) up to eps.
    optimizer_step(p, std::vector<double>{4.0}, s, c, 0.01);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-15));
    // Second step with g = 2.
    const double m = 0.9 * 0.1 * 4.0 + 0.1 * 2.0;
    const double v = 0.999 * 0.001 * 16.0 + 0.001 * 4.0;
    const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
    const double before = p[0];
    optimizer_step(p, std::vector<double>{2.0}, s, c, 0.01);
    CHECK(p[0] == doctest::Approx(before - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-14));
    CHECK(s.step == 2);
}

TEST_CASE("optimizer rejects bad gradients") {
    std::vector<double> p{1.0, 2.0};
    OptimizerState s;
    CHECK_THROWS_AS(optimizer_step(p, std::vector<double>{NAN, 0.0}, s, {}, 0.1), NonFiniteError);
    CHECK_THROWS_AS(optimizer_step(p, std::vector<double>{0.0}, s, {}, 0.1), ShapeError);
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(parse_optimizer("lbfgs"), DomainError);
}

TEST_CASE("interpolation moves x along the segment only") {
    std::vector<TransitionTuple> t{{{0.0, 0.0}, {2.0, -4.0}, 0.5}, {{1.0, 1.0}, {1.0, 3.0}, 0.5}};
    TransitionBatch b = make_batch(t, 2);
    const double tau[] = {0.25, 1.0};
    TransitionBatch r = interpolate_batch(b, tau);
    CHECK(r.x == Tensor::matrix({{0.5, -1.0}, {1.0, 3.0}}));
    CHECK(r.velocity == b.velocity);
    CHECK(r.x_next == b.x_next);
    CHECK(r.dt == b.dt);
    const double short_tau[] = {0.5};
    CHECK_THROWS_AS(interpolate_batch(b, short_tau), ShapeError);

    NoiseSource n(3);
    TransitionBatch s = interpolate_batch(b, n);
    CHECK(s.x.at(1, 0) == 1.0);
    CHECK(s.x.at(0, 0) / 2.0 == doctest::Approx(s.x.at(0, 1) / -4.0));
    CHECK(s.x.at(0, 0) >= 0.0);
    CHECK(s.x.at(0, 0) <= 2.0);
}

TEST_CASE("noise injection") {
    std::vector<TransitionTuple> t(2000, TransitionTuple{{0.0, 0.0}, {1.0, 1.0}, 1.0});
    TransitionBatch b = make_batch(t, 2);
    CHECK(inject_noise(b, Tensor::filled(b.x.shape(), 0.5)).x == Tensor::filled(b.x.shape(), 0.5));
    CHECK_THROWS_AS(inject_noise(b, Tensor::zeros({1, 2})), ShapeError);

    NoiseSource n(11);
    const double sig[] = {0.1, 2.0};
    TransitionBatch r = inject_noise(b, sig, n);
    double sq[2] = {0, 0};
    for (std::size_t k = 0; k < r.size(); ++k)
        for (int i = 0; i < 2; ++i) sq[i] += r.x.at(k, i) * r.x.at(k, i);
    CHECK(std::sqrt(sq[0] / 2000) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(std::sqrt(sq[1] / 2000) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(r.velocity == b.velocity);

    NoiseSource m(1);
    CHECK(inject_noise(b, 0.0, m).x == b.x);
    const double negative[] = {-1.0};
    CHECK_THROWS_AS(inject_noise(b, negative, m), DomainError);
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.validate();
    auto bad = [](auto mutate) {
        TrainConfig x;
        mutate(x);
        CHECK_THROWS_AS(x.validate(), DomainError);
    };
    bad([](TrainConfig& x) { x.batch_size = 0; });
    bad([](TrainConfig& x) { x.lr_flow = 0.0; });
    bad([](TrainConfig& x) { x.lr_denoiser = -1.0; });
    bad([](TrainConfig& x) { x.delta = -1e-3; });
    bad([](TrainConfig& x) { x.sigma_inject = -0.1; });
    bad([](TrainConfig& x) { x.sigma_dsm = 0.0; });
    bad([](TrainConfig& x) { x.history = 0; });
    bad([](TrainConfig& x) { x.validation_delta = 0.0; });
}

TEST_CASE("init_model seeds and shapes") {
    TrainConfig c = quick_config();
    SdeModel a = init_model(2, c), b = init_model(2, c);
    CHECK(a.flow == b.flow);
    CHECK(a.denoiser.has_value());
    CHECK_FALSE(a.flow.values()[0] == a.diffusion.values()[0]);
    CHECK(a.sigma2_min() == c.sigma2_min);
    c.denoiser = false;
    SdeModel n = init_model(2, c);
    CHECK_FALSE(n.denoiser.has_value());
    CHECK(n.guidance.mode == AlphaMode::none);
    c.history = 3;
    CHECK(init_model(2, c).input_dim() == 6);
}

TEST_CASE("training is deterministic and leaves the dataset unchanged") {
    const Dataset ds = small_ou();
    const Dataset copy = ds;
    TrainConfig c = quick_config();
    TrainResult a = train(ds, c), b = train(ds, c);
    CHECK(ds == copy);
    CHECK(a.model.flow == b.model.flow);
    CHECK(a.model.diffusion == b.model.diffusion);
    CHECK(*a.model.denoiser == *b.model.denoiser);
    std::ostringstream sa, sb;
    a.log.write_csv(sa);
    b.log.write_csv(sb);
    CHECK(sa.str() == sb.str());
    c.seed = 6;
    CHECK_FALSE(train(ds, c).model.flow == a.model.flow);
}

TEST_CASE("training log rows and csv") {
    TrainConfig c = quick_config();
    c.iterations = 25;
    c.checkpoint_interval = 10;
    TrainResult r = train(small_ou(), c);
    REQUIRE(r.log.rows.size() == 25);
    CHECK(r.log.rows[7].iteration == 7);
    CHECK(r.log.rows[7].losses.dsm_loss.has_value());
    CHECK(r.log.interval_seconds.size() == 3);
    std::ostringstream os;
    r.log.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "iteration,flow_loss,diffusion_loss,dsm_loss,reduced_validation_loss");
    int n = 0;
    while (std::getline(is, line)) ++n;
    CHECK(n == 25);
}

TEST_CASE("training without a denoiser") {
    TrainConfig c = quick_config();
    c.denoiser = false;
    TrainResult r = train(small_ou(), c);
    CHECK_FALSE(r.model.denoiser.has_value());
    CHECK_FALSE(r.log.rows.back().losses.dsm_loss.has_value());
    std::ostringstream os;
    r.log.write_csv(os);
    CHECK(os.str().find(",,") != std::string::npos);
}

TEST_CASE("checkpoint callback fires every interval") {
    TrainConfig c = quick_config();
    c.iterations = 35;
    c.checkpoint_interval = 10;
    std::vector<std::size_t> seen;
    SdeModel last;
    TrainResult r = train(small_ou(), c, [&](std::size_t it, const SdeModel& m) {
        seen.push_back(it);
        last = m;
    });
    CHECK(seen == std::vector<std::size_t>{10, 20, 30});
    CHECK_FALSE(last.flow == r.model.flow);
}

TEST_CASE("training reduces the validation loss on a low-noise system") {
    // The loss cannot fall below the level set by the process noise, so the
    // noise is kept small next to the initial residuals.
    OuParams p;
    p.sigma = 0.01;
    p.dt = 0.1;
    p.n_traj = 50;
    p.n_steps = 20;
    p.seed = 2;
    TrainConfig c;
    c.seed = 1;
    c.iterations = 400;
    c.batch_size = 128;
    c.hidden = {16};
    c.lr_flow = 1e-2;
    c.denoiser = false;
    TrainResult r = train(gen_ou(p), c);
    const double first = r.log.rows.front().losses.reduced_validation_loss;
    const double last = r.log.rows.back().losses.reduced_validation_loss;
    CHECK(last < 0.5 * first);
}

TEST_CASE("divergence is reported with the iteration") {
    TrainConfig c = quick_config();
    c.optimizer.kind = OptimizerKind::sgd;
    c.lr_flow = 1e200;
    c.denoiser = false;
    c.iterations = 200;
    CHECK_THROWS_AS(train(small_ou(), c), DivergenceError);
}

TEST_CASE("explicit transitions overload checks its inputs") {
    TrainConfig c = quick_config();
    SdeModel m = init_model(1, c);
    std::vector<TransitionTuple> none;
    const double inj[] = {0.0};
    CHECK_THROWS_AS(train(none, m, c, inj), DomainError);
    std::vector<TransitionTuple> t{{{0.0}, {1.0}, 0.1}};
    const double two[] = {0.0, 0.0};
    CHECK_THROWS_AS(train(t, m, c, two), ShapeError);
}
