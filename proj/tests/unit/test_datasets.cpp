#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nsde/datasets.hpp"

using namespace nsde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("nsde_ds_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

}  // namespace

TEST_CASE("bifurcation counts") {
    Dataset lo = gen_bifurcation(1, 10, 1.0, 0);
    Dataset hi = gen_bifurcation(10, 10, 1.0, 0);
    CHECK(lo.transition_count() == 100);
    CHECK(hi.transition_count() == 1000);
    CHECK(to_transitions(hi).size() == 1000);
    CHECK(hi.trajectories[3].size() == 101);
    CHECK(hi.dim == 2);
    CHECK_THROWS_AS(gen_bifurcation(0, 10, 1.0, 0), DomainError);
    CHECK_THROWS_AS(gen_bifurcation(10, 0, 1.0, 0), DomainError);
    CHECK_THROWS_AS(gen_bifurcation(10, 10, -1.0, 0), DomainError);
}

TEST_CASE("bifurcation states are exact") {
    Dataset ds = gen_bifurcation(10, 20, 2.0, 4);
    for (const auto& t : ds.trajectories) {
        const bool upper = t.states.back()[1] > 0;
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double time = t.times[k];
            CHECK(time == static_cast<double>(k) / 10.0);
            const auto want = bifurcation_state(time, 2.0, upper);
            CHECK(t.states[k] == want);
            if (time < kBranchTime) CHECK(t.states[k][1] == 0.0);
        }
        // Constant speed u on each segment, including the one across the fork.
        for (std::size_t k = 0; k + 1 < t.size(); ++k) {
            if (t.times[k] >= kBranchTime || t.times[k + 1] <= kBranchTime) {
                const double dx = t.states[k + 1][0] - t.states[k][0];
                const double dy = t.states[k + 1][1] - t.states[k][1];
                CHECK(std::hypot(dx, dy) / (t.times[k + 1] - t.times[k]) == doctest::Approx(2.0).epsilon(1e-9));
            }
        }
        const double slope = (t.states.back()[1] - t.states[50][1]) / (t.states.back()[0] - t.states[50][0]);
        CHECK(std::abs(slope) == doctest::Approx(std::tan(kBranchAngleDeg * std::acos(-1.0) / 180.0)));
    }
}

TEST_CASE("bifurcation branch choice is a fair coin") {
    Dataset ds = gen_bifurcation(1, 10000, 1.0, 77);
    int upper = 0;
    for (const auto& t : ds.trajectories) upper += t.states.back()[1] > 0;
    CHECK(std::abs(upper - 5000) < 4 * 50);
}

TEST_CASE("generators are deterministic in the seed") {
    CHECK(gen_bifurcation(10, 10, 1.0, 3) == gen_bifurcation(10, 10, 1.0, 3));
    OuParams p;
    p.seed = 3;
    CHECK(gen_ou(p) == gen_ou(p));
    OuParams q = p;
    q.seed = 4;
    CHECK_FALSE(gen_ou(p) == gen_ou(q));
}

TEST_CASE("OU mean decay and stationary variance") {
    OuParams p;
    p.theta = 1.0;
    p.sigma = 0.5;
    p.dt = 0.01;
    p.n_traj = 4000;
    p.n_steps = 400;
    p.x0_range = 0.0;
    p.seed = 12;
    Dataset ds = gen_ou(p);
    CHECK(ds.transition_count() == 4000 * 400);
    // Euler-Maruyama variance after n steps: s^2 dt (1 - a^(2n)) / (1 - a^2), a = 1 - theta dt.
    const double a = 1.0 - p.theta * p.dt;
    const double var_n = p.sigma * p.sigma * p.dt * (1 - std::pow(a, 800)) / (1 - a * a);
    double s = 0.0, q = 0.0;
    for (const auto& t : ds.trajectories) {
        s += t.states.back()[0];
        q += t.states.back()[0] * t.states.back()[0];
    }
    const double n = 4000.0;
    CHECK(std::abs(s / n) < 4.0 * std::sqrt(var_n / n));
    CHECK(q / n == doctest::Approx(var_n).epsilon(0.08));

    OuParams d = p;
    d.sigma = 0.0;
    d.n_traj = 3;
    d.x0_range = 2.0;
    Dataset det = gen_ou(d);
    for (const auto& t : det.trajectories)
        CHECK(t.states[400][0] == doctest::Approx(t.states[0][0] * std::pow(a, 400)).epsilon(1e-12));
    d.theta = 0.0;
    CHECK_THROWS_AS(gen_ou(d), DomainError);
}

TEST_CASE("transitions without and with history") {
    Dataset ds;
    ds.dim = 1;
    ds.trajectories.push_back({0, {0, 1, 3, 4}, {{10}, {11}, {12}, {13}}});
    ds.trajectories.push_back({1, {0, 0.5, 1}, {{20}, {21}, {22}}});
    auto t1 = to_transitions(ds);
    REQUIRE(t1.size() == 5);
    CHECK(t1[1] == TransitionTuple{{11}, {12}, 2.0});
    CHECK(t1[4] == TransitionTuple{{21}, {22}, 0.5});
    auto t2 = to_transitions(ds, 2);
    REQUIRE(t2.size() == 3);
    CHECK(t2[0] == TransitionTuple{{11, 10}, {12, 11}, 2.0});
    CHECK(t2[2] == TransitionTuple{{21, 20}, {22, 21}, 0.5});
    CHECK(ds.transition_count(2) == 3);
    CHECK_THROWS_AS(to_transitions(ds, 3), DomainError);
    CHECK_THROWS_AS(to_transitions(ds, 0), DomainError);
}

TEST_CASE("statistics are population moments over all states") {
    Dataset ds;
    ds.dim = 2;
    ds.trajectories.push_back({0, {0, 1}, {{1, 10}, {3, 10}}});
    ds.trajectories.push_back({1, {0}, {{5, 10}}});
    update_statistics(ds);
    CHECK(ds.meta.mean == std::vector<double>{3, 10});
    CHECK(ds.meta.std[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(ds.meta.std[1] == 0.0);
    CHECK(ds.state_count() == 3);
}

TEST_CASE("save and load round trip") {
    TempDir dir;
    Dataset ds = gen_bifurcation(10, 4, 1.0, 9);
    ds.meta.provenance["command"] = "gen-data bifurcation";
    const fs::path p = dir.path / "bif.csv";
    save_dataset(ds, p);
    CHECK(fs::exists(sidecar_path(p)));
    Dataset back = load_dataset(p);
    CHECK(back == ds);

    OuParams o;
    o.seed = 2;
    o.n_traj = 3;
    Dataset ou = gen_ou(o);
    save_dataset(ou, dir.path / "ou.csv");
    CHECK(load_dataset(dir.path / "ou.csv") == ou);

    std::ifstream is(p);
    std::string first;
    std::getline(is, first);
    CHECK(first.rfind("# ", 0) == 0);
}

TEST_CASE("files without a time column use virtual time") {
    TempDir dir;
    const fs::path p = dir.path / "v.csv";
    write_file(p, "traj_id,x1,x2\n0,1,2\n0,2,3\n0,4,5\n1,0,0\n1,1,1\n");
    Dataset ds = load_dataset(p);
    CHECK(ds.meta.virtual_time);
    CHECK(ds.dim == 2);
    CHECK(ds.trajectories[0].times == std::vector<double>{0, 1, 2});
    CHECK(to_transitions(ds)[0].dt == 1.0);
    CHECK(ds.meta.generator == "external");
}

TEST_CASE("malformed files are rejected with a line number") {
    TempDir dir;
    auto expect_line = [&](const std::string& text, std::size_t line) {
        const fs::path p = dir.path / "bad.csv";
        write_file(p, text);
        try {
            load_dataset(p);
            FAIL("expected a FormatError");
        } catch (const FormatError& e) {
            CHECK(e.line() == line);
        }
    };
    expect_line("id,t,x\n0,0,1\n", 1);
    expect_line("traj_id,t,x1\n0,0,1\n0,1\n", 3);
    expect_line("traj_id,t,x1\n0,0,1\n0,0,2\n", 3);
    expect_line("traj_id,t,x1\n0,0,abc\n", 2);
    expect_line("traj_id,t,x1\n0,0,1\n1,0,1\n0,1,1\n", 4);
    expect_line("traj_id,t,x1\n0,0,nan\n", 2);

    write_file(dir.path / "empty.csv", "# nothing\n");
    CHECK_THROWS_AS(load_dataset(dir.path / "empty.csv"), FormatError);
    CHECK_THROWS_AS(load_dataset(dir.path / "missing.csv"), Error);

    write_file(dir.path / "m.csv", "traj_id,t,x1\n0,0,1\n0,1,2\n");
    write_file(dir.path / "m.csv.meta.json", "{\"d\": 3}");
    CHECK_THROWS_AS(load_dataset(dir.path / "m.csv"), FormatError);
    write_file(dir.path / "m.csv.meta.json", "{broken");
    CHECK_THROWS_AS(load_dataset(dir.path / "m.csv"), FormatError);
}
