#include "nsde/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nsde/text_io.hpp"

namespace nsde {

void BranchReport::write_csv(std::ostream& os) const {
    os << "n_traj,upper_fraction,lower_fraction,undecided_fraction,pre_branch_max_abs_y,mean_terminal_speed_error\n"
       << n_traj << ',' << format_double(upper_fraction) << ',' << format_double(lower_fraction) << ','
       << format_double(undecided_fraction) << ',' << format_double(pre_branch_max_abs_y) << ','
       << format_double(mean_terminal_speed_error) << '\n';
}

BranchReport branch_metrics(std::span<const Trajectory> trajectories, double branch_time, double y_threshold,
                            double u) {
    if (trajectories.empty()) throw DomainError("branch metrics need at least one trajectory");
    if (!(y_threshold >= 0.0)) throw DomainError("y threshold must be >= 0");
    std::size_t upper = 0, lower = 0;
    double max_abs_y = 0.0;
    double speed_error = 0.0;
    for (const auto& tr : trajectories) {
        tr.validate();
        if (tr.dim() < 2) throw ShapeError("branch metrics need states with at least 2 dimensions");
        if (tr.times.back() < branch_time) throw DomainError("trajectory ends before the branch time");
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (tr.times[k] < branch_time) max_abs_y = std::max(max_abs_y, std::abs(tr.states[k][1]));
        }
        const double y_end = tr.states.back()[1];
        if (y_end > y_threshold) {
            ++upper;
        } else if (y_end < -y_threshold) {
            ++lower;
        }
        if (tr.size() >= 2) {
            const auto& a = tr.states[tr.size() - 2];
            const auto& b = tr.states.back();
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += (b[i] - a[i]) * (b[i] - a[i]);
            const double dt = tr.times.back() - tr.times[tr.size() - 2];
            speed_error += std::abs(std::sqrt(s) / dt - u);
        }
    }
    BranchReport r;
    r.n_traj = trajectories.size();
    const double n = static_cast<double>(r.n_traj);
    r.upper_fraction = static_cast<double>(upper) / n;
    r.lower_fraction = static_cast<double>(lower) / n;
    r.undecided_fraction = static_cast<double>(r.n_traj - upper - lower) / n;
    r.pre_branch_max_abs_y = max_abs_y;
    r.mean_terminal_speed_error = speed_error / n;
    return r;
}

const char* to_string(AblationMode m) {
    switch (m) {
        case AblationMode::flow_only: return "flow_only";
        case AblationMode::flow_diffusion: return "flow_diffusion";
        case AblationMode::full: return "full";
    }
    return "?";
}

AblationMode parse_ablation_mode(const std::string& s) {
    if (s == "flow_only") return AblationMode::flow_only;
    if (s == "flow_diffusion") return AblationMode::flow_diffusion;
    if (s == "full" || s == "flow_denoiser_diffusion") return AblationMode::full;
    throw DomainError("unknown ablation mode '" + s + "'");
}

std::vector<double> initial_window(const SdeModel& model, std::span<const double> x0) {
    const std::size_t d = model.state_dim();
    if (x0.size() == model.input_dim()) return {x0.begin(), x0.end()};
    if (x0.size() != d) {
        throw ShapeError("initial state has " + std::to_string(x0.size()) + " values, model state dimension is " +
                         std::to_string(d));
    }
    std::vector<double> w;
    w.reserve(model.input_dim());
    for (std::size_t k = 0; k < model.history(); ++k) w.insert(w.end(), x0.begin(), x0.end());
    return w;
}

std::vector<Trajectory> simulate_many(const SdeModel& model, const SimParams& sim) {
    if (sim.n_traj == 0) throw DomainError("need at least one trajectory");
    const std::vector<double> x0 = initial_window(model, sim.x0);
    std::vector<Trajectory> out;
    out.reserve(sim.n_traj);
    for (std::size_t i = 0; i < sim.n_traj; ++i) {
        NoiseSource noise(sim.seed + i);
        Trajectory tr = simulate(model, x0, sim.n_steps, sim.dt, noise);
        tr.id = static_cast<std::int64_t>(i);
        out.push_back(std::move(tr));
    }
    return out;
}

SdeModel ablation_model(const SdeModel& model, AblationMode mode) {
    SdeModel m = model;
    switch (mode) {
        case AblationMode::flow_only: {
            // A zero last layer with a very negative bias makes softplus
            // underflow to exactly 0, leaving only the floor.
            const std::size_t last = m.diffusion.layer_count() - 1;
            for (double& w : m.diffusion.weight(last)) w = 0.0;
            for (double& b : m.diffusion.bias(last)) b = -1e3;
            m.guidance = Guidance::off();
            break;
        }
        case AblationMode::flow_diffusion:
            m.guidance = Guidance::off();
            break;
        case AblationMode::full:
            if (!m.denoiser) throw DomainError("full ablation mode requires a denoiser network");
            break;
    }
    return m;
}

AblationResult run_ablation(const SdeModel& model, AblationMode mode, const SimParams& sim, double branch_time,
                            double y_threshold, double u) {
    AblationResult r;
    r.trajectories = simulate_many(ablation_model(model, mode), sim);
    r.report = branch_metrics(r.trajectories, branch_time, y_threshold, u);
    return r;
}

double max_pairwise_terminal_distance(std::span<const Trajectory> trajectories) {
    double best = 0.0;
    for (std::size_t a = 0; a < trajectories.size(); ++a) {
        for (std::size_t b = a + 1; b < trajectories.size(); ++b) {
            const auto& p = trajectories[a].states.back();
            const auto& q = trajectories[b].states.back();
            if (p.size() != q.size()) throw ShapeError("trajectories differ in dimension");
            double s = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
            best = std::max(best, std::sqrt(s));
        }
    }
    return best;
}

std::vector<FieldRow> export_vector_field(const SdeModel& model, const GridSpec& grid) {
    if (model.state_dim() != 2 || model.input_dim() != 2) {
        throw ShapeError("vector-field export needs a 2-D model without history");
    }
    if (grid.resolution == 0) throw DomainError("grid resolution must be >= 1");
    if (!(grid.x_max >= grid.x_min) || !(grid.y_max >= grid.y_min)) throw DomainError("empty grid range");
    const std::size_t n = grid.resolution;
    auto coord = [n](double lo, double hi, std::size_t k) {
        return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    };
    std::vector<double> xs;
    xs.reserve(2 * n * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(coord(grid.x_min, grid.x_max, i));
            xs.push_back(coord(grid.y_min, grid.y_max, j));
        }
    }
    const Tensor x({n * n, 2}, xs);
    const Tensor f = flow_net(model, x);
    const Tensor s2 = diffusion_net(model, x);
    Tensor score;
    if (model.denoiser) score = denoiser_net(model, x);
    std::vector<FieldRow> rows(n * n);
    for (std::size_t r = 0; r < n * n; ++r) {
        FieldRow& row = rows[r];
        row.x = xs[2 * r];
        row.y = xs[2 * r + 1];
        row.f1 = f[2 * r];
        row.f2 = f[2 * r + 1];
        row.s1 = s2[2 * r];
        row.s2 = s2[2 * r + 1];
        if (model.denoiser) {
            row.has_score = true;
            row.d1 = score[2 * r];
            row.d2 = score[2 * r + 1];
        }
    }
    return rows;
}

void write_vector_field(std::ostream& os, std::span<const FieldRow> rows) {
    os << "x,y,f1,f2,sigma2_1,sigma2_2,d1,d2\n";
    for (const auto& r : rows) {
        os << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.f1) << ','
           << format_double(r.f2) << ',' << format_double(r.s1) << ',' << format_double(r.s2) << ',';
        if (r.has_score) os << format_double(r.d1) << ',' << format_double(r.d2);
        else os << ',';
        os << '\n';
    }
}

SuperResReport temporal_superresolution_check(const SdeModel& model, const Dataset& dataset, std::size_t refine,
                                              std::uint64_t seed) {
    if (refine == 0) throw DomainError("refine factor must be >= 1");
    if (dataset.dim != model.state_dim()) throw ShapeError("dataset and model dimensions differ");
    const auto transitions = to_transitions(dataset, model.history());
    if (transitions.empty()) throw DomainError("dataset yields no transitions");
    const std::size_t d = model.state_dim();
    NoiseSource noise(seed);
    std::vector<double> sq(d, 0.0);
    for (const auto& t : transitions) {
        std::vector<double> x = t.x;
        const double h = t.dt / static_cast<double>(refine);
        for (std::size_t k = 0; k < refine; ++k) x = euler_maruyama_step(model, x, h, noise);
        for (std::size_t i = 0; i < d; ++i) sq[i] += (x[i] - t.x_next[i]) * (x[i] - t.x_next[i]);
    }
    SuperResReport r;
    r.refine = refine;
    r.n_transitions = transitions.size();
    for (double s : sq) r.rms.push_back(std::sqrt(s / static_cast<double>(transitions.size())));
    return r;
}

}  // namespace nsde
