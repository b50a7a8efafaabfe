#include "nsde/datasets.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nsde/text_io.hpp"

namespace nsde {

using json = nlohmann::json;

void Trajectory::validate() const {
    const std::string name = "trajectory " + std::to_string(id);
    if (times.size() != states.size()) throw FormatError(name + ": times and states differ in length");
    if (states.empty()) throw FormatError(name + ": no samples");
    const std::size_t d = states.front().size();
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k].size() != d) throw FormatError(name + ": inconsistent state dimension");
        if (!std::isfinite(times[k])) throw FormatError(name + ": non-finite time");
        for (double v : states[k]) {
            if (!std::isfinite(v)) throw FormatError(name + ": non-finite state value");
        }
        if (k > 0 && !(times[k] > times[k - 1])) {
            throw FormatError(name + ": times are not strictly increasing at sample " + std::to_string(k));
        }
    }
}

void Dataset::validate() const {
    if (trajectories.empty()) throw FormatError("dataset has no trajectories");
    for (const auto& t : trajectories) {
        t.validate();
        if (t.dim() != dim) {
            throw FormatError("trajectory " + std::to_string(t.id) + " has dimension " + std::to_string(t.dim()) +
                              ", dataset has " + std::to_string(dim));
        }
    }
}

std::size_t Dataset::state_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size();
    return n;
}

std::size_t Dataset::transition_count(std::size_t history) const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size() > history ? t.size() - history : 0;
    return n;
}

void update_statistics(Dataset& ds) {
    const std::size_t d = ds.dim;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    const double n = static_cast<double>(ds.state_count());
    if (n == 0) {
        ds.meta.mean = mean;
        ds.meta.std = var;
        return;
    }
    for (const auto& t : ds.trajectories)
        for (const auto& s : t.states)
            for (std::size_t i = 0; i < d; ++i) mean[i] += s[i];
    for (double& m : mean) m /= n;
    for (const auto& t : ds.trajectories)
        for (const auto& s : t.states)
            for (std::size_t i = 0; i < d; ++i) var[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
    for (double& v : var) v = std::sqrt(v / n);
    ds.meta.mean = std::move(mean);
    ds.meta.std = std::move(var);
}

namespace {

std::mt19937_64 trajectory_engine(std::uint64_t seed, std::uint64_t traj_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(traj_id), static_cast<std::uint32_t>(traj_id >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

std::vector<double> bifurcation_state(double t, double u, bool upper) {
    if (t < kBranchTime) return {u * t, 0.0};
    const double c = std::sqrt(3.0) / 2.0;  // cos 30deg
    const double s = 0.5;                   // sin 30deg
    const double tau = t - kBranchTime;
    return {u * kBranchTime + u * c * tau, (upper ? 1.0 : -1.0) * u * s * tau};
}

Dataset gen_bifurcation(double density, std::size_t n_traj, double u, std::uint64_t seed) {
    if (!(density > 0.0) || !std::isfinite(density)) throw DomainError("density must be positive");
    if (n_traj == 0) throw DomainError("n_traj must be >= 1");
    if (!(u > 0.0)) throw DomainError("speed u must be positive");
    const auto n_seg = static_cast<std::size_t>(std::floor(kBifurcationHorizon * density + 1e-9));
    if (n_seg == 0) throw DomainError("density too small for the time horizon");
    Dataset ds;
    ds.dim = 2;
    ds.meta.generator = "bifurcation";
    ds.meta.parameters = {{"density", density},
                          {"n_traj", static_cast<double>(n_traj)},
                          {"u", u},
                          {"horizon", kBifurcationHorizon},
                          {"branch_time", kBranchTime}};
    ds.meta.seed = seed;
    for (std::size_t j = 0; j < n_traj; ++j) {
        auto rng = trajectory_engine(seed, j);
        const bool upper = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
        Trajectory traj;
        traj.id = static_cast<std::int64_t>(j);
        for (std::size_t k = 0; k <= n_seg; ++k) {
            const double t = static_cast<double>(k) / density;
            traj.times.push_back(t);
            traj.states.push_back(bifurcation_state(t, u, upper));
        }
        ds.trajectories.push_back(std::move(traj));
    }
    update_statistics(ds);
    return ds;
}

Dataset gen_ou(const OuParams& p) {
    if (!(p.theta > 0.0) || !(p.sigma >= 0.0) || !(p.dt > 0.0) || p.n_traj == 0 || p.n_steps == 0 ||
        !(p.x0_range >= 0.0)) {
        throw DomainError("invalid Ornstein-Uhlenbeck parameters");
    }
    Dataset ds;
    ds.dim = 1;
    ds.meta.generator = "ou";
    ds.meta.parameters = {{"theta", p.theta},
                          {"sigma", p.sigma},
                          {"dt", p.dt},
                          {"n_traj", static_cast<double>(p.n_traj)},
                          {"n_steps", static_cast<double>(p.n_steps)},
                          {"x0_range", p.x0_range}};
    ds.meta.seed = p.seed;
    const double noise_scale = p.sigma * std::sqrt(p.dt);
    for (std::size_t j = 0; j < p.n_traj; ++j) {
        auto rng = trajectory_engine(p.seed, j);
        std::uniform_real_distribution<double> start(-p.x0_range, p.x0_range);
        std::normal_distribution<double> normal(0.0, 1.0);
        Trajectory traj;
        traj.id = static_cast<std::int64_t>(j);
        double x = start(rng);
        traj.times.push_back(0.0);
        traj.states.push_back({x});
        for (std::size_t k = 1; k <= p.n_steps; ++k) {
            const double z = normal(rng);
            x = x - p.theta * x * p.dt + noise_scale * z;
            traj.times.push_back(static_cast<double>(k) * p.dt);
            traj.states.push_back({x});
        }
        ds.trajectories.push_back(std::move(traj));
    }
    update_statistics(ds);
    return ds;
}

std::vector<TransitionTuple> to_transitions(const Dataset& ds, std::size_t history) {
    if (history == 0) throw DomainError("history window must be >= 1");
    std::vector<TransitionTuple> out;
    out.reserve(ds.transition_count(history));
    for (const auto& traj : ds.trajectories) {
        if (traj.size() < history + 1) {
            throw DomainError("trajectory " + std::to_string(traj.id) + " has " + std::to_string(traj.size()) +
                              " samples; a window of " + std::to_string(history) + " needs at least " +
                              std::to_string(history + 1));
        }
        auto window = [&](std::size_t newest) {
            std::vector<double> w;
            w.reserve(history * ds.dim);
            for (std::size_t h = 0; h < history; ++h) {
                const auto& s = traj.states[newest - h];
                w.insert(w.end(), s.begin(), s.end());
            }
            return w;
        };
        for (std::size_t j = history - 1; j + 1 < traj.size(); ++j) {
            out.push_back({window(j), window(j + 1), traj.times[j + 1] - traj.times[j]});
        }
    }
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

void write_trajectories(std::ostream& os, const std::vector<Trajectory>& trajectories,
                        const std::vector<std::pair<std::string, std::string>>& comments) {
    write_comment_lines(os, comments);
    const std::size_t d = trajectories.empty() ? 0 : trajectories.front().dim();
    os << "traj_id,t";
    for (std::size_t i = 1; i <= d; ++i) os << ",x" << i;
    os << '\n';
    for (const auto& traj : trajectories) {
        for (std::size_t k = 0; k < traj.size(); ++k) {
            os << traj.id << ',' << format_double(traj.times[k]);
            for (double v : traj.states[k]) os << ',' << format_double(v);
            os << '\n';
        }
    }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    {
        std::ofstream os(path);
        if (!os) throw Error("cannot write " + path.string());
        write_trajectories(os, ds.trajectories, {ds.meta.provenance.begin(), ds.meta.provenance.end()});
        if (!os) throw Error("write failed: " + path.string());
    }
    json meta;
    meta["format_version"] = 1;
    meta["generator"] = ds.meta.generator;
    meta["parameters"] = ds.meta.parameters;
    meta["seed"] = ds.meta.seed;
    meta["d"] = ds.dim;
    meta["virtual_time"] = ds.meta.virtual_time;
    meta["mean"] = ds.meta.mean;
    meta["std"] = ds.meta.std;
    meta["provenance"] = ds.meta.provenance;
    std::ofstream ms(sidecar_path(path));
    if (!ms) throw Error("cannot write " + sidecar_path(path).string());
    ms << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    bool timed = true;
    std::size_t columns = 0;
    std::set<std::int64_t> finished;
    Trajectory* current = nullptr;

    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "traj_id") {
                throw FormatError("expected header starting with 'traj_id'", lineno);
            }
            timed = fields[1] == "t";
            columns = fields.size();
            ds.dim = columns - (timed ? 2 : 1);
            if (ds.dim == 0) throw FormatError("header declares no state columns", lineno);
            have_header = true;
            continue;
        }
        if (fields.size() != columns) {
            throw FormatError("expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()),
                              lineno);
        }
        const std::int64_t id = parse_int(fields[0], lineno);
        if (!current || current->id != id) {
            if (current) finished.insert(current->id);
            if (finished.count(id)) throw FormatError("rows of trajectory " + std::to_string(id) + " are not contiguous", lineno);
            ds.trajectories.push_back(Trajectory{id, {}, {}});
            current = &ds.trajectories.back();
        }
        const std::size_t offset = timed ? 2 : 1;
        const double t = timed ? parse_double(fields[1], lineno) : static_cast<double>(current->times.size());
        if (!current->times.empty() && !(t > current->times.back())) {
            throw FormatError("trajectory " + std::to_string(id) + ": times are not strictly increasing", lineno);
        }
        std::vector<double> state(ds.dim);
        for (std::size_t i = 0; i < ds.dim; ++i) state[i] = parse_double(fields[offset + i], lineno);
        current->times.push_back(t);
        current->states.push_back(std::move(state));
    }
    if (!have_header) throw FormatError("empty dataset file " + path.string());
    if (ds.trajectories.empty()) throw FormatError("dataset file " + path.string() + " has no samples");
    ds.meta.virtual_time = !timed;

    const auto meta_path = sidecar_path(path);
    if (std::filesystem::exists(meta_path)) {
        std::ifstream ms(meta_path);
        json meta;
        try {
            ms >> meta;
        } catch (const json::exception& e) {
            throw FormatError("malformed metadata " + meta_path.string() + ": " + e.what());
        }
        ds.meta.generator = meta.value("generator", std::string("external"));
        ds.meta.parameters = meta.value("parameters", std::map<std::string, double>{});
        ds.meta.seed = meta.value("seed", std::uint64_t{0});
        ds.meta.virtual_time = ds.meta.virtual_time || meta.value("virtual_time", false);
        ds.meta.provenance = meta.value("provenance", std::map<std::string, std::string>{});
        if (meta.contains("d") && meta["d"].get<std::size_t>() != ds.dim) {
            throw FormatError("metadata dimension disagrees with the trajectory file");
        }
    }
    ds.validate();
    update_statistics(ds);
    return ds;
}

}  // namespace nsde
