#pragma once

// Trajectory datasets: generators, transition extraction and persistence.
//
// File format: delimiter-separated text with header `traj_id,t,x1,...,xd`,
// one row per sample, shortest round-trip decimal floats. Rows of one
// trajectory are contiguous. Lines starting with '#' are comments. A file
// whose header lacks the `t` column is loaded with virtual time (dt = 1).
// Metadata goes to a JSON sidecar `<file>.meta.json`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nsde/losses.hpp"
#include "nsde/trajectory.hpp"

namespace nsde {

struct DatasetMeta {
    std::string generator = "external";
    std::map<std::string, double> parameters;
    std::uint64_t seed = 0;
    bool virtual_time = false;
    std::vector<double> mean;  // per dimension, over all states
    std::vector<double> std;   // population standard deviation
    std::map<std::string, std::string> provenance;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    std::size_t dim = 0;
    DatasetMeta meta;

    void validate() const;
    std::size_t state_count() const;
    // Number of tuples to_transitions() yields for the given window.
    std::size_t transition_count(std::size_t history = 1) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Recomputes meta.mean / meta.std from the states.
void update_statistics(Dataset& ds);

// Y-shaped bifurcation: velocity (u, 0) before kBranchTime, then
// u (cos 30deg, +-sin 30deg) with the sign drawn per trajectory. States are
// sampled at t_k = k / density over [0, kBifurcationHorizon], starting at
// the origin, and integrated exactly.
inline constexpr double kBifurcationHorizon = 10.0;
inline constexpr double kBranchTime = 4.5;
inline constexpr double kBranchAngleDeg = 30.0;

Dataset gen_bifurcation(double density, std::size_t n_traj, double u, std::uint64_t seed);

// Exact position of a bifurcation trajectory at time t.
std::vector<double> bifurcation_state(double t, double u, bool upper);

struct OuParams {
    double theta = 1.0;
    double sigma = 0.5;
    double dt = 0.01;
    std::size_t n_traj = 100;
    std::size_t n_steps = 100;
    // Initial states are uniform on [-x0_range, x0_range].
    double x0_range = 3.0;
    std::uint64_t seed = 0;
};

// 1-D Ornstein–Uhlenbeck paths dx = -theta x dt + sigma dw, simulated with
// Euler–Maruyama at the given dt.
Dataset gen_ou(const OuParams& p);

// One tuple per consecutive pair. With history k > 1 the states are
// windows [x_j, x_{j-1}, ..., x_{j-k+1}] (newest first) and the first k-1
// samples of each trajectory only serve as history.
std::vector<TransitionTuple> to_transitions(const Dataset& ds, std::size_t history = 1);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Writes trajectories in the dataset file format, with optional
// "# key: value" comment lines before the header.
void write_trajectories(std::ostream& os, const std::vector<Trajectory>& trajectories,
                        const std::vector<std::pair<std::string, std::string>>& comments = {});

}  // namespace nsde
