#pragma once

// Evaluation of trained models: branch coverage on the bifurcation task,
// the component ablation, vector-field export and temporal
// super-resolution.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nsde/datasets.hpp"
#include "nsde/sde.hpp"

namespace nsde {

struct BranchReport {
    std::size_t n_traj = 0;
    double upper_fraction = 0.0;
    double lower_fraction = 0.0;
    double undecided_fraction = 0.0;
    double pre_branch_max_abs_y = 0.0;
    // Mean | |last segment velocity| - u | over trajectories.
    double mean_terminal_speed_error = 0.0;

    void write_csv(std::ostream& os) const;
};

// Trajectories are classified by their terminal y: upper above
// y_threshold, lower below -y_threshold, undecided otherwise.
BranchReport branch_metrics(std::span<const Trajectory> trajectories, double branch_time = kBranchTime,
                            double y_threshold = 0.5, double u = 1.0);

enum class AblationMode { flow_only, flow_diffusion, full };

const char* to_string(AblationMode m);
AblationMode parse_ablation_mode(const std::string& s);
inline constexpr AblationMode kAblationModes[] = {AblationMode::flow_only, AblationMode::flow_diffusion,
                                                  AblationMode::full};

struct SimParams {
    std::vector<double> x0;  // one frame; repeated to fill a history window
    std::size_t n_steps = 100;
    double dt = 0.1;
    std::size_t n_traj = 10;
    // Trajectory i uses noise seed `seed + i`.
    std::uint64_t seed = 0;
};

// Full history window whose frames all equal x0.
std::vector<double> initial_window(const SdeModel& model, std::span<const double> x0);

std::vector<Trajectory> simulate_many(const SdeModel& model, const SimParams& sim);

// The model as simulated under an ablation mode:
//   flow_only       sigma^2 pinned to the floor, no guidance
//   flow_diffusion  learned sigma^2, no guidance
//   full            learned sigma^2, the model's guidance (needs a denoiser)
SdeModel ablation_model(const SdeModel& model, AblationMode mode);

struct AblationResult {
    BranchReport report;
    std::vector<Trajectory> trajectories;
};

AblationResult run_ablation(const SdeModel& model, AblationMode mode, const SimParams& sim,
                            double branch_time = kBranchTime, double y_threshold = 0.5, double u = 1.0);

// Largest Euclidean distance between the terminal states of two trajectories.
double max_pairwise_terminal_distance(std::span<const Trajectory> trajectories);

struct GridSpec {
    double x_min = -1.0;
    double x_max = 10.0;
    double y_min = -3.5;
    double y_max = 3.5;
    std::size_t resolution = 21;  // points per axis
};

struct FieldRow {
    double x = 0.0, y = 0.0;
    double f1 = 0.0, f2 = 0.0;
    double s1 = 0.0, s2 = 0.0;  // sigma^2 per dimension
    bool has_score = false;
    double d1 = 0.0, d2 = 0.0;
};

// Row-major over y then x. Requires a 2-D model without history.
std::vector<FieldRow> export_vector_field(const SdeModel& model, const GridSpec& grid);
void write_vector_field(std::ostream& os, std::span<const FieldRow> rows);

struct SuperResReport {
    std::size_t refine = 1;
    std::size_t n_transitions = 0;
    std::vector<double> rms;  // per dimension
};

// For every observed transition, simulates `refine` steps of dt/refine from
// the observed state and compares the endpoint with the observed next
// state.
SuperResReport temporal_superresolution_check(const SdeModel& model, const Dataset& dataset, std::size_t refine,
                                              std::uint64_t seed);

}  // namespace nsde
