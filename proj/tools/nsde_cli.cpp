// nsde: generate data, train, sample and evaluate neural SDE models.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nsde/checkpoint.hpp"
#include "nsde/datasets.hpp"
#include "nsde/eval.hpp"
#include "nsde/text_io.hpp"
#include "nsde/training.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace nsde;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kDiverged = 3 };

// Thrown for invalid flag combinations detected after parsing.
struct UsageError : Error {
    using Error::Error;
};

// Options that only choose where outputs go; left out of provenance so
// that reruns into another directory produce identical files.
const std::set<std::string> kOutputOptions{"out", "out-dir", "log", "svg", "config"};

using Provenance = std::map<std::string, std::string>;

Provenance provenance_of(const CLI::App& sub, const std::string& command) {
    std::istringstream lines(sub.config_to_str(true, false));
    std::string line, joined;
    while (std::getline(lines, line)) {
        if (line.empty() || line.front() == '[' || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        if (kOutputOptions.count(key)) continue;
        if (!joined.empty()) joined += "; ";
        joined += line;
    }
    return {{"command", command}, {"config", joined}};
}

std::vector<std::pair<std::string, std::string>> comments(const Provenance& p) { return {p.begin(), p.end()}; }

fs::path output_path(const std::string& out_dir, const std::string& explicit_path, const std::string& name) {
    fs::path p = explicit_path.empty() ? fs::path(out_dir) / name : fs::path(explicit_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write '" + p.string() + "'");
    return os;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
    std::vector<std::size_t> dims;
    if (s.empty() || s == "none") return dims;
    for (auto field : split(s, ',')) {
        const auto v = parse_int(field, 0);
        if (v <= 0) throw UsageError("hidden layer widths must be positive");
        dims.push_back(static_cast<std::size_t>(v));
    }
    return dims;
}

void print_report(std::ostream& os, const std::string& name, const BranchReport& r) {
    os << name << ": n_traj=" << r.n_traj << " upper=" << r.upper_fraction << " lower=" << r.lower_fraction
       << " undecided=" << r.undecided_fraction << " pre_branch_max_abs_y=" << r.pre_branch_max_abs_y
       << " mean_terminal_speed_error=" << r.mean_terminal_speed_error << '\n';
}

void write_report(const fs::path& p, const BranchReport& r, const Provenance& prov) {
    auto os = open_out(p);
    write_comment_lines(os, comments(prov));
    r.write_csv(os);
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
    std::string generator;
    std::uint64_t seed = 0;
    double density = 1.0;
    std::size_t n_traj = 0;
    double speed = 1.0;
    double theta = 1.0;
    double sigma = 0.5;
    double dt = 0.01;
    std::size_t n_steps = 100;
    double x0_range = 3.0;
    std::string out;
};

void add_gen_data(CLI::App& app, GenArgs& a) {
    app.add_option("generator", a.generator, "bifurcation or ou")
        ->required()
        ->check(CLI::IsMember({"bifurcation", "ou"}));
    app.add_option("--seed", a.seed, "random seed")->required();
    app.add_option("--density", a.density, "bifurcation: samples per unit time")->check(CLI::PositiveNumber);
    app.add_option("--n-traj", a.n_traj, "number of trajectories (bifurcation 10, ou 100)")
        ->check(CLI::PositiveNumber);
    app.add_option("--speed", a.speed, "bifurcation: speed u")->check(CLI::PositiveNumber);
    app.add_option("--theta", a.theta, "ou: mean-reversion rate")->check(CLI::PositiveNumber);
    app.add_option("--sigma", a.sigma, "ou: diffusion coefficient")->check(CLI::NonNegativeNumber);
    app.add_option("--dt", a.dt, "ou: time step")->check(CLI::PositiveNumber);
    app.add_option("--n-steps", a.n_steps, "ou: steps per trajectory")->check(CLI::PositiveNumber);
    app.add_option("--x0-range", a.x0_range, "ou: initial states uniform on [-r, r]")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--out", a.out, "trajectory file (default <out-dir>/<generator>.csv)");
}

int run_gen_data(const CLI::App& sub, const GenArgs& a, const std::string& out_dir) {
    Dataset ds;
    if (a.generator == "bifurcation") {
        ds = gen_bifurcation(a.density, a.n_traj ? a.n_traj : 10, a.speed, a.seed);
    } else {
        OuParams p;
        p.theta = a.theta;
        p.sigma = a.sigma;
        p.dt = a.dt;
        p.n_traj = a.n_traj ? a.n_traj : 100;
        p.n_steps = a.n_steps;
        p.x0_range = a.x0_range;
        p.seed = a.seed;
        ds = gen_ou(p);
    }
    ds.meta.provenance = provenance_of(sub, "nsde gen-data " + a.generator);
    const fs::path path = output_path(out_dir, a.out, a.generator + ".csv");
    save_dataset(ds, path);
    std::cout << "wrote " << path.string() << ": " << ds.trajectories.size() << " trajectories, "
              << ds.transition_count() << " transitions\n";
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::uint64_t seed = 0;
    TrainConfig config;
    double lr = 1e-3;
    std::string optimizer = "adam";
    double sigma_inject = -1.0;
    bool no_interpolation = false;
    bool no_denoiser = false;
    std::string hidden = "64,64";
    std::string activation = "tanh";
    std::string alpha_mode = "constant";
    double alpha = 0.1;
    std::string out;
    std::string log;
};

void add_train(CLI::App& app, TrainArgs& a) {
    TrainConfig& c = a.config;
    app.add_option("--data", a.data, "trajectory file")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", a.seed, "random seed")->required();
    app.add_option("--iterations", c.iterations, "optimizer iterations");
    app.add_option("--batch-size", c.batch_size, "transitions per mini-batch")->check(CLI::PositiveNumber);
    app.add_option("--lr", a.lr, "learning rate of all networks");
    app.add_option("--lr-flow", c.lr_flow, "flow learning rate (overrides --lr)");
    app.add_option("--lr-diffusion", c.lr_diffusion, "diffusion learning rate (overrides --lr)");
    app.add_option("--lr-denoiser", c.lr_denoiser, "denoiser learning rate (overrides --lr)");
    app.add_option("--optimizer", a.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    app.add_option("--beta1", c.optimizer.beta1, "Adam beta1");
    app.add_option("--beta2", c.optimizer.beta2, "Adam beta2");
    app.add_option("--adam-eps", c.optimizer.epsilon, "Adam epsilon");
    app.add_option("--delta", c.delta, "flow-loss desingularization constant")->check(CLI::NonNegativeNumber);
    app.add_option("--sigma-inject", a.sigma_inject, "noise-injection std (default 0.01 x data std)");
    app.add_option("--sigma-dsm", c.sigma_dsm, "denoising score matching noise std")->check(CLI::PositiveNumber);
    app.add_flag("--no-interpolation", a.no_interpolation, "train on observed states only");
    app.add_flag("--no-denoiser", a.no_denoiser, "do not train a denoiser");
    app.add_option("--history", c.history, "frames per state window")->check(CLI::PositiveNumber);
    app.add_option("--checkpoint-interval", c.checkpoint_interval, "write a checkpoint every N iterations (0: off)");
    app.add_option("--hidden", a.hidden, "hidden widths, e.g. 64,64 or none");
    app.add_option("--activation", a.activation, "tanh or softplus")->check(CLI::IsMember({"tanh", "softplus"}));
    app.add_option("--sigma2-min", c.sigma2_min, "floor of the predicted sigma^2")->check(CLI::NonNegativeNumber);
    app.add_option("--alpha-mode", a.alpha_mode, "guidance stored in the model: none, constant, half_gg")
        ->check(CLI::IsMember({"none", "constant", "half_gg"}));
    app.add_option("--alpha", a.alpha, "guidance weight for --alpha-mode constant")->check(CLI::NonNegativeNumber);
    app.add_option("--out", a.out, "checkpoint file (default <out-dir>/model.json)");
    app.add_option("--log", a.log, "training log (default <out-dir>/train_log.csv)");
}

int run_train(const CLI::App& sub, TrainArgs& a, const std::string& out_dir) {
    TrainConfig c = a.config;
    c.seed = a.seed;
    if (!sub.count("--lr-flow")) c.lr_flow = a.lr;
    if (!sub.count("--lr-diffusion")) c.lr_diffusion = a.lr;
    if (!sub.count("--lr-denoiser")) c.lr_denoiser = a.lr;
    c.optimizer.kind = parse_optimizer(a.optimizer);
    if (a.sigma_inject >= 0.0) c.sigma_inject = a.sigma_inject;
    c.interpolate = !a.no_interpolation;
    c.denoiser = !a.no_denoiser;
    c.hidden = parse_hidden(a.hidden);
    c.activation = parse_activation(a.activation);
    const AlphaMode mode = parse_alpha_mode(a.alpha_mode);
    c.guidance = mode == AlphaMode::constant ? Guidance::constant(a.alpha)
                 : mode == AlphaMode::half_gg ? Guidance::half_gg()
                                              : Guidance::off();
    if (!c.denoiser && sub.count("--alpha-mode") && mode != AlphaMode::none) {
        throw UsageError("--alpha-mode " + a.alpha_mode + " needs a denoiser (drop --no-denoiser)");
    }
    c.validate();

    const Dataset ds = load_dataset(a.data);
    const Provenance prov = provenance_of(sub, "nsde train");
    CheckpointInfo info;
    const Trajectory& first = ds.trajectories.front();
    if (first.size() >= 2) info.dt = first.times[1] - first.times[0];
    info.n_steps = first.size() - 1;
    info.x0 = first.states.front();
    info.provenance = prov;

    const fs::path ckpt = output_path(out_dir, a.out, "model.json");
    const fs::path log_path = output_path(out_dir, a.log, "train_log.csv");
    auto on_checkpoint = [&](std::size_t it, const SdeModel& m) {
        fs::path p = ckpt;
        p.replace_filename(ckpt.stem().string() + ".iter" + std::to_string(it) + ckpt.extension().string());
        save_checkpoint(m, p, info);
    };

    TrainResult result;
    try {
        result = train(ds, c, on_checkpoint);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDiverged;
    }
    save_checkpoint(result.model, ckpt, info);
    {
        auto os = open_out(log_path);
        write_comment_lines(os, comments(prov));
        result.log.write_csv(os);
    }

    const auto transitions = to_transitions(ds, c.history);
    NoiseSource noise(c.seed);
    const LossReport r = evaluate_losses(result.model, make_batch(transitions, ds.dim), c.sigma_dsm, noise,
                                         c.validation_delta);
    std::cout << "wrote " << ckpt.string() << " and " << log_path.string() << '\n'
              << "final losses over " << transitions.size() << " transitions:\n"
              << "  flow_loss " << format_double(r.flow_loss) << '\n'
              << "  diffusion_loss " << format_double(r.diffusion_loss) << '\n'
              << "  dsm_loss " << (r.dsm_loss ? format_double(*r.dsm_loss) : std::string("-")) << '\n'
              << "  nll " << format_double(r.nll) << '\n'
              << "  reduced_validation_loss " << format_double(r.reduced_validation_loss) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- sample / eval shared

struct SimArgs {
    std::string checkpoint;
    std::uint64_t seed = 0;
    std::size_t n_traj = 10;
    std::vector<double> x0;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::string alpha_mode;
    double alpha = 0.0;
};

void add_sim_options(CLI::App& app, SimArgs& a, std::size_t default_n_traj, bool seed_required) {
    a.n_traj = default_n_traj;
    app.add_option("--seed", a.seed, "random seed (trajectory i uses seed + i)")->required(seed_required);
    app.add_option("--n-traj", a.n_traj, "number of simulated trajectories")->check(CLI::PositiveNumber);
    app.add_option("--x0", a.x0, "initial state, comma separated (default: from the checkpoint)")->delimiter(',');
    app.add_option("--dt", a.dt, "step size (default: from the checkpoint)")->check(CLI::PositiveNumber);
    app.add_option("--n-steps", a.n_steps, "number of steps (default: from the checkpoint)")
        ->check(CLI::PositiveNumber);
    app.add_option("--alpha-mode", a.alpha_mode, "guidance override: none, constant, half_gg")
        ->check(CLI::IsMember({"none", "constant", "half_gg"}));
    app.add_option("--alpha", a.alpha, "guidance weight (alone: 0 disables guidance)")
        ->check(CLI::NonNegativeNumber);
}

struct Loaded {
    SdeModel model;
    SimParams sim;
};

Loaded load_for_simulation(const CLI::App& sub, const SimArgs& a) {
    CheckpointInfo info;
    Loaded l;
    l.model = load_checkpoint(a.checkpoint, &info);
    if (sub.count("--alpha-mode")) {
        const AlphaMode mode = parse_alpha_mode(a.alpha_mode);
        const double alpha = sub.count("--alpha") ? a.alpha : l.model.guidance.alpha;
        l.model.guidance = {mode, mode == AlphaMode::constant ? alpha : 0.0};
    } else if (sub.count("--alpha")) {
        l.model.guidance = a.alpha == 0.0 ? Guidance::off() : Guidance::constant(a.alpha);
    }
    try {
        l.model.validate();
    } catch (const Error& e) {
        throw UsageError(std::string("checkpoint does not support the requested guidance: ") + e.what());
    }
    l.sim.seed = a.seed;
    l.sim.n_traj = a.n_traj;
    l.sim.x0 = a.x0.empty() ? info.x0 : a.x0;
    l.sim.dt = sub.count("--dt") ? a.dt : info.dt.value_or(0.0);
    l.sim.n_steps = sub.count("--n-steps") ? a.n_steps : info.n_steps.value_or(0);
    if (l.sim.x0.empty()) throw UsageError("no initial state: pass --x0");
    if (!(l.sim.dt > 0.0)) throw UsageError("no step size: pass --dt");
    if (l.sim.n_steps == 0) throw UsageError("no step count: pass --n-steps");
    return l;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
    SimArgs sim;
    std::size_t refine = 1;
    std::string out;
    std::string svg;
};

void add_sample(CLI::App& app, SampleArgs& a) {
    app.add_option("--checkpoint", a.sim.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
    add_sim_options(app, a.sim, 10, true);
    app.add_option("--refine", a.refine, "substeps per step (temporal super-resolution)")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", a.out, "trajectory file (default <out-dir>/samples.csv)");
    app.add_option("--svg", a.svg, "also plot the trajectories (default <out-dir>/samples.svg)")->expected(0, 1);
}

int run_sample(const CLI::App& sub, const SampleArgs& a, const std::string& out_dir) {
    Loaded l = load_for_simulation(sub, a.sim);
    l.sim.dt /= static_cast<double>(a.refine);
    l.sim.n_steps *= a.refine;
    const auto trajectories = simulate_many(l.model, l.sim);
    const Provenance prov = provenance_of(sub, "nsde sample");
    const fs::path path = output_path(out_dir, a.out, "samples.csv");
    {
        auto os = open_out(path);
        write_trajectories(os, trajectories, comments(prov));
    }
    std::cout << "wrote " << path.string() << ": " << trajectories.size() << " trajectories of "
              << trajectories.front().size() << " points\n";
    if (sub.count("--svg")) {
        const fs::path svg = output_path(out_dir, a.svg, "samples.svg");
        auto os = open_out(svg);
        tools::write_svg(os, trajectories, "nsde sample (" + prov.at("config") + ")");
        std::cout << "wrote " << svg.string() << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    SimArgs sim;
    std::string ablate;
    bool vector_field = false;
    std::size_t res = 21;
    std::vector<double> x_range{-1.0, 10.0};
    std::vector<double> y_range{-3.5, 3.5};
    bool branches = false;
    std::string data;
    std::size_t superres = 0;
    double branch_time = kBranchTime;
    double y_threshold = 0.5;
    double speed = 1.0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
    app.add_option("--checkpoint", a.sim.checkpoint, "model checkpoint")->check(CLI::ExistingFile);
    add_sim_options(app, a.sim, 200, false);
    app.add_option("--ablate", a.ablate, "flow_only, flow_diffusion, full or all")
        ->check(CLI::IsMember({"flow_only", "flow_diffusion", "full", "all"}));
    app.add_flag("--vector-field", a.vector_field, "export the learned fields on a grid");
    app.add_option("--res", a.res, "grid points per axis")->check(CLI::PositiveNumber);
    app.add_option("--x-range", a.x_range, "grid x range lo,hi")->delimiter(',')->expected(2);
    app.add_option("--y-range", a.y_range, "grid y range lo,hi")->delimiter(',')->expected(2);
    app.add_flag("--branches", a.branches, "branch metrics of --data, or of model samples");
    app.add_option("--data", a.data, "trajectory file")->check(CLI::ExistingFile);
    app.add_option("--superres", a.superres, "temporal super-resolution check with this refine factor on --data")
        ->check(CLI::PositiveNumber);
    app.add_option("--branch-time", a.branch_time, "branch time");
    app.add_option("--y-threshold", a.y_threshold, "branch classification threshold")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--speed", a.speed, "ground-truth speed for the terminal speed error");
}

int run_eval(const CLI::App& sub, const EvalArgs& a, const std::string& out_dir) {
    const bool ablate = !a.ablate.empty();
    if (!ablate && !a.vector_field && !a.branches && a.superres == 0) {
        throw UsageError("nothing to evaluate: pass --ablate, --vector-field, --branches or --superres");
    }
    const bool needs_model = ablate || a.vector_field || a.superres > 0 || (a.branches && a.data.empty());
    if (needs_model && a.sim.checkpoint.empty()) throw UsageError("--checkpoint is required for this evaluation");
    if (a.superres > 0 && a.data.empty()) throw UsageError("--superres needs --data");
    const Provenance prov = provenance_of(sub, "nsde eval");
    fs::create_directories(out_dir);

    std::optional<Loaded> l;
    if (needs_model) l = load_for_simulation(sub, a.sim);

    if (ablate) {
        std::vector<AblationMode> modes;
        if (a.ablate == "all") modes.assign(std::begin(kAblationModes), std::end(kAblationModes));
        else modes.push_back(parse_ablation_mode(a.ablate));
        for (AblationMode m : modes) {
            const auto r = run_ablation(l->model, m, l->sim, a.branch_time, a.y_threshold, a.speed);
            const fs::path p = fs::path(out_dir) / (std::string("ablation_") + to_string(m) + ".csv");
            write_report(p, r.report, prov);
            print_report(std::cout, to_string(m), r.report);
            std::cout << "  max_pairwise_terminal_distance=" << max_pairwise_terminal_distance(r.trajectories)
                      << "\n  wrote " << p.string() << '\n';
        }
    }
    if (a.vector_field) {
        const GridSpec grid{a.x_range[0], a.x_range[1], a.y_range[0], a.y_range[1], a.res};
        const auto rows = export_vector_field(l->model, grid);
        const fs::path p = fs::path(out_dir) / "vector_field.csv";
        auto os = open_out(p);
        write_comment_lines(os, comments(prov));
        write_vector_field(os, rows);
        std::cout << "wrote " << p.string() << ": " << rows.size() << " rows\n";
    }
    if (a.branches) {
        std::vector<Trajectory> trajs;
        if (!a.data.empty()) trajs = load_dataset(a.data).trajectories;
        else trajs = simulate_many(l->model, l->sim);
        const BranchReport r = branch_metrics(trajs, a.branch_time, a.y_threshold, a.speed);
        const fs::path p = fs::path(out_dir) / "branches.csv";
        write_report(p, r, prov);
        print_report(std::cout, "branches", r);
        std::cout << "  wrote " << p.string() << '\n';
    }
    if (a.superres > 0) {
        const Dataset ds = load_dataset(a.data);
        const fs::path p = fs::path(out_dir) / "superres.csv";
        auto os = open_out(p);
        write_comment_lines(os, comments(prov));
        os << "refine,n_transitions";
        for (std::size_t i = 1; i <= ds.dim; ++i) os << ",rms_x" << i;
        os << '\n';
        for (std::size_t m : {std::size_t{1}, a.superres}) {
            const SuperResReport r = temporal_superresolution_check(l->model, ds, m, a.sim.seed);
            os << r.refine << ',' << r.n_transitions;
            std::cout << "superres refine=" << r.refine << " rms=";
            for (double v : r.rms) {
                os << ',' << format_double(v);
                std::cout << v << ' ';
            }
            os << '\n';
            std::cout << '\n';
        }
        std::cout << "  wrote " << p.string() << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- grad-check

struct GradArgs {
    std::uint64_t seed = 0;
    std::size_t points = 20;
    double tolerance = 1e-4;
    double h = 1e-5;
};

void add_grad_check(CLI::App& app, GradArgs& a) {
    app.add_option("--seed", a.seed, "random seed");
    app.add_option("--points", a.points, "random (parameters, batch) draws per loss")->check(CLI::PositiveNumber);
    app.add_option("--tolerance", a.tolerance, "largest accepted relative error (exclusive)");
    app.add_option("--fd-step", a.h, "central-difference step")->check(CLI::PositiveNumber);
}

int run_grad_check(const GradArgs& a) {
    bool ok = true;
    for (const auto& c : check_loss_gradients(a.seed, a.points, a.h)) {
        const bool pass = c.max_error < a.tolerance;
        ok = ok && pass;
        std::cout << c.loss << ": points=" << c.points << " max_rel_error=" << c.max_error
                  << (pass ? " PASS" : " FAIL") << '\n';
    }
    std::cout << (ok ? "all gradients within tolerance " : "gradient check failed at tolerance ") << a.tolerance
              << '\n';
    return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural SDE toolkit: generate trajectory data, train drift/diffusion/denoiser networks, "
                 "sample and evaluate."};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML config file; command-line flags override its values");
    std::string out_dir = ".";
    app.add_option("--out-dir", out_dir, "default output directory")->envname("NSDE_OUT_DIR");
    app.require_subcommand(1);
    app.fallthrough();
    app.failure_message(CLI::FailureMessage::help);

    GenArgs gen;
    TrainArgs train_args;
    SampleArgs sample;
    EvalArgs eval;
    GradArgs grad;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a synthetic trajectory dataset");
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a trajectory file");
    CLI::App* sample_cmd = app.add_subcommand("sample", "simulate trajectories from a checkpoint");
    CLI::App* eval_cmd = app.add_subcommand("eval", "branch metrics, ablations, vector fields, super-resolution");
    CLI::App* grad_cmd = app.add_subcommand("grad-check", "finite-difference check of all loss gradients");
    add_gen_data(*gen_cmd, gen);
    add_train(*train_cmd, train_args);
    add_sample(*sample_cmd, sample);
    add_eval(*eval_cmd, eval);
    add_grad_check(*grad_cmd, grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return run_gen_data(*gen_cmd, gen, out_dir);
        if (*train_cmd) return run_train(*train_cmd, train_args, out_dir);
        if (*sample_cmd) return run_sample(*sample_cmd, sample, out_dir);
        if (*eval_cmd) return run_eval(*eval_cmd, eval, out_dir);
        if (*grad_cmd) return run_grad_check(grad);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kUsage;
}
