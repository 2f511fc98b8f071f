#include "qpt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qpt/bloch.hpp"
#include "qpt/partial.hpp"
#include "qpt/sampling.hpp"
#include "qpt/single_qubit.hpp"

namespace qpt::experiment {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// a fit counts as a low-loss outlier when it explains the data this well yet
// lands this far from the truth
constexpr double kOutlierLoss = 1e-3;
constexpr double kOutlierError = 1e-2;

const char* const kRelax1qObs[] = {"Z", "X"};
const char* const kRelax2qObs[] = {"IX", "IY", "IZ", "XI", "YI", "ZI",
                                   "XX", "YY", "ZZ"};

std::vector<Observable> observable_list(Pipeline pipeline) {
    std::vector<Observable> obs;
    if (pipeline == Pipeline::relax1q)
        for (const char* name : kRelax1qObs)
            obs.push_back(pauli_observable(name));
    if (pipeline == Pipeline::relax2q)
        for (const char* name : kRelax2qObs)
            obs.push_back(pauli_observable(name));
    return obs;
}

// the bloch-sphere probe used throughout the single-qubit plots
RVector single_probe_r() {
    RVector r(3);
    r << 0.565685, 0.424264, 0.707107;
    return r / r.norm();
}

RVector unit_z() {
    RVector m(3);
    m << 0.0, 0.0, 1.0;
    return m;
}

RVector unit_x() {
    RVector m(3);
    m << 1.0, 0.0, 0.0;
    return m;
}

RVector random_coefficients(std::uint64_t seed, int count) {
    Rng rng(seed);
    RVector h(count);
    for (int k = 0; k < count; ++k)
        h[k] = rng.normal();
    return h;
}

std::string trial_file(const std::string& dir, const std::string& stem, int trial,
                       const std::string& ext) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%03d", trial);
    return dir + "/" + stem + suffix + ext;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("experiment: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw InvalidArgument("experiment: cannot write " + path);
    out << text;
}

bool is_lattice(Pipeline pipeline) {
    return pipeline == Pipeline::lattice_uniform || pipeline == Pipeline::lattice_disorder;
}

// ---------------------------------------------------------------------------
// data generation shared by simulate and in-memory reconstruction
// ---------------------------------------------------------------------------

std::vector<double> schedule(const ExperimentConfig& cfg) {
    return time_schedule(cfg.dt, cfg.gamma, cfg.n_points);
}

std::vector<double> lattice_times(const ExperimentConfig& cfg) {
    std::vector<double> times;
    for (int k = 1; k <= cfg.time_points; ++k)
        times.push_back(cfg.dt * k);
    return times;
}

RVector single_truth(std::uint64_t trial_seed) { return random_coefficients(trial_seed, 3); }

Trajectory single_data(const ExperimentConfig& cfg, const RVector& h) {
    const std::vector<double> times = schedule(cfg);
    const RVector r = single_probe_r();
    const std::vector<double> zvals =
        single_qubit::projection_series(h, r, unit_z(), times);
    Trajectory traj;
    traj.n_qubits = 1;
    for (std::size_t q = 0; q < times.size(); ++q)
        traj.records.push_back({0, "Z", times[q], zvals[q]});
    traj.records.push_back(
        {0, "X", times[0], single_qubit::projection_value(h, r, unit_x(), times[0])});
    return traj;
}

StateVector relax_state(Pipeline pipeline, std::uint64_t trial_seed) {
    return random_state(pipeline == Pipeline::relax1q ? 1 : 2, derive_seed(trial_seed, 1));
}

RVector relax_truth(Pipeline pipeline, std::uint64_t trial_seed) {
    return random_coefficients(trial_seed, pipeline == Pipeline::relax1q ? 3 : 15);
}

Trajectory relax_data(const ExperimentConfig& cfg, std::uint64_t trial_seed,
                      const RVector& h) {
    const int n = cfg.pipeline == Pipeline::relax1q ? 1 : 2;
    return sample_trajectory(pauli_sum_from_coefficients(n, h),
                             {relax_state(cfg.pipeline, trial_seed)},
                             observable_list(cfg.pipeline), schedule(cfg));
}

partial::PartialSetup partial_setup(const ExperimentConfig& cfg, std::uint64_t trial_seed) {
    partial::PartialSetup setup;
    setup.states = {random_state(2, derive_seed(trial_seed, 101)),
                    random_state(2, derive_seed(trial_seed, 102))};
    setup.times = schedule(cfg);
    setup.restarts = cfg.restarts;
    return setup;
}

RVector partial_truth(std::uint64_t trial_seed) {
    return random_coefficients(derive_seed(trial_seed, 100), 15);
}

Trajectory partial_data(const ExperimentConfig& cfg, std::uint64_t trial_seed,
                        const RVector& h) {
    const partial::PartialSetup setup = partial_setup(cfg, trial_seed);
    return sample_trajectory(pauli_sum_from_coefficients(2, h), setup.states,
                             partial::measured_observables(), setup.times);
}

lattice::LatticeSpec lattice_truth(const ExperimentConfig& cfg, std::uint64_t trial_seed) {
    if (cfg.pipeline == Pipeline::lattice_uniform)
        return lattice::make_uniform_lattice(cfg.rows, cfg.cols, cfg.periodic,
                                             cfg.coupling, cfg.field);
    return lattice::make_disordered_lattice(cfg.rows, cfg.cols, cfg.periodic,
                                            derive_seed(trial_seed, 3));
}

StateVector lattice_state(const ExperimentConfig& cfg, std::uint64_t trial_seed) {
    return random_state(cfg.rows * cfg.cols, derive_seed(trial_seed, 1));
}

std::vector<RVector> lattice_reference(const ExperimentConfig& cfg,
                                       const lattice::LatticeSpec& truth,
                                       const StateVector& psi0) {
    return lattice::reference_distributions(lattice::lattice_hamiltonian(truth), psi0,
                                            cfg.dt, cfg.time_points);
}

// ---------------------------------------------------------------------------
// per-trial reconstruction
// ---------------------------------------------------------------------------

// data read back from a simulate directory; truth files are optional
struct TrialInput {
    bool loaded = false;
    Trajectory traj;
    report::BornSeries born;
    bool have_truth = false;
    RVector truth_coeffs;
    lattice::LatticeSpec truth_spec;
};

TrialInput load_trial_input(const ExperimentConfig& cfg, int trial) {
    TrialInput input;
    if (cfg.input_dir.empty())
        return input;
    input.loaded = true;
    if (is_lattice(cfg.pipeline)) {
        std::istringstream in(read_file(trial_file(cfg.input_dir, "reference", trial, ".csv")));
        input.born = report::read_born_csv(in);
        const std::string truth_path = trial_file(cfg.input_dir, "lattice", trial, ".json");
        if (std::filesystem::exists(truth_path)) {
            input.truth_spec = report::lattice_spec_from_json(read_file(truth_path));
            input.have_truth = true;
        }
        return input;
    }
    std::istringstream in(read_file(trial_file(cfg.input_dir, "trajectory", trial, ".csv")));
    input.traj = report::read_trajectory_csv(in);
    const std::string truth_path = trial_file(cfg.input_dir, "truth", trial, ".json");
    if (std::filesystem::exists(truth_path)) {
        input.truth_coeffs = pauli_sum_from_json(read_file(truth_path)).coefficient_vector();
        input.have_truth = true;
    }
    return input;
}

TrialResult single_trial(const ExperimentConfig& cfg, int trial, const TrialInput& input) {
    TrialResult result;
    result.trial = trial;
    result.seed = derive_seed(cfg.seed, trial);

    bool have_truth = true;
    RVector h = single_truth(result.seed);
    Trajectory traj;
    if (input.loaded) {
        traj = input.traj;
        have_truth = input.have_truth;
        if (have_truth)
            h = input.truth_coeffs;
    } else {
        traj = single_data(cfg, h);
    }

    std::vector<double> ztimes, zvals, xtimes, xvals;
    for (const TrajectoryRecord& rec : traj.records) {
        if (rec.observable == "Z") {
            ztimes.push_back(rec.time);
            zvals.push_back(rec.value);
        } else if (rec.observable == "X") {
            xtimes.push_back(rec.time);
            xvals.push_back(rec.value);
        } else {
            throw InvalidArgument("experiment: unexpected observable " + rec.observable +
                                  " in a single-qubit trajectory");
        }
    }
    if (xtimes.empty())
        throw InvalidArgument("experiment: the single pipeline needs an X record");

    const RVector r = single_probe_r();
    const single_qubit::Geometry geom = single_qubit::make_geometry(r, unit_z());
    single_qubit::Reconstruction rec = single_qubit::reconstruct(geom, ztimes, zvals);
    single_qubit::disambiguate(rec, r, unit_x(), xtimes, xvals);

    result.loss = std::max(rec.freq.rms_residual, rec.fit.rms_residual);
    result.parameters = rec.h;
    result.error = have_truth ? (rec.h - h).norm() / h.norm() : kInf;
    return result;
}

TrialResult relax_trial(const ExperimentConfig& cfg, int trial, const TrialInput& input) {
    TrialResult result;
    result.trial = trial;
    result.seed = derive_seed(cfg.seed, trial);

    const int n = cfg.pipeline == Pipeline::relax1q ? 1 : 2;
    bool have_truth = true;
    RVector h = relax_truth(cfg.pipeline, result.seed);
    Trajectory traj;
    if (input.loaded) {
        traj = input.traj;
        have_truth = input.have_truth;
        if (have_truth)
            h = input.truth_coeffs;
    } else {
        traj = relax_data(cfg, result.seed, h);
    }

    relax::RelaxOptions opt;
    opt.lr = cfg.lr;
    opt.lr_decay = cfg.lr_decay;
    opt.lr_decay_start = cfg.lr_decay_start;
    opt.epochs = cfg.epochs;
    opt.init_noise = cfg.init_noise;
    opt.restarts = cfg.restarts;
    opt.polish_iters = cfg.polish;
    opt.weights = cfg.weights;
    const StateVector psi0 = relax_state(cfg.pipeline, result.seed);
    const relax::RelaxResult fit =
        relax::optimize_relax(n == 1 ? relax::Mode::single_qubit : relax::Mode::two_qubit,
                              traj, psi0, cfg.dt, opt, derive_seed(result.seed, 2));
    result.loss = fit.loss;
    result.loss_history = fit.loss_history;

    try {
        result.parameters =
            relax::extract_hamiltonian(fit.params, cfg.dt).coefficient_vector();
    } catch (const InvalidRotation&) {
        // chain head too far off the rotation manifold; leave parameters empty
    }

    result.error = kInf;
    if (have_truth) {
        if (cfg.pipeline == Pipeline::relax1q) {
            if (result.parameters.size() == 3)
                result.error = (result.parameters - h).norm() / h.norm();
        } else {
            const RMatrix utrue =
                bloch_map(expm_hermitian(pauli_sum_from_coefficients(2, h), cfg.dt)).entries;
            const RMatrix urec = relax::u0_matrix(fit.params);
            result.error = (urec - utrue).norm() / utrue.norm();
        }
        result.outlier = result.error > kOutlierError && result.loss < kOutlierLoss;
    }
    return result;
}

TrialResult partial_trial(const ExperimentConfig& cfg, int trial, const TrialInput& input) {
    TrialResult result;
    result.trial = trial;
    result.seed = derive_seed(cfg.seed, trial);

    bool have_truth = true;
    RVector h = partial_truth(result.seed);
    const partial::PartialSetup setup = partial_setup(cfg, result.seed);
    Trajectory traj;
    if (input.loaded) {
        traj = input.traj;
        have_truth = input.have_truth;
        if (have_truth)
            h = input.truth_coeffs;
    } else {
        traj = partial_data(cfg, result.seed, h);
    }

    partial::PartialOptions opt;
    opt.lr = cfg.lr;
    opt.epochs = cfg.epochs;
    opt.fd_step = cfg.fd_step;
    const partial::PartialResult fit =
        partial::reconstruct_partial(traj, setup, opt, derive_seed(result.seed, 103));
    result.loss = fit.loss;
    result.loss_history = fit.loss_history;
    result.parameters = fit.coefficients;
    if (have_truth) {
        result.error = (fit.coefficients - h).cwiseAbs().maxCoeff();
        result.outlier = result.error > kOutlierError && result.loss < kOutlierLoss;
    } else {
        result.error = kInf;
    }
    return result;
}

TrialResult lattice_trial(const ExperimentConfig& cfg, int trial, const TrialInput& input) {
    TrialResult result;
    result.trial = trial;
    result.seed = derive_seed(cfg.seed, trial);

    bool have_truth = true;
    lattice::LatticeSpec truth = lattice_truth(cfg, result.seed);
    const StateVector psi0 = lattice_state(cfg, result.seed);
    std::vector<RVector> reference;
    if (input.loaded) {
        reference = input.born.distributions;
        const std::vector<double> expected = lattice_times(cfg);
        if (input.born.times.size() != expected.size())
            throw InvalidArgument("experiment: reference series length mismatch");
        for (std::size_t k = 0; k < expected.size(); ++k)
            if (std::abs(input.born.times[k] - expected[k]) > 1e-9 * expected[k])
                throw InvalidArgument("experiment: reference times do not match the config");
        have_truth = input.have_truth;
        if (have_truth)
            truth = input.truth_spec;
    } else {
        reference = lattice_reference(cfg, truth, psi0);
    }

    lattice::LatticeOptions opt;
    opt.lr = cfg.lr;
    opt.epochs = cfg.epochs;
    opt.fd_step = cfg.fd_step;
    opt.dt = cfg.dt;
    opt.time_points = cfg.time_points;
    opt.init_noise = cfg.init_noise;
    const lattice::LatticeResult fit =
        lattice::reconstruct_lattice(reference, psi0, truth, opt, derive_seed(result.seed, 2),
                                     have_truth ? &truth : nullptr);
    result.loss = fit.loss;
    result.loss_history = fit.loss_history;
    result.parameters = fit.params;
    result.error = kInf;
    if (have_truth) {
        const lattice::LatticeErrors err = lattice::relative_errors(truth, fit.params);
        result.error = std::max(err.coupling, err.field);
        result.floor = lattice::lattice_loss(lattice::pack_parameters(truth), truth, cfg.dt,
                                             psi0, reference);
        result.error_history.resize(fit.coupling_error_history.size());
        for (std::size_t e = 0; e < result.error_history.size(); ++e)
            result.error_history[e] =
                std::max(fit.coupling_error_history[e], fit.field_error_history[e]);
    }
    return result;
}

TrialResult run_trial(const ExperimentConfig& cfg, int trial) {
    const TrialInput input = load_trial_input(cfg, trial);
    switch (cfg.pipeline) {
        case Pipeline::single:
            return single_trial(cfg, trial, input);
        case Pipeline::relax1q:
        case Pipeline::relax2q:
            return relax_trial(cfg, trial, input);
        case Pipeline::partial:
            return partial_trial(cfg, trial, input);
        case Pipeline::lattice_uniform:
        case Pipeline::lattice_disorder:
            return lattice_trial(cfg, trial, input);
    }
    throw InvalidArgument("experiment: unknown pipeline");
}

// ---------------------------------------------------------------------------
// json plumbing
// ---------------------------------------------------------------------------

json config_json(const ExperimentConfig& cfg) {
    json j;
    j["pipeline"] = pipeline_name(cfg.pipeline);
    j["preset"] = cfg.preset;
    j["figure"] = cfg.figure;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["out"] = cfg.out_dir;
    j["input"] = cfg.input_dir;
    j["schedule"] = {{"dt", cfg.dt}, {"gamma", cfg.gamma}, {"points", cfg.n_points}};
    j["optimizer"] = {{"lr", cfg.lr},
                      {"epochs", cfg.epochs},
                      {"lr_decay", cfg.lr_decay},
                      {"lr_decay_start", cfg.lr_decay_start},
                      {"restarts", cfg.restarts},
                      {"polish", cfg.polish},
                      {"init_noise", cfg.init_noise},
                      {"fd_step", cfg.fd_step}};
    j["weights"] = {{"data", cfg.weights.data},
                    {"orth", cfg.weights.orth},
                    {"steps", cfg.weights.steps},
                    {"theta", cfg.weights.theta}};
    j["lattice"] = {{"rows", cfg.rows},
                    {"cols", cfg.cols},
                    {"periodic", cfg.periodic},
                    {"coupling", cfg.coupling},
                    {"field", {cfg.field[0], cfg.field[1], cfg.field[2]}},
                    {"time_points", cfg.time_points}};
    return j;
}

template <typename T>
void read_key(const json& block, const std::string& context, const std::string& key,
              T& target, std::vector<std::string>& seen) {
    seen.push_back(key);
    if (!block.contains(key))
        return;
    try {
        target = block.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument("experiment: config field " + context + key +
                              " has the wrong type");
    }
}

void reject_unknown(const json& block, const std::string& context,
                    const std::vector<std::string>& seen) {
    for (const auto& item : block.items())
        if (std::find(seen.begin(), seen.end(), item.key()) == seen.end())
            throw InvalidArgument("experiment: unknown config field " + context + item.key());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

}  // namespace

std::string pipeline_name(Pipeline pipeline) {
    switch (pipeline) {
        case Pipeline::single:
            return "single";
        case Pipeline::relax1q:
            return "relax1q";
        case Pipeline::relax2q:
            return "relax2q";
        case Pipeline::partial:
            return "partial";
        case Pipeline::lattice_uniform:
            return "lattice-uniform";
        case Pipeline::lattice_disorder:
            return "lattice-disorder";
    }
    throw InvalidArgument("experiment: unknown pipeline");
}

Pipeline pipeline_from_name(const std::string& name) {
    for (const Pipeline p : {Pipeline::single, Pipeline::relax1q, Pipeline::relax2q,
                             Pipeline::partial, Pipeline::lattice_uniform,
                             Pipeline::lattice_disorder})
        if (pipeline_name(p) == name)
            return p;
    throw InvalidArgument("experiment: unknown pipeline " + name);
}

std::vector<std::string> preset_names() {
    return {"fig5a-single",  "fig5b-relax1q", "fig5c-relax2q",
            "fig6-partial",  "fig7a-lattice", "fig7b-lattice-disorder"};
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "fig5a-single") {
        cfg.pipeline = Pipeline::single;
        cfg.figure = "5a";
        cfg.trials = 100;
        cfg.dt = 0.3;
        cfg.gamma = 1.3;
        cfg.n_points = 7;
        return cfg;
    }
    if (name == "fig5b-relax1q") {
        cfg.pipeline = Pipeline::relax1q;
        cfg.figure = "5b";
        cfg.trials = 20;
        cfg.dt = 0.1;
        cfg.gamma = 2.0;
        cfg.n_points = 4;
        cfg.lr = 0.01;
        cfg.epochs = 20000;
        cfg.lr_decay = 0.9986;
        cfg.lr_decay_start = 10000;
        cfg.restarts = 1;
        cfg.init_noise = 0.01;
        return cfg;
    }
    if (name == "fig5c-relax2q") {
        cfg.pipeline = Pipeline::relax2q;
        cfg.figure = "5c";
        cfg.trials = 20;
        cfg.dt = 0.05;
        cfg.gamma = 2.0;
        cfg.n_points = 6;
        cfg.lr = 0.01;
        cfg.epochs = 50000;
        cfg.lr_decay = 0.9986;
        cfg.lr_decay_start = 40000;
        cfg.restarts = 4;
        cfg.polish = 3000;
        cfg.init_noise = 0.05;
        cfg.weights.data = 10.0;
        return cfg;
    }
    if (name == "fig6-partial") {
        cfg.pipeline = Pipeline::partial;
        cfg.figure = "6";
        cfg.trials = 20;
        cfg.dt = 0.2;
        cfg.gamma = 1.15;
        cfg.n_points = 12;
        cfg.lr = 0.05;
        cfg.epochs = 3000;
        cfg.restarts = 10;
        cfg.fd_step = 1e-6;
        return cfg;
    }
    if (name == "fig7a-lattice" || name == "fig7b-lattice-disorder") {
        cfg.pipeline = name == "fig7a-lattice" ? Pipeline::lattice_uniform
                                               : Pipeline::lattice_disorder;
        cfg.figure = name == "fig7a-lattice" ? "7a" : "7b";
        cfg.trials = 10;
        cfg.dt = 0.2;
        cfg.time_points = 3;
        cfg.rows = 3;
        cfg.cols = 4;
        cfg.periodic = true;
        cfg.coupling = 1.0;
        cfg.field = {0.5, -0.8, 1.1};
        cfg.lr = 0.005;
        cfg.epochs = 500;
        cfg.fd_step = 1e-5;
        cfg.init_noise = 0.01;
        return cfg;
    }
    throw InvalidArgument("experiment: unknown preset " + name);
}

ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("experiment: config is not valid json: ") +
                              e.what());
    }
    if (!j.is_object())
        throw InvalidArgument("experiment: config must be a json object");

    std::vector<std::string> seen;
    std::string pipeline = pipeline_name(base.pipeline);
    read_key(j, "", "pipeline", pipeline, seen);
    base.pipeline = pipeline_from_name(pipeline);
    read_key(j, "", "preset", base.preset, seen);
    read_key(j, "", "figure", base.figure, seen);
    read_key(j, "", "trials", base.trials, seen);
    read_key(j, "", "seed", base.seed, seen);
    read_key(j, "", "jobs", base.jobs, seen);
    read_key(j, "", "out", base.out_dir, seen);
    read_key(j, "", "input", base.input_dir, seen);

    seen.push_back("schedule");
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        std::vector<std::string> inner;
        read_key(s, "schedule.", "dt", base.dt, inner);
        read_key(s, "schedule.", "gamma", base.gamma, inner);
        read_key(s, "schedule.", "points", base.n_points, inner);
        reject_unknown(s, "schedule.", inner);
    }
    seen.push_back("optimizer");
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        std::vector<std::string> inner;
        read_key(o, "optimizer.", "lr", base.lr, inner);
        read_key(o, "optimizer.", "epochs", base.epochs, inner);
        read_key(o, "optimizer.", "lr_decay", base.lr_decay, inner);
        read_key(o, "optimizer.", "lr_decay_start", base.lr_decay_start, inner);
        read_key(o, "optimizer.", "restarts", base.restarts, inner);
        read_key(o, "optimizer.", "polish", base.polish, inner);
        read_key(o, "optimizer.", "init_noise", base.init_noise, inner);
        read_key(o, "optimizer.", "fd_step", base.fd_step, inner);
        reject_unknown(o, "optimizer.", inner);
    }
    seen.push_back("weights");
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        std::vector<std::string> inner;
        read_key(w, "weights.", "data", base.weights.data, inner);
        read_key(w, "weights.", "orth", base.weights.orth, inner);
        read_key(w, "weights.", "steps", base.weights.steps, inner);
        read_key(w, "weights.", "theta", base.weights.theta, inner);
        reject_unknown(w, "weights.", inner);
    }
    seen.push_back("lattice");
    if (j.contains("lattice")) {
        const json& l = j.at("lattice");
        std::vector<std::string> inner;
        read_key(l, "lattice.", "rows", base.rows, inner);
        read_key(l, "lattice.", "cols", base.cols, inner);
        read_key(l, "lattice.", "periodic", base.periodic, inner);
        read_key(l, "lattice.", "coupling", base.coupling, inner);
        inner.push_back("field");
        if (l.contains("field")) {
            const json& f = l.at("field");
            if (!f.is_array() || f.size() != 3)
                throw InvalidArgument(
                    "experiment: config field lattice.field needs 3 components");
            for (int a = 0; a < 3; ++a)
                base.field[a] = f[a].get<double>();
        }
        read_key(l, "lattice.", "time_points", base.time_points, inner);
        reject_unknown(l, "lattice.", inner);
    }
    reject_unknown(j, "", seen);

    if (base.trials < 1)
        throw InvalidArgument("experiment: config field trials must be positive");
    if (base.jobs < 0)
        throw InvalidArgument("experiment: config field jobs cannot be negative");
    if (!(base.dt > 0.0))
        throw InvalidArgument("experiment: config field schedule.dt must be positive");
    if (base.n_points < 1)
        throw InvalidArgument("experiment: config field schedule.points must be positive");
    return base;
}

std::string config_to_json(const ExperimentConfig& config) {
    return config_json(config).dump(2);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    if (config.trials < 1)
        throw InvalidArgument("experiment: need at least one trial");

    ExperimentReport rep;
    rep.config = config;
    rep.trials.resize(config.trials);

    unsigned jobs = config.jobs > 0 ? static_cast<unsigned>(config.jobs)
                                    : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(config.trials));

    std::vector<std::exception_ptr> failures(config.trials);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next.fetch_add(1); t < config.trials; t = next.fetch_add(1)) {
            try {
                rep.trials[t] = run_trial(config, t);
            } catch (...) {
                failures[t] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w)
            pool.emplace_back(worker);
        for (std::thread& th : pool)
            th.join();
    }
    for (const std::exception_ptr& failure : failures)
        if (failure)
            std::rethrow_exception(failure);

    std::vector<double> losses, errors;
    std::vector<std::vector<double>> loss_histories, error_histories;
    for (const TrialResult& trial : rep.trials) {
        losses.push_back(trial.loss);
        errors.push_back(trial.error);
        loss_histories.push_back(trial.loss_history);
        if (!trial.error_history.empty())
            error_histories.push_back(trial.error_history);
    }
    rep.median_loss = report::median(losses);
    rep.median_error = report::median(errors);
    rep.loss_curves = report::aggregate_histories(loss_histories);
    if (!error_histories.empty())
        rep.error_curves = report::aggregate_histories(error_histories);
    return rep;
}

std::string report_to_json(const ExperimentReport& rep) {
    json j;
    j["config"] = config_json(rep.config);
    j["trials"] = json::array();
    for (const TrialResult& trial : rep.trials) {
        json t;
        t["trial"] = trial.trial;
        t["seed"] = trial.seed;
        t["loss"] = trial.loss;
        t["error"] = number_or_null(trial.error);
        t["outlier"] = trial.outlier;
        if (is_lattice(rep.config.pipeline))
            t["floor"] = trial.floor;
        t["parameters"] = std::vector<double>(
            trial.parameters.data(), trial.parameters.data() + trial.parameters.size());
        t["loss_history"] = trial.loss_history;
        if (!trial.error_history.empty())
            t["error_history"] = trial.error_history;
        j["trials"].push_back(std::move(t));
    }
    json agg;
    agg["median_loss"] = rep.median_loss;
    agg["median_error"] = number_or_null(rep.median_error);
    agg["loss_median"] = rep.loss_curves.median;
    agg["loss_q25"] = rep.loss_curves.q25;
    agg["loss_q75"] = rep.loss_curves.q75;
    if (!rep.error_curves.median.empty()) {
        agg["error_median"] = rep.error_curves.median;
        agg["error_q25"] = rep.error_curves.q25;
        agg["error_q75"] = rep.error_curves.q75;
    }
    json outliers = json::array();
    for (const TrialResult& trial : rep.trials)
        if (trial.outlier)
            outliers.push_back(trial.trial);
    agg["outliers"] = std::move(outliers);
    j["aggregate"] = std::move(agg);
    return j.dump(2);
}

void simulate_to_dir(const ExperimentConfig& config, const std::string& dir) {
    if (config.trials < 1)
        throw InvalidArgument("experiment: need at least one trial");
    std::filesystem::create_directories(dir);

    for (int t = 0; t < config.trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(config.seed, t);
        if (is_lattice(config.pipeline)) {
            const lattice::LatticeSpec truth = lattice_truth(config, trial_seed);
            const StateVector psi0 = lattice_state(config, trial_seed);
            const std::vector<RVector> reference = lattice_reference(config, truth, psi0);
            std::ostringstream csv;
            report::write_born_csv(csv, lattice_times(config), reference);
            write_file(trial_file(dir, "reference", t, ".csv"), csv.str());
            write_file(trial_file(dir, "lattice", t, ".json"),
                       report::lattice_spec_to_json(truth));
            continue;
        }
        Trajectory traj;
        RVector h;
        int n_qubits = 1;
        switch (config.pipeline) {
            case Pipeline::single:
                h = single_truth(trial_seed);
                traj = single_data(config, h);
                break;
            case Pipeline::relax1q:
            case Pipeline::relax2q:
                h = relax_truth(config.pipeline, trial_seed);
                n_qubits = config.pipeline == Pipeline::relax1q ? 1 : 2;
                traj = relax_data(config, trial_seed, h);
                break;
            case Pipeline::partial:
                h = partial_truth(trial_seed);
                n_qubits = 2;
                traj = partial_data(config, trial_seed, h);
                break;
            default:
                throw InvalidArgument("experiment: unknown pipeline");
        }
        std::ostringstream csv;
        report::write_trajectory_csv(csv, traj);
        write_file(trial_file(dir, "trajectory", t, ".csv"), csv.str());
        write_file(trial_file(dir, "truth", t, ".json"),
                   pauli_sum_to_json(pauli_sum_from_coefficients(n_qubits, h)));
    }

    json meta;
    meta["config"] = config_json(config);
    write_file(dir + "/meta.json", meta.dump(2));
}

AggregateCurves aggregate_reports(const std::vector<std::string>& report_texts) {
    if (report_texts.empty())
        throw InvalidArgument("experiment: no reports to aggregate");
    std::vector<std::vector<double>> loss_histories, error_histories;
    for (const std::string& text : report_texts) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw InvalidArgument(std::string("experiment: report is not valid json: ") +
                                  e.what());
        }
        if (!j.contains("trials") || !j.at("trials").is_array())
            throw InvalidArgument("experiment: report has no trials array");
        for (const json& trial : j.at("trials")) {
            if (!trial.contains("loss_history"))
                throw InvalidArgument("experiment: report trial has no loss history");
            loss_histories.push_back(trial.at("loss_history").get<std::vector<double>>());
            if (trial.contains("error_history"))
                error_histories.push_back(
                    trial.at("error_history").get<std::vector<double>>());
        }
    }
    AggregateCurves curves;
    curves.loss = report::aggregate_histories(loss_histories);
    if (!error_histories.empty())
        curves.error = report::aggregate_histories(error_histories);
    return curves;
}

}  // namespace qpt::experiment
