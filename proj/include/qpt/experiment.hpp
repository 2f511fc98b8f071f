#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpt/core.hpp"
#include "qpt/lattice.hpp"
#include "qpt/relax.hpp"
#include "qpt/report.hpp"

namespace qpt::experiment {

enum class Pipeline { single, relax1q, relax2q, partial, lattice_uniform, lattice_disorder };

std::string pipeline_name(Pipeline pipeline);
Pipeline pipeline_from_name(const std::string& name);

// One fully resolved run. Presets fill every field; a json config and then
// command-line flags overlay on top, and the result is echoed into the report
// so a run can be reproduced from its output alone.
struct ExperimentConfig {
    Pipeline pipeline = Pipeline::single;
    std::string preset;     // preset this run started from, if any
    std::string figure;     // the plot this run mirrors, e.g. "5b"
    int trials = 1;
    std::uint64_t seed = 0;
    int jobs = 0;           // worker threads; 0 means one per core
    std::string out_dir;    // artifacts land here when nonempty
    std::string input_dir;  // nonempty: consume simulate outputs instead of
                            // regenerating data in memory

    // measurement schedule t_q = dt * gamma^q (relax pipelines use gamma = 2)
    double dt = 0.1;
    double gamma = 2.0;
    int n_points = 4;

    // descent stage; lattice pipelines read lr/epochs and ignore the rest
    double lr = 0.01;
    int epochs = 5000;
    double lr_decay = 1.0;
    int lr_decay_start = 0;
    int restarts = 1;
    int polish = 0;  // BFGS refinement steps after the descent stage
    double init_noise = 0.01;
    double fd_step = 1e-6;
    relax::RelaxWeights weights;

    // lattice block
    int rows = 3;
    int cols = 4;
    bool periodic = true;
    double coupling = 1.0;
    Eigen::Vector3d field{0.5, -0.8, 1.1};
    int time_points = 3;
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Overlays the fields present in the json text onto `base`. Unknown keys and
// type mismatches throw InvalidArgument naming the offender.
ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    double loss = 0.0;
    // headline deviation from the generating truth; infinity when it could
    // not be evaluated (failed extraction or unknown truth)
    double error = 0.0;
    // a fit that explains the data well yet lands far from the truth
    bool outlier = false;
    double floor = 0.0;                // lattice reference loss at the truth
    RVector parameters;
    std::vector<double> loss_history;
    std::vector<double> error_history;  // lattice pipelines only
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<TrialResult> trials;
    double median_loss = 0.0;
    double median_error = 0.0;
    report::QuantileCurves loss_curves;
    report::QuantileCurves error_curves;  // empty unless error histories exist
};

// Runs config.trials seeded trials on a pool of config.jobs workers; trial t
// always uses derive_seed(config.seed, t) regardless of scheduling, so the
// report does not depend on thread timing.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string report_to_json(const ExperimentReport& rep);

// Writes per-trial data files (trajectory or born reference plus the
// generating truth) and a meta.json with the resolved config.
void simulate_to_dir(const ExperimentConfig& config, const std::string& dir);

// Pools the per-trial histories of several report payloads into one set of
// quantile curves. Reports must agree on epoch counts.
struct AggregateCurves {
    report::QuantileCurves loss;
    report::QuantileCurves error;
};
AggregateCurves aggregate_reports(const std::vector<std::string>& report_texts);

}  // namespace qpt::experiment
