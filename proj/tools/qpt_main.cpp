// Command line front end: simulate measurement data, reconstruct Hamiltonians,
// aggregate report payloads, list presets. Exit codes: 0 on success, 2 for
// configuration problems, 3 when the optimization stage fails.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpt/errors.hpp"
#include "qpt/experiment.hpp"

namespace {

namespace ex = qpt::experiment;

struct CommonFlags {
    std::string preset;
    std::string config_path;
    std::uint64_t seed = 0;
    int trials = 0;
    int jobs = -1;
    std::string out;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* trials_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--preset", flags.preset, "start from a named preset");
    cmd->add_option("--config", flags.config_path, "json config overlaid on the preset");
    flags.seed_opt = cmd->add_option("--seed", flags.seed, "base seed for the trial family");
    flags.trials_opt = cmd->add_option("--trials", flags.trials, "number of trials");
    flags.jobs_opt = cmd->add_option("--jobs", flags.jobs, "worker threads, 0 for one per core");
    flags.out_opt = cmd->add_option("--out", flags.out, "output directory");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw qpt::InvalidArgument("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw qpt::InvalidArgument("cannot write " + path);
    out << text;
}

ex::ExperimentConfig resolve_config(const CommonFlags& flags) {
    ex::ExperimentConfig cfg;
    if (!flags.preset.empty())
        cfg = ex::preset_config(flags.preset);
    if (!flags.config_path.empty())
        cfg = ex::apply_config_json(cfg, slurp(flags.config_path));
    if (*flags.seed_opt)
        cfg.seed = flags.seed;
    if (*flags.trials_opt)
        cfg.trials = flags.trials;
    if (*flags.jobs_opt)
        cfg.jobs = flags.jobs;
    if (*flags.out_opt)
        cfg.out_dir = flags.out;
    return cfg;
}

int cmd_presets_list() {
    for (const std::string& name : ex::preset_names()) {
        const ex::ExperimentConfig cfg = ex::preset_config(name);
        std::printf("%-24s pipeline=%-16s figure=%-3s trials=%d\n", name.c_str(),
                    ex::pipeline_name(cfg.pipeline).c_str(), cfg.figure.c_str(), cfg.trials);
    }
    return 0;
}

int cmd_simulate(const CommonFlags& flags) {
    const ex::ExperimentConfig cfg = resolve_config(flags);
    if (cfg.out_dir.empty())
        throw qpt::InvalidArgument("simulate needs --out (or \"out\" in the config)");
    ex::simulate_to_dir(cfg, cfg.out_dir);
    std::printf("simulated %d %s trial%s into %s\n", cfg.trials,
                ex::pipeline_name(cfg.pipeline).c_str(), cfg.trials == 1 ? "" : "s",
                cfg.out_dir.c_str());
    return 0;
}

int cmd_reconstruct(const CommonFlags& flags, const std::string& input) {
    ex::ExperimentConfig cfg = resolve_config(flags);
    if (!input.empty())
        cfg.input_dir = input;
    const ex::ExperimentReport rep = ex::run_experiment(cfg);
    const std::string payload = ex::report_to_json(rep);

    if (cfg.out_dir.empty()) {
        std::cout << payload << '\n';
        return 0;
    }
    std::filesystem::create_directories(cfg.out_dir);
    spill(cfg.out_dir + "/report.json", payload);
    if (!rep.loss_curves.median.empty()) {
        std::ostringstream csv;
        qpt::report::write_quantile_csv(csv, rep.loss_curves);
        spill(cfg.out_dir + "/loss_quantiles.csv", csv.str());
    }
    if (!rep.error_curves.median.empty()) {
        std::ostringstream csv;
        qpt::report::write_quantile_csv(csv, rep.error_curves);
        spill(cfg.out_dir + "/error_quantiles.csv", csv.str());
    }
    int outliers = 0;
    for (const ex::TrialResult& trial : rep.trials)
        outliers += trial.outlier ? 1 : 0;
    std::printf("%s: %d trial%s, median loss %.3e, median error %.3e, %d outlier%s -> %s\n",
                ex::pipeline_name(cfg.pipeline).c_str(), cfg.trials,
                cfg.trials == 1 ? "" : "s", rep.median_loss, rep.median_error, outliers,
                outliers == 1 ? "" : "s", cfg.out_dir.c_str());
    return 0;
}

int cmd_aggregate(const std::vector<std::string>& reports, const std::string& out) {
    std::vector<std::string> texts;
    for (const std::string& path : reports)
        texts.push_back(slurp(path));
    const ex::AggregateCurves curves = ex::aggregate_reports(texts);

    std::ostringstream loss_csv;
    qpt::report::write_quantile_csv(loss_csv, curves.loss);
    if (out.empty()) {
        std::cout << loss_csv.str();
        return 0;
    }
    std::filesystem::create_directories(out);
    spill(out + "/loss_quantiles.csv", loss_csv.str());
    if (!curves.error.median.empty()) {
        std::ostringstream err_csv;
        qpt::report::write_quantile_csv(err_csv, curves.error);
        spill(out + "/error_quantiles.csv", err_csv.str());
    }
    std::printf("aggregated %zu report%s -> %s\n", reports.size(),
                reports.size() == 1 ? "" : "s", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hamiltonian reconstruction from time-delayed measurements"};
    app.require_subcommand(1);

    CLI::App* presets = app.add_subcommand("presets", "preset utilities");
    presets->require_subcommand(1);
    presets->add_subcommand("list", "list the shipped presets");

    CommonFlags sim_flags;
    CLI::App* simulate = app.add_subcommand("simulate", "generate measurement data files");
    add_common(simulate, sim_flags);

    CommonFlags rec_flags;
    std::string rec_input;
    CLI::App* reconstruct =
        app.add_subcommand("reconstruct", "run reconstruction trials and write a report");
    add_common(reconstruct, rec_flags);
    reconstruct->add_option("--input", rec_input,
                            "directory of simulate outputs to consume instead of "
                            "regenerating data");

    std::vector<std::string> agg_reports;
    std::string agg_out;
    CLI::App* aggregate =
        app.add_subcommand("aggregate", "pool trial histories from report files");
    aggregate->add_option("reports", agg_reports, "report.json files")->required();
    aggregate->add_option("--out", agg_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (presets->parsed())
            return cmd_presets_list();
        if (simulate->parsed())
            return cmd_simulate(sim_flags);
        if (reconstruct->parsed())
            return cmd_reconstruct(rec_flags, rec_input);
        if (aggregate->parsed())
            return cmd_aggregate(agg_reports, agg_out);
    } catch (const qpt::OptimizationFailure& e) {
        std::fprintf(stderr, "optimization failed: %s\n", e.what());
        return 3;
    } catch (const qpt::Divergence& e) {
        std::fprintf(stderr, "optimization diverged: %s\n", e.what());
        return 3;
    } catch (const qpt::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
