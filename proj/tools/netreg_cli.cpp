// netreg: simulate, fit, tune, report, replicate.

#include <iostream>

#include "CLI11.hpp"
#include "netreg/commands.hpp"

using namespace netreg;

namespace {

void add_fit_flags(CLI::App* cmd, FitOptions& o) {
    cmd->add_option("manifest", o.manifest, "dataset manifest")->required();
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--step-delta", o.step_delta, "factor step size (default: curvature-scaled)");
    cmd->add_option("--step-tau", o.step_tau, "slope step size (default: curvature-scaled)");
    cmd->add_option("--tol", o.tol, "absolute objective change for convergence")->capture_default_str();
    cmd->add_option("--max-iter", o.max_iter, "iteration cap")->capture_default_str();
    cmd->add_option("--seed", o.seed, "seed for community detection")->capture_default_str();
    cmd->add_flag("!--no-standardize", o.standardize, "keep covariates on their original scale");
    cmd->add_option("--communities", o.communities, "cluster nodes into K communities");
    cmd->add_option("--restarts", o.restarts, "K-means restarts")->capture_default_str();
    cmd->add_flag("--timing", o.record_runtime, "record wall-clock runtime in the report");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank plus sparse regression for populations of networks"};
    app.require_subcommand(1);

    std::filesystem::path sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset with ground truth");
    simulate->add_option("config", sim_config, "JSON simulation config")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();
    simulate->add_option("--seed", sim_seed, "override the config seed");

    FitOptions fit_opts;
    auto* fit = app.add_subcommand("fit", "fit one (rank, sparsity) model");
    add_fit_flags(fit, fit_opts);
    fit->add_option("--rank", fit_opts.rank, "rank of the intercept matrix")->capture_default_str();
    fit->add_option("--sparsity-frac", fit_opts.sparsity_frac, "fraction of off-diagonal slope entries kept")
        ->capture_default_str();

    TuneOptions tune_opts;
    auto* tune = app.add_subcommand("tune", "select (rank, sparsity) by eBIC over a grid");
    add_fit_flags(tune, tune_opts);
    tune->add_option("--rank", tune_opts.ranks, "rank grid (default 1..20)")->delimiter(',');
    tune->add_option("--sparsity-frac", tune_opts.sparsity_fracs, "sparsity grid (default 10^-3 .. 1)")
        ->delimiter(',');

    ReportOptions report_opts;
    auto* report = app.add_subcommand("report", "plot-ready tables from a fit report");
    report->add_option("report", report_opts.report, "fit_report.json")->required();
    report->add_option("--out", report_opts.out, "output directory")->required();
    report->add_option("--order", report_opts.order, "node order or node,group file");
    report->add_option("--communities", report_opts.communities, "recompute communities with K clusters");
    report->add_option("--max-k", report_opts.max_k, "largest K in the inertia table")->capture_default_str();
    report->add_option("--restarts", report_opts.restarts, "K-means restarts")->capture_default_str();
    report->add_option("--seed", report_opts.seed, "K-means seed")->capture_default_str();

    std::filesystem::path study_config, study_out;
    std::optional<std::uint64_t> study_seed;
    auto* replicate = app.add_subcommand("replicate", "run a replication study");
    replicate->add_option("config", study_config, "JSON study config")->required();
    replicate->add_option("--out", study_out, "output directory")->required();
    replicate->add_option("--seed", study_seed, "override the simulation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) {
            const auto sim = cmd_simulate(sim_config, sim_out, sim_seed);
            std::cout << "wrote " << sim.data.subjects() << " networks to " << sim_out.string() << "\n";
        } else if (*fit) {
            const auto r = cmd_fit(fit_opts);
            std::cout << "rank " << r.hyper.rank << ", sparsity " << r.hyper.sparsity << ", loss " << r.loss
                      << ", eBIC " << r.ebic << (r.converged ? "" : " (not converged)") << "\n";
        } else if (*tune) {
            const auto r = cmd_tune(tune_opts);
            std::cout << "selected rank " << r.hyper.rank << ", sparsity " << r.hyper.sparsity << ", eBIC " << r.ebic
                      << "\n";
        } else if (*report) {
            cmd_report(report_opts);
            std::cout << "wrote report tables to " << report_opts.out.string() << "\n";
        } else if (*replicate) {
            const auto reports = cmd_replicate(study_config, study_out, study_seed);
            std::size_t failures = 0;
            for (const auto& r : reports) failures += r.failures;
            std::cout << reports.size() << " study point(s), " << failures << " failed replication(s)\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for_current_exception();
    }
    return kExitOk;
}
