#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "netreg/io.hpp"

namespace netreg {

/// Process exit codes used by the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitIngestion = 3, kExitDivergence = 4 };

/// Maps the exception currently being handled to an exit code.
int exit_code_for_current_exception();

struct FitOptions {
    fs::path manifest;
    fs::path out;
    std::size_t rank = 1;
    double sparsity_frac = 0.0;
    double step_delta = 0.0;  // <= 0: default
    double step_tau = 0.0;    // <= 0: default
    double tol = 1e-3;
    std::size_t max_iter = 200;
    std::uint64_t seed = 0;
    bool standardize = true;
    std::size_t communities = 0;  // 0 skips community detection
    std::size_t restarts = kDefaultKmeansRestarts;
    bool record_runtime = false;  // wall-clock time breaks byte-identical reruns
};

struct TuneOptions : FitOptions {
    std::vector<std::size_t> ranks;      // empty: 1..20 (capped at n)
    std::vector<double> sparsity_fracs;  // empty: 10^-3, 10^-2.9, ..., 10^0
};

/// Default tuning grids.
std::vector<std::size_t> default_rank_grid(std::size_t n);
std::vector<double> default_sparsity_grid();

/// Writes fit_report.json, theta_hat.csv, b_hat.csv, objective_trace.csv and,
/// when communities are requested, communities.csv under `out`.
FitReport cmd_fit(const FitOptions& options);

/// Same outputs as cmd_fit for the selected cell, plus grid.csv.
FitReport cmd_tune(const TuneOptions& options);

/// Reads a JSON simulation config and writes the dataset (manifest.txt,
/// networks/, covariates.csv) with ground truth under truth/.
SimulatedData cmd_simulate(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed = {});

struct ReportOptions {
    fs::path report;
    fs::path out;
    fs::path order;               // optional: node order (one column) or node,group table
    std::size_t communities = 0;  // recompute communities with this K; 0 uses the report's labels
    std::size_t max_k = 10;       // inertia table covers K = 1..max_k
    std::size_t restarts = kDefaultKmeansRestarts;
    std::uint64_t seed = 0;
};

/// Plot-ready tables: heatmap.csv (inverse link of theta), node_order.csv,
/// b_slices/*.csv, communities.csv and inertia_vs_k.csv.
void cmd_report(const ReportOptions& options);

/// Node display order from an ordering file. A single column lists nodes in
/// display order; node,group rows sort nodes stably by group, with groups in
/// order of first appearance.
std::vector<std::size_t> read_node_order(const fs::path& path, std::size_t n);

/// Runs a replication study described by a JSON file and writes
/// replications.csv, summary.csv and summary.json under `out`.
std::vector<ReplicationReport> cmd_replicate(const fs::path& config, const fs::path& out,
                                             std::optional<std::uint64_t> seed = {});

}  // namespace netreg
