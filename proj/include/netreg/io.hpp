#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netreg/analysis.hpp"
#include "netreg/glm.hpp"
#include "netreg/optimizer.hpp"
#include "netreg/simulation.hpp"

namespace netreg {

namespace fs = std::filesystem;

/// Malformed or unreadable input files. Carries the offending file and line.
struct IngestionError : std::runtime_error {
    IngestionError(const fs::path& file, std::size_t line, const std::string& what);
    fs::path file;
    std::size_t line = 0;
};

/// Invalid configuration (bad flags, bad config file, unwritable output).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Plain-text key = value header describing a dataset on disk.
///
///     n = 50
///     N = 2
///     p = 1
///     family = bernoulli
///     symmetric = true
///     covariates = covariates.csv
///     network = networks/net_0000.csv
///     network = networks/net_0001.csv
///
/// Paths are relative to the manifest's directory. `network` repeats once per
/// subject. An optional `truth` key points at a ground-truth JSON file.
struct DatasetManifest {
    std::size_t n = 0;
    std::size_t subjects = 0;
    std::size_t p = 0;
    EdgeFamily family = EdgeFamily::bernoulli_logit;
    bool symmetric = false;
    std::vector<std::string> network_paths;
    std::string covariate_path;
    std::vector<std::string> covariate_names;  // filled from the covariate CSV header
    std::string truth_path;
};

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const DatasetManifest& manifest);

struct LoadedDataset {
    DatasetManifest manifest;
    NetworkDataset data;
    fs::path root;  // directory holding the manifest
};

/// Reads the manifest, every network file (dense n x n CSV or i,j,value edge
/// list, chosen by column count) and the covariate CSV.
LoadedDataset load_dataset(const fs::path& manifest_path);

/// Writes networks, covariates and the manifest under `dir`.
void save_dataset(const fs::path& dir, const NetworkDataset& data, const std::vector<std::string>& covariate_names,
                  const std::string& truth_path = {});

/// Formatting used for every CSV value (10 significant digits).
std::string format_value(double v);

Matrix read_matrix_csv(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Matrix& m);

/// Edge list with 0-based indices. Symmetric data mirror each entry.
Matrix read_network_csv(const fs::path& path, std::size_t n, bool symmetric);

/// Header `row,col,slice,value`, one line per nonzero entry.
void write_tensor_triplets(const fs::path& path, const Tensor3& b);
Tensor3 read_tensor_triplets(const fs::path& path, std::size_t d1, std::size_t d2, std::size_t d3);

void write_labels_csv(const fs::path& path, const Labels& labels);
Labels read_labels_csv(const fs::path& path);

/// Truth files next to `json_path`: theta_star.csv, b_star.csv,
/// communities.csv and offsets.csv as needed.
void save_truth(const fs::path& json_path, const SimTruth& truth, const SimConfig& config);
SimTruth load_truth(const fs::path& json_path, std::size_t n, std::size_t p, std::size_t subjects);

/// Everything a fit produces, in a form that round-trips through JSON.
struct FitReport {
    std::string family;
    bool symmetric = false;
    std::size_t n = 0;
    std::size_t subjects = 0;
    std::size_t p = 0;
    std::vector<std::string> covariate_names;
    bool standardized = true;
    std::vector<double> covariate_means;
    std::vector<double> covariate_sds;

    Hyperparams hyper;
    std::optional<double> sparsity_frac;
    FactorModel factors;
    Matrix theta;
    Tensor3 b;
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t warmup_iterations = 0;
    double sigma1_hat = 0.0;
    std::vector<StepAttempt> step_history;
    double loss = 0.0;
    double ebic = 0.0;

    std::vector<GridCell> grid;  // empty unless tuned
    std::optional<Labels> communities;
    std::optional<double> community_inertia;
    std::optional<EstimationErrors> errors;
    std::optional<double> f1;
    std::optional<double> nmi;
    std::optional<double> runtime_seconds;  // only recorded on request
};

std::string fit_report_json(const FitReport& report);
FitReport parse_fit_report(const std::string& text);
void write_fit_report(const fs::path& path, const FitReport& report);
FitReport read_fit_report(const fs::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace netreg
