#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "netreg/analysis.hpp"
#include "netreg/glm.hpp"
#include "netreg/optimizer.hpp"

namespace netreg {

enum class Protocol { glsnet, cise, sbm, latent_factor };

std::string to_string(Protocol protocol);
Protocol parse_protocol(std::string_view name);

struct SimConfig {
    Protocol protocol = Protocol::glsnet;
    std::size_t n = 50;
    std::size_t p = 10;            // glsnet only; other protocols carry no covariates
    std::size_t subjects = 200;    // N
    std::size_t rank = 2;          // glsnet / cise
    double s0 = 0.1;               // fraction of off-diagonal entries of B that are nonzero
    double signal = 2.0;           // value of the nonzero entries of B
    double w = 0.5;                // sbm within-block probability
    double between = 0.1;          // sbm between-block probability
    std::size_t k = 3;             // sbm communities / latent factors
    std::vector<std::size_t> community_sizes;  // sbm; empty means as-equal-as-possible
    std::uint64_t seed = 1;

    void validate() const;
};

/// Ground truth behind a simulated dataset.
struct SimTruth {
    Matrix theta_star;
    Tensor3 b_star;
    EdgeSupport support;                 // upper-triangle entries of b_star
    Labels communities;                  // sbm only
    double sigma1 = 0.0;                 // largest singular value of theta_star
    std::size_t rank = 0;                // rank of theta_star by construction
    std::vector<Vector> offset_factors;  // cise: D_i = d_i d_i'

    /// Theta* + B* x_3 x (+ D_i when offsets are present).
    Matrix linear_predictor(std::size_t subject, const Vector& x) const;
};

struct SimulatedData {
    NetworkDataset data;
    SimTruth truth;
};

/// Root generator for one simulation; all draws for a dataset come from it.
std::mt19937_64 make_rng(std::uint64_t seed);

/// Seed of replication `index` derived from a study seed.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t index);

/// Standardizes columns to mean 0 and sample standard deviation 1. Constant
/// columns are only centered. Returns (means, sds).
std::pair<Vector, Vector> standardize_columns(Matrix& x);

SimulatedData gen_glsnet(const SimConfig& cfg);
SimulatedData gen_cise(const SimConfig& cfg);
SimulatedData gen_sbm(const SimConfig& cfg);
SimulatedData gen_latent_factor(const SimConfig& cfg);
SimulatedData simulate(const SimConfig& cfg);

struct ReplicationPlan {
    SimConfig config;
    std::size_t reps = 1;
    Hyperparams hyper;               // rank/step/tol settings for fixed fits
    bool rank_from_truth = false;    // fixed fits use the generator's rank
    std::optional<double> sparsity_frac;  // overrides hyper.sparsity when set
    bool tune = false;
    std::vector<std::size_t> rank_grid;
    std::vector<double> sparsity_grid;
    std::size_t communities = 0;     // K for community detection; 0 skips it
    std::size_t restarts = kDefaultKmeansRestarts;
};

struct ReplicationRow {
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    EstimationErrors errors;
    double f1 = 0.0;       // NaN when B is not part of the model
    double nmi = 0.0;      // NaN when no communities were requested
    std::size_t rank = 0;
    std::size_t sparsity = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct MetricSummary {
    std::string name;
    double mean = 0.0;
    double se = 0.0;  // NaN with fewer than two values
    std::size_t count = 0;
};

struct ReplicationReport {
    SimConfig config;
    std::vector<ReplicationRow> rows;  // replication-index order
    std::vector<MetricSummary> summary;
    std::size_t failures = 0;

    const MetricSummary& metric(std::string_view name) const;
};

ReplicationReport run_replications(const ReplicationPlan& plan);

}  // namespace netreg
