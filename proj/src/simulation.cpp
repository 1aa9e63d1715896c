#include "netreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace netreg {

std::string to_string(Protocol protocol) {
    switch (protocol) {
        case Protocol::glsnet: return "glsnet";
        case Protocol::cise: return "cise";
        case Protocol::sbm: return "sbm";
        case Protocol::latent_factor: return "latent_factor";
    }
    return "unknown";
}

Protocol parse_protocol(std::string_view name) {
    if (name == "glsnet" || name == "lowrank_sparse") return Protocol::glsnet;
    if (name == "cise") return Protocol::cise;
    if (name == "sbm") return Protocol::sbm;
    if (name == "latent_factor" || name == "lfm") return Protocol::latent_factor;
    throw std::invalid_argument("unknown simulation protocol '" + std::string(name) + "'");
}

void SimConfig::validate() const {
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    if (subjects < 1) throw std::invalid_argument("N must be at least 1");
    switch (protocol) {
        case Protocol::glsnet:
            if (!(s0 >= 0.0 && s0 <= 1.0)) throw std::invalid_argument("s0 must lie in [0, 1]");
            [[fallthrough]];
        case Protocol::cise:
            if (rank < 1 || rank > n) throw std::invalid_argument("rank must lie in [1, n]");
            break;
        case Protocol::sbm: {
            if (!(w > 0.0 && w < 1.0)) throw std::invalid_argument("w must lie in (0, 1)");
            if (!(between > 0.0 && between < 1.0)) throw std::invalid_argument("between-block probability must lie in (0, 1)");
            if (k < 1 || k > n) throw std::invalid_argument("community count must lie in [1, n]");
            if (!community_sizes.empty()) {
                if (community_sizes.size() != k) throw std::invalid_argument("need one community size per community");
                if (std::accumulate(community_sizes.begin(), community_sizes.end(), std::size_t{0}) != n) {
                    throw std::invalid_argument("community sizes must sum to n");
                }
            }
            break;
        }
        case Protocol::latent_factor:
            if (k < 1 || k + 2 > n) throw std::invalid_argument("latent factor count must lie in [1, n-2]");
            break;
    }
}

Matrix SimTruth::linear_predictor(std::size_t subject, const Vector& x) const {
    Matrix eta = theta_star;
    if (b_star.d3() > 0) eta += mode3_product(b_star, x);
    if (!offset_factors.empty()) {
        const Vector& d = offset_factors.at(subject);
        eta += d * d.transpose();
    }
    return eta;
}

std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

std::uint64_t replication_seed(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                      std::uint32_t(std::uint64_t(index) >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (std::uint64_t(out[0]) << 32) | out[1];
}

std::pair<Vector, Vector> standardize_columns(Matrix& x) {
    const Eigen::Index rows = x.rows();
    Vector means = Vector::Zero(x.cols()), sds = Vector::Ones(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mean = x.col(c).mean();
        x.col(c).array() -= mean;
        means(c) = mean;
        if (rows < 2) continue;
        const double sd = std::sqrt(x.col(c).squaredNorm() / double(rows - 1));
        if (sd > 0.0) {
            x.col(c) /= sd;
            sds(c) = sd;
        }
    }
    return {means, sds};
}

namespace {

Matrix standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

// Symmetric logit-Bernoulli network: upper triangle sampled, mirrored, zero diagonal.
Matrix sample_bernoulli(const Matrix& eta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::Index n = eta.rows();
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index l = j + 1; l < n; ++l) {
            const double value = unif(rng) < inverse_link(EdgeFamily::bernoulli_logit, eta(j, l)) ? 1.0 : 0.0;
            a(j, l) = value;
            a(l, j) = value;
        }
    }
    return a;
}

double leading_singular_value(const Matrix& m) { return svd_r(m, 1).sigma(0); }

SimulatedData assemble(std::vector<Matrix> networks, Matrix covariates, SimTruth truth) {
    SimulatedData out;
    out.data = NetworkDataset::from_networks(networks, std::move(covariates), EdgeFamily::bernoulli_logit, true);
    truth.sigma1 = leading_singular_value(truth.theta_star);
    out.truth = std::move(truth);
    return out;
}

}  // namespace

SimulatedData gen_glsnet(const SimConfig& cfg) {
    if (cfg.protocol != Protocol::glsnet) throw std::invalid_argument("gen_glsnet: protocol mismatch");
    cfg.validate();
    auto rng = make_rng(cfg.seed);
    const auto n = Eigen::Index(cfg.n), p = Eigen::Index(cfg.p), subjects = Eigen::Index(cfg.subjects);

    Matrix x = standard_normal(rng, subjects, p);
    standardize_columns(x);

    SimTruth truth;
    truth.rank = cfg.rank;
    const Matrix u = standard_normal(rng, n, Eigen::Index(cfg.rank));
    truth.theta_star = u * u.transpose();

    truth.b_star = Tensor3(cfg.n, cfg.n, cfg.p);
    std::vector<EdgeIndex> candidates;
    for (std::size_t k = 0; k < cfg.p; ++k)
        for (std::size_t i = 0; i < cfg.n; ++i)
            for (std::size_t j = i + 1; j < cfg.n; ++j) candidates.push_back({i, j, k});
    const std::size_t pairs = sparsity_budget(cfg.s0, cfg.n, cfg.p, true) / 2;
    if (pairs > candidates.size()) throw std::invalid_argument("gen_glsnet: infeasible sparsity");
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(pairs);
    for (const auto& e : candidates) {
        truth.b_star(e.row, e.col, e.slice) = cfg.signal;
        truth.b_star(e.col, e.row, e.slice) = cfg.signal;
        if (cfg.signal != 0.0) truth.support.insert(e);
    }

    std::vector<Matrix> networks;
    networks.reserve(cfg.subjects);
    for (Eigen::Index i = 0; i < subjects; ++i) {
        networks.push_back(sample_bernoulli(truth.linear_predictor(std::size_t(i), x.row(i).transpose()), rng));
    }
    return assemble(std::move(networks), std::move(x), std::move(truth));
}

SimulatedData gen_cise(const SimConfig& cfg) {
    if (cfg.protocol != Protocol::cise) throw std::invalid_argument("gen_cise: protocol mismatch");
    cfg.validate();
    auto rng = make_rng(cfg.seed);
    const auto n = Eigen::Index(cfg.n);

    SimTruth truth;
    truth.rank = cfg.rank;
    const Matrix u = standard_normal(rng, n, Eigen::Index(cfg.rank));
    truth.theta_star = u * u.transpose();
    truth.b_star = Tensor3(cfg.n, cfg.n, 0);

    std::vector<Matrix> networks;
    networks.reserve(cfg.subjects);
    for (std::size_t i = 0; i < cfg.subjects; ++i) {
        truth.offset_factors.push_back(standard_normal(rng, n, 1).col(0));
        networks.push_back(sample_bernoulli(truth.linear_predictor(i, Vector()), rng));
    }
    return assemble(std::move(networks), Matrix(Eigen::Index(cfg.subjects), 0), std::move(truth));
}

SimulatedData gen_sbm(const SimConfig& cfg) {
    if (cfg.protocol != Protocol::sbm) throw std::invalid_argument("gen_sbm: protocol mismatch");
    cfg.validate();
    auto rng = make_rng(cfg.seed);

    std::vector<std::size_t> sizes = cfg.community_sizes;
    if (sizes.empty()) {
        sizes.assign(cfg.k, cfg.n / cfg.k);
        for (std::size_t c = 0; c < cfg.n % cfg.k; ++c) ++sizes[c];
    }
    SimTruth truth;
    truth.rank = cfg.k;
    for (std::size_t c = 0; c < sizes.size(); ++c) truth.communities.insert(truth.communities.end(), sizes[c], int(c));

    const auto n = Eigen::Index(cfg.n);
    const double within = link(EdgeFamily::bernoulli_logit, cfg.w);
    const double across = link(EdgeFamily::bernoulli_logit, cfg.between);
    truth.theta_star.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index l = 0; l < n; ++l)
            truth.theta_star(j, l) = truth.communities[std::size_t(j)] == truth.communities[std::size_t(l)] ? within : across;
    truth.b_star = Tensor3(cfg.n, cfg.n, 0);

    std::vector<Matrix> networks;
    networks.reserve(cfg.subjects);
    for (std::size_t i = 0; i < cfg.subjects; ++i) networks.push_back(sample_bernoulli(truth.theta_star, rng));
    return assemble(std::move(networks), Matrix(Eigen::Index(cfg.subjects), 0), std::move(truth));
}

SimulatedData gen_latent_factor(const SimConfig& cfg) {
    if (cfg.protocol != Protocol::latent_factor) throw std::invalid_argument("gen_latent_factor: protocol mismatch");
    cfg.validate();
    auto rng = make_rng(cfg.seed);
    const auto n = Eigen::Index(cfg.n);

    const Vector alpha = standard_normal(rng, n, 1).col(0);
    const Matrix c = standard_normal(rng, n, Eigen::Index(cfg.k));
    const Vector ones = Vector::Ones(n);

    SimTruth truth;
    // alpha 1' + 1 alpha' is rank two, so the total rank is k + 2.
    truth.rank = cfg.k + 2;
    truth.theta_star = alpha * ones.transpose() + ones * alpha.transpose() + c * c.transpose();
    truth.b_star = Tensor3(cfg.n, cfg.n, 0);

    std::vector<Matrix> networks;
    networks.reserve(cfg.subjects);
    for (std::size_t i = 0; i < cfg.subjects; ++i) networks.push_back(sample_bernoulli(truth.theta_star, rng));
    return assemble(std::move(networks), Matrix(Eigen::Index(cfg.subjects), 0), std::move(truth));
}

SimulatedData simulate(const SimConfig& cfg) {
    switch (cfg.protocol) {
        case Protocol::glsnet: return gen_glsnet(cfg);
        case Protocol::cise: return gen_cise(cfg);
        case Protocol::sbm: return gen_sbm(cfg);
        case Protocol::latent_factor: return gen_latent_factor(cfg);
    }
    throw std::invalid_argument("unknown protocol");
}

const MetricSummary& ReplicationReport::metric(std::string_view name) const {
    for (const auto& m : summary)
        if (m.name == name) return m;
    throw std::out_of_range("no metric named '" + std::string(name) + "'");
}

namespace {

MetricSummary summarize(std::string name, const std::vector<double>& values) {
    MetricSummary m;
    m.name = std::move(name);
    m.count = values.size();
    m.mean = std::numeric_limits<double>::quiet_NaN();
    m.se = std::numeric_limits<double>::quiet_NaN();
    if (values.empty()) return m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.se = std::sqrt(ss / double(values.size() - 1)) / std::sqrt(double(values.size()));
    }
    return m;
}

}  // namespace

ReplicationReport run_replications(const ReplicationPlan& plan) {
    if (plan.reps < 1) throw std::invalid_argument("run_replications: reps must be at least 1");
    plan.config.validate();

    ReplicationReport report;
    report.config = plan.config;
    for (std::size_t rep = 0; rep < plan.reps; ++rep) {
        ReplicationRow row;
        row.replication = rep;
        row.seed = replication_seed(plan.config.seed, rep);
        row.f1 = std::numeric_limits<double>::quiet_NaN();
        row.nmi = std::numeric_limits<double>::quiet_NaN();
        try {
            SimConfig cfg = plan.config;
            cfg.seed = row.seed;
            const SimulatedData sim = simulate(cfg);

            Hyperparams hyper = plan.hyper;
            hyper.seed = row.seed;
            FitResult fitted;
            if (plan.tune) {
                fitted = tune(sim.data, plan.rank_grid, plan.sparsity_grid, hyper).best;
            } else {
                if (plan.rank_from_truth) hyper.rank = sim.truth.rank;
                if (plan.sparsity_frac) {
                    hyper.sparsity = sparsity_budget(*plan.sparsity_frac, sim.data.n, sim.data.covariate_count(),
                                                     sim.data.symmetric);
                }
                fitted = fit(sim.data, hyper);
            }
            row.errors = estimation_errors(fitted, sim.truth, sim.data);
            if (sim.data.covariate_count() > 0) row.f1 = f1_support(select_edges(fitted.b, true), sim.truth.support);
            if (plan.communities > 0 && !sim.truth.communities.empty()) {
                const auto found = detect_communities(fitted.factors.u, plan.communities, plan.restarts, row.seed);
                row.nmi = nmi(found.labels, sim.truth.communities);
            }
            row.rank = fitted.hyper.rank;
            row.sparsity = fitted.hyper.sparsity;
            row.iterations = fitted.iterations;
            row.converged = fitted.converged;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            ++report.failures;
        }
        report.rows.push_back(std::move(row));
    }

    std::vector<double> mu, mu_norm, theta, b, f1, nm, iters;
    for (const auto& row : report.rows) {
        if (row.failed) continue;
        mu.push_back(row.errors.mu_error);
        mu_norm.push_back(row.errors.mu_error_normalized);
        theta.push_back(row.errors.theta_error);
        b.push_back(row.errors.b_error);
        if (!std::isnan(row.f1)) f1.push_back(row.f1);
        if (!std::isnan(row.nmi)) nm.push_back(row.nmi);
        iters.push_back(double(row.iterations));
    }
    report.summary = {summarize("mu_error", mu),       summarize("mu_error_normalized", mu_norm),
                      summarize("theta_error", theta), summarize("b_error", b),
                      summarize("f1", f1),             summarize("nmi", nm),
                      summarize("iterations", iters)};
    return report;
}

}  // namespace netreg
