#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "netreg/glm.hpp"
#include "netreg/tensor.hpp"

namespace netreg {

// Step-size defaults, scaled by a bound on the loss curvature psi'':
//   delta = kDefaultDeltaScale / (curvature * sigma1_hat)
//   tau   = kDefaultTauScale / (curvature * max_k mean_i x_ik^2)
inline constexpr double kDefaultDeltaScale = 0.25;
inline constexpr double kDefaultTauScale = 1.0;
inline constexpr int kMaxStepHalvings = 3;

struct Hyperparams {
    std::size_t rank = 1;
    std::size_t sparsity = 0;   // budget on nonzero entries of B
    double step_delta = 0.0;    // <= 0 selects the default
    double step_tau = 0.0;      // <= 0 selects the default
    std::size_t max_iter = 200;
    double tol = 1e-3;          // absolute change in objective
    std::uint64_t seed = 0;

    void validate() const;
};

/// Converts a sparsity fraction over off-diagonal entries into a budget.
/// Symmetric budgets are rounded down to an even count (mirrored pairs).
std::size_t sparsity_budget(double fraction, std::size_t n, std::size_t p, bool symmetric);

enum class FactorMode { asymmetric, symmetric };

/// Theta in factored form: U V' (asymmetric) or U diag(lambda) U' (symmetric).
struct FactorModel {
    FactorMode mode = FactorMode::asymmetric;
    Matrix u;
    Matrix v;       // asymmetric only
    Vector lambda;  // symmetric only, entries +-1

    Matrix theta() const;
    /// [U; V] for asymmetric models, U for symmetric ones.
    Matrix stacked() const;
    std::size_t rank() const { return static_cast<std::size_t>(u.cols()); }
};

struct StepAttempt {
    double step_delta = 0.0;
    double step_tau = 0.0;
    std::string failure;  // empty for the attempt that finished
};

struct FitResult {
    FactorModel factors;
    Tensor3 b;
    std::vector<double> objective_trace;  // initial objective plus one entry per iteration
    std::size_t iterations = 0;
    bool converged = false;
    Hyperparams hyper;                    // with the step sizes actually used
    double sigma1_hat = 0.0;              // largest singular value at initialization
    std::vector<StepAttempt> step_history;
    std::size_t warmup_iterations = 0;    // asymmetric warm-up of a symmetric fit

    Matrix theta() const { return factors.theta(); }
};

struct AsymInit {
    Matrix u;
    Matrix v;
    Tensor3 b;
    double sigma1 = 0.0;
};

/// Spectral start: SVD_r of the link-transformed, clipped average network.
AsymInit init_asym(const NetworkDataset& data, std::size_t rank);

/// Clipped average network on the link scale, with a zero diagonal.
Matrix initial_link_matrix(const NetworkDataset& data);

/// Upper bound on psi'' used for default steps: 1/4 (logit), 1 (identity),
/// largest clipped average edge value (log).
double curvature_bound(const NetworkDataset& data);

/// Default (delta, tau) for a dataset whose initialization has leading singular value sigma1.
std::pair<double, double> default_steps(const NetworkDataset& data, double sigma1);

using IterationObserver = std::function<void(std::size_t, const FactorModel&, const Tensor3&)>;

FitResult fit_asym(const NetworkDataset& data, const Hyperparams& hyper,
                   const IterationObserver& observer = {});

struct SymInit {
    Matrix u;
    Vector lambda;
    Tensor3 b;
    FitResult warmup;
};

/// Runs the asymmetric fit, reads lambda from the signs of matching columns of
/// U and V, and averages U with V diag(lambda).
SymInit init_sym(const NetworkDataset& data, const Hyperparams& hyper);
SymInit sym_init_from(const FitResult& warmup);

FitResult fit_sym(const NetworkDataset& data, const Hyperparams& hyper,
                  const IterationObserver& observer = {});

/// fit_sym for symmetric datasets, fit_asym otherwise.
FitResult fit(const NetworkDataset& data, const Hyperparams& hyper);

/// min over orthonormal G of ||m - m_star G||_F, via orthogonal Procrustes.
double procrustes_distance(const Matrix& m, const Matrix& m_star);

/// d^2(M, M*) + ||B - B*||_F^2 / sigma1.
double distance_d(const FactorModel& m, const FactorModel& m_star, const Tensor3& b, const Tensor3& b_star,
                  double sigma1);

/// Balanced factorization of a known Theta: SVD-based for asymmetric mode,
/// eigendecomposition with sign matrix for symmetric mode.
FactorModel factor_truth(const Matrix& theta_star, std::size_t rank, FactorMode mode);

double ebic_value(double loss, std::size_t n, std::size_t subjects, std::size_t p, std::size_t rank,
                  std::size_t sparsity);
double ebic(const FitResult& fit, const NetworkDataset& data);

struct GridCell {
    std::size_t rank = 0;
    double sparsity_frac = 0.0;
    std::size_t sparsity = 0;
    double loss = 0.0;
    double ebic = 0.0;
    std::size_t iterations = 0;
    bool failed = false;
    std::string error;
};

struct TuneResult {
    FitResult best;
    std::vector<GridCell> grid;  // rank-major order
    std::size_t best_index = 0;
};

/// Fits every (rank, sparsity fraction) cell and keeps the minimum-eBIC fit.
/// Ties go to the smaller rank, then the smaller sparsity. Failing cells are
/// recorded in the grid and skipped.
TuneResult tune(const NetworkDataset& data, const std::vector<std::size_t>& ranks,
                const std::vector<double>& sparsity_fracs, const Hyperparams& hyper_template);

}  // namespace netreg
