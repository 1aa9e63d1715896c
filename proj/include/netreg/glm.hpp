#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "netreg/tensor.hpp"

namespace netreg {

/// Canonical exponential-family pairing for edge values. Dispersion is fixed at 1.
enum class EdgeFamily { bernoulli_logit, poisson_log, gaussian_identity };

std::string to_string(EdgeFamily family);
EdgeFamily parse_family(std::string_view name);

/// Raised when a linear predictor or objective leaves the finite range.
struct DivergedFit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when edge values are incompatible with the declared family.
struct FamilyMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Linear predictors beyond this magnitude are treated as divergence under the log link.
inline constexpr double kMaxLogLinkPredictor = 50.0;

double link(EdgeFamily family, double mu);
double inverse_link(EdgeFamily family, double eta);  // also psi'
double cumulant(EdgeFamily family, double eta);      // psi
double cumulant_d2(EdgeFamily family, double eta);   // psi''

/// N networks over n shared nodes with an N x p covariate matrix.
///
/// Networks are stored as the columns of an (n*n) x N matrix; column i is
/// A^(i) flattened row-major, matching the slice layout of Tensor3.
struct NetworkDataset {
    std::size_t n = 0;
    Eigen::MatrixXd responses;
    Matrix covariates;
    EdgeFamily family = EdgeFamily::bernoulli_logit;
    bool symmetric = false;

    static NetworkDataset from_networks(const std::vector<Matrix>& networks, Matrix covariates,
                                        EdgeFamily family, bool symmetric);

    std::size_t subjects() const { return static_cast<std::size_t>(responses.cols()); }
    std::size_t covariate_count() const { return static_cast<std::size_t>(covariates.cols()); }

    Eigen::Map<const Matrix> adjacency(std::size_t i) const {
        return Eigen::Map<const Matrix>(responses.col(Eigen::Index(i)).data(), Eigen::Index(n),
                                        Eigen::Index(n));
    }
    Vector covariate_row(std::size_t i) const { return covariates.row(Eigen::Index(i)).transpose(); }

    /// Throws DimensionError or FamilyMismatch. Diagonal entries are not checked.
    void validate() const;
};

enum class Gradients { none, theta, all };

struct LossAndGradients {
    double loss = 0.0;
    Matrix grad_theta;  // diagonal exactly zero
    Tensor3 grad_b;     // diagonal tube fibers exactly zero
};

/// Loss and (optionally) both gradients in a single pass over the subjects.
/// Subjects are processed in fixed-size blocks in index order, so results are
/// bit-identical between runs.
LossAndGradients evaluate_loss(const NetworkDataset& data, const Matrix& theta, const Tensor3& b,
                               Gradients which = Gradients::all, bool validate = true);

double neg_loglik(const NetworkDataset& data, const Matrix& theta, const Tensor3& b);
Matrix grad_theta(const NetworkDataset& data, const Matrix& theta, const Tensor3& b);
Tensor3 grad_b(const NetworkDataset& data, const Matrix& theta, const Tensor3& b);

/// ||U'U - V'V||_F^2 / 8
double balance_penalty(const Matrix& u, const Matrix& v);

double aug_loss(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b);
Matrix grad_u(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b);
Matrix grad_v(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b);

/// Factor gradients from a precomputed loss gradient G in Theta:
///   dU = G V + U (U'U - V'V) / 2,   dV = G' U - V (U'U - V'V) / 2
Matrix factor_grad_u(const Matrix& g, const Matrix& u, const Matrix& v);
Matrix factor_grad_v(const Matrix& g, const Matrix& u, const Matrix& v);

/// Theta = U diag(lambda) U'
Matrix symmetric_theta(const Matrix& u, const Vector& lambda);

/// Gradient of l(U diag(lambda) U', B) in U: (G + G') U diag(lambda).
Matrix grad_u_symmetric(const NetworkDataset& data, const Matrix& u, const Vector& lambda,
                        const Tensor3& b);
Matrix symmetric_factor_grad(const Matrix& g, const Matrix& u, const Vector& lambda);

}  // namespace netreg
