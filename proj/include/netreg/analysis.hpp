#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <vector>

#include "netreg/glm.hpp"
#include "netreg/optimizer.hpp"
#include "netreg/tensor.hpp"

namespace netreg {

struct SimTruth;

/// Cluster ids are 0-based.
using Labels = std::vector<int>;

struct CommunityAssignment {
    Labels labels;
    Matrix centers;  // k x r
    double inertia = 0.0;
};

inline constexpr std::size_t kDefaultKmeansRestarts = 20;

/// Lloyd's K-means on the rows of `u` with k-means++ seeding; the restart with
/// the smallest within-cluster sum of squares wins (earliest restart on ties).
CommunityAssignment detect_communities(const Matrix& u, std::size_t k,
                                       std::size_t restarts = kDefaultKmeansRestarts, std::uint64_t seed = 0);

/// Best inertia for K = 1..k_max, for elbow inspection.
std::vector<double> inertia_curve(const Matrix& u, std::size_t k_max, std::size_t restarts, std::uint64_t seed);

struct EdgeIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t slice = 0;
    auto operator<=>(const EdgeIndex&) const = default;
};

using EdgeSupport = std::set<EdgeIndex>;

/// Nonzero support of B, excluding diagonal fibers. With `upper_only`, only
/// entries with row < col are reported.
EdgeSupport select_edges(const Tensor3& b, bool upper_only = false);

/// 2TP / (2TP + FP + FN); 1 when both sets are empty.
double f1_support(const EdgeSupport& est, const EdgeSupport& truth);

/// I(a;b) / sqrt(H(a) H(b)); 1 when both partitions have a single cluster.
double nmi(const Labels& a, const Labels& b);

struct EstimationErrors {
    double mu_error = 0.0;             // mean_i ||mu_i - mu_hat_i||_F
    double mu_error_normalized = 0.0;  // mean_i ||mu_i - mu_hat_i||_F / ||mu_i||_F
    double theta_error = 0.0;          // ||Theta - Theta_hat||_F
    double b_error = 0.0;              // ||B - B_hat||_F
};

/// All norms are taken over off-diagonal entries only.
EstimationErrors estimation_errors(const Matrix& theta_hat, const Tensor3& b_hat, const SimTruth& truth,
                                   const NetworkDataset& data);
EstimationErrors estimation_errors(const FitResult& fit, const SimTruth& truth, const NetworkDataset& data);

}  // namespace netreg
