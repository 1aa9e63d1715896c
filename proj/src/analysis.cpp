#include "netreg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "netreg/simulation.hpp"

namespace netreg {

namespace {

constexpr int kLloydMaxIter = 300;

struct KmeansRun {
    Labels labels;
    Matrix centers;
    double inertia = std::numeric_limits<double>::infinity();
};

double sq_dist(const Matrix& points, Eigen::Index i, const Matrix& centers, Eigen::Index c) {
    return (points.row(i) - centers.row(c)).squaredNorm();
}

Matrix seed_centers(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Matrix centers(Eigen::Index(k), points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));

    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 1; c < Eigen::Index(k); ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[std::size_t(i)] = std::min(d2[std::size_t(i)], sq_dist(points, i, centers, c - 1));
            total += d2[std::size_t(i)];
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> unif(0.0, total);
            double target = unif(rng), acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[std::size_t(i)];
                if (acc >= target && d2[std::size_t(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centers.row(c) = points.row(pick);
    }
    return centers;
}

KmeansRun lloyd(const Matrix& points, Matrix centers) {
    const Eigen::Index n = points.rows();
    const Eigen::Index k = centers.rows();
    KmeansRun run;
    run.labels.assign(static_cast<std::size_t>(n), -1);

    for (int iter = 0; iter < kLloydMaxIter; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            double best_d = sq_dist(points, i, centers, 0);
            for (Eigen::Index c = 1; c < k; ++c) {
                const double d = sq_dist(points, i, centers, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (run.labels[std::size_t(i)] != int(best)) {
                run.labels[std::size_t(i)] = int(best);
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(run.labels[std::size_t(i)]) += points.row(i);
            ++counts[std::size_t(run.labels[std::size_t(i)])];
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[std::size_t(c)] > 0) {
                centers.row(c) = sums.row(c) / double(counts[std::size_t(c)]);
                continue;
            }
            // Empty cluster: move it to the point farthest from its center.
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = sq_dist(points, i, centers, run.labels[std::size_t(i)]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            centers.row(c) = points.row(far);
            run.labels[std::size_t(far)] = int(c);
        }
    }

    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) run.inertia += sq_dist(points, i, centers, run.labels[std::size_t(i)]);
    run.centers = std::move(centers);
    return run;
}

// Relabels clusters by order of first appearance so equal partitions compare equal.
void canonicalize(CommunityAssignment& a) {
    std::map<int, int> remap;
    for (int l : a.labels) remap.try_emplace(l, int(remap.size()));
    Matrix centers(a.centers.rows(), a.centers.cols());
    int next = int(remap.size());
    for (Eigen::Index c = 0; c < a.centers.rows(); ++c) {
        auto it = remap.find(int(c));
        const int to = it == remap.end() ? next++ : it->second;
        centers.row(to) = a.centers.row(c);
    }
    for (int& l : a.labels) l = remap[l];
    a.centers = std::move(centers);
}

}  // namespace

CommunityAssignment detect_communities(const Matrix& u, std::size_t k, std::size_t restarts, std::uint64_t seed) {
    if (k == 0 || k > static_cast<std::size_t>(u.rows())) {
        throw DimensionError("detect_communities: need 1 <= k <= number of rows (k=" + std::to_string(k) + ")");
    }
    if (restarts == 0) throw std::invalid_argument("detect_communities: restarts must be at least 1");

    std::mt19937_64 rng(seed);
    KmeansRun best;
    for (std::size_t r = 0; r < restarts; ++r) {
        KmeansRun run = lloyd(u, seed_centers(u, k, rng));
        if (run.inertia < best.inertia) best = std::move(run);
    }
    CommunityAssignment out{std::move(best.labels), std::move(best.centers), best.inertia};
    canonicalize(out);
    return out;
}

std::vector<double> inertia_curve(const Matrix& u, std::size_t k_max, std::size_t restarts, std::uint64_t seed) {
    k_max = std::min(k_max, static_cast<std::size_t>(u.rows()));
    std::vector<double> curve;
    for (std::size_t k = 1; k <= k_max; ++k) curve.push_back(detect_communities(u, k, restarts, seed).inertia);
    return curve;
}

EdgeSupport select_edges(const Tensor3& b, bool upper_only) {
    EdgeSupport out;
    for (std::size_t k = 0; k < b.d3(); ++k)
        for (std::size_t i = 0; i < b.d1(); ++i)
            for (std::size_t j = upper_only ? i + 1 : 0; j < b.d2(); ++j)
                if (i != j && b(i, j, k) != 0.0) out.insert({i, j, k});
    return out;
}

double f1_support(const EdgeSupport& est, const EdgeSupport& truth) {
    if (est.empty() && truth.empty()) return 1.0;
    std::size_t tp = 0;
    for (const auto& e : est) tp += truth.count(e);
    const double fp = double(est.size() - tp);
    const double fn = double(truth.size() - tp);
    return 2.0 * double(tp) / (2.0 * double(tp) + fp + fn);
}

double nmi(const Labels& a, const Labels& b) {
    if (a.size() != b.size()) throw DimensionError("nmi: label vectors differ in length");
    if (a.empty()) return 1.0;
    const double n = double(a.size());
    std::map<int, double> ca, cb;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }
    auto entropy = [n](const std::map<int, double>& counts) {
        double h = 0.0;
        for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
        return h;
    };
    const double ha = entropy(ca), hb = entropy(cb);
    if (ca.size() == 1 && cb.size() == 1) return 1.0;
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        mi += (c / n) * std::log(c * n / (ca[key.first] * cb[key.second]));
    }
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

EstimationErrors estimation_errors(const Matrix& theta_hat, const Tensor3& b_hat, const SimTruth& truth,
                                   const NetworkDataset& data) {
    const auto n = Eigen::Index(data.n);
    if (theta_hat.rows() != n || theta_hat.cols() != n || truth.theta_star.rows() != n ||
        !b_hat.same_shape(truth.b_star) || b_hat.d1() != data.n || b_hat.d3() != data.covariate_count()) {
        throw DimensionError("estimation_errors: fit, truth and data shapes disagree");
    }
    if (!truth.offset_factors.empty() && truth.offset_factors.size() != data.subjects()) {
        throw DimensionError("estimation_errors: per-subject offsets do not match the subject count");
    }

    EstimationErrors err;
    const EdgeFamily family = data.family;
    for (std::size_t i = 0; i < data.subjects(); ++i) {
        const Vector x = data.covariate_row(i);
        const Matrix eta = truth.linear_predictor(i, x);
        const Matrix eta_hat = theta_hat + mode3_product(b_hat, x);
        double diff = 0.0, base = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index l = 0; l < n; ++l) {
                if (j == l) continue;
                const double mu = inverse_link(family, eta(j, l));
                const double d = mu - inverse_link(family, eta_hat(j, l));
                diff += d * d;
                base += mu * mu;
            }
        }
        err.mu_error += std::sqrt(diff);
        err.mu_error_normalized += base > 0.0 ? std::sqrt(diff / base) : 0.0;
    }
    err.mu_error /= double(data.subjects());
    err.mu_error_normalized /= double(data.subjects());
    err.theta_error = frobenius_offdiag(Matrix(truth.theta_star - theta_hat));
    Tensor3 db = truth.b_star;
    db.flat() -= b_hat.flat();
    err.b_error = frobenius_offdiag(db);
    return err;
}

EstimationErrors estimation_errors(const FitResult& fit, const SimTruth& truth, const NetworkDataset& data) {
    return estimation_errors(fit.theta(), fit.b, truth, data);
}

}  // namespace netreg
