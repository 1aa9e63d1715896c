#include "netreg/glm.hpp"

#include <algorithm>
#include <cmath>

namespace netreg {

std::string to_string(EdgeFamily family) {
    switch (family) {
        case EdgeFamily::bernoulli_logit: return "bernoulli";
        case EdgeFamily::poisson_log: return "poisson";
        case EdgeFamily::gaussian_identity: return "gaussian";
    }
    return "unknown";
}

EdgeFamily parse_family(std::string_view name) {
    if (name == "bernoulli" || name == "binary" || name == "logit") return EdgeFamily::bernoulli_logit;
    if (name == "poisson" || name == "count" || name == "log") return EdgeFamily::poisson_log;
    if (name == "gaussian" || name == "identity") return EdgeFamily::gaussian_identity;
    throw std::invalid_argument("unknown edge family '" + std::string(name) + "'");
}

double link(EdgeFamily family, double mu) {
    switch (family) {
        case EdgeFamily::bernoulli_logit: return std::log(mu / (1.0 - mu));
        case EdgeFamily::poisson_log: return std::log(mu);
        case EdgeFamily::gaussian_identity: return mu;
    }
    return mu;
}

double inverse_link(EdgeFamily family, double eta) {
    switch (family) {
        case EdgeFamily::bernoulli_logit:
            if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
            else {
                const double e = std::exp(eta);
                return e / (1.0 + e);
            }
        case EdgeFamily::poisson_log: return std::exp(eta);
        case EdgeFamily::gaussian_identity: return eta;
    }
    return eta;
}

double cumulant(EdgeFamily family, double eta) {
    switch (family) {
        case EdgeFamily::bernoulli_logit:
            return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        case EdgeFamily::poisson_log: return std::exp(eta);
        case EdgeFamily::gaussian_identity: return 0.5 * eta * eta;
    }
    return 0.0;
}

double cumulant_d2(EdgeFamily family, double eta) {
    switch (family) {
        case EdgeFamily::bernoulli_logit: {
            const double p = inverse_link(family, eta);
            return p * (1.0 - p);
        }
        case EdgeFamily::poisson_log: return std::exp(eta);
        case EdgeFamily::gaussian_identity: return 1.0;
    }
    return 0.0;
}

NetworkDataset NetworkDataset::from_networks(const std::vector<Matrix>& networks, Matrix covariates,
                                             EdgeFamily family, bool symmetric) {
    NetworkDataset data;
    data.family = family;
    data.symmetric = symmetric;
    data.covariates = std::move(covariates);
    data.n = networks.empty() ? 0 : static_cast<std::size_t>(networks.front().rows());
    const auto nn = Eigen::Index(data.n * data.n);
    data.responses.resize(nn, Eigen::Index(networks.size()));
    for (std::size_t i = 0; i < networks.size(); ++i) {
        const Matrix& a = networks[i];
        if (static_cast<std::size_t>(a.rows()) != data.n || static_cast<std::size_t>(a.cols()) != data.n) {
            throw DimensionError("network " + std::to_string(i) + " is " + std::to_string(a.rows()) + "x" +
                                 std::to_string(a.cols()) + ", expected " + std::to_string(data.n) +
                                 " square");
        }
        data.responses.col(Eigen::Index(i)) = Eigen::Map<const Eigen::VectorXd>(a.data(), nn);
    }
    return data;
}

void NetworkDataset::validate() const {
    if (subjects() == 0) throw DimensionError("dataset has no networks");
    if (static_cast<std::size_t>(responses.rows()) != n * n) {
        throw DimensionError("response storage does not match n*n");
    }
    if (static_cast<std::size_t>(covariates.rows()) != subjects()) {
        throw DimensionError("covariate rows (" + std::to_string(covariates.rows()) +
                             ") do not match network count (" + std::to_string(subjects()) + ")");
    }
    if (!covariates.allFinite()) throw DimensionError("covariates contain non-finite values");

    for (std::size_t i = 0; i < subjects(); ++i) {
        const auto a = adjacency(i);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t l = 0; l < n; ++l) {
                if (j == l) continue;
                const double v = a(Eigen::Index(j), Eigen::Index(l));
                if (!std::isfinite(v)) {
                    throw FamilyMismatch("network " + std::to_string(i) + " has a non-finite entry");
                }
                const bool ok = family == EdgeFamily::bernoulli_logit ? (v == 0.0 || v == 1.0)
                                : family == EdgeFamily::poisson_log    ? (v >= 0.0 && v == std::floor(v))
                                                                       : true;
                if (!ok) {
                    throw FamilyMismatch("network " + std::to_string(i) + " entry (" + std::to_string(j) +
                                         "," + std::to_string(l) + ") = " + std::to_string(v) +
                                         " is invalid for family " + to_string(family));
                }
                if (symmetric && v != a(Eigen::Index(l), Eigen::Index(j))) {
                    throw FamilyMismatch("network " + std::to_string(i) + " is not symmetric at (" +
                                         std::to_string(j) + "," + std::to_string(l) + ")");
                }
            }
        }
    }
}

namespace {

constexpr Eigen::Index kSubjectBlock = 64;

void check_shapes(const NetworkDataset& data, const Matrix& theta, const Tensor3& b) {
    if (static_cast<std::size_t>(theta.rows()) != data.n || static_cast<std::size_t>(theta.cols()) != data.n) {
        throw DimensionError("theta must be n x n");
    }
    if (b.d1() != data.n || b.d2() != data.n || b.d3() != data.covariate_count()) {
        throw DimensionError("coefficient tensor must be n x n x p");
    }
}

}  // namespace

LossAndGradients evaluate_loss(const NetworkDataset& data, const Matrix& theta, const Tensor3& b,
                               Gradients which, bool validate) {
    const bool with_gradients = which != Gradients::none;
    const bool with_b = which == Gradients::all;
    if (validate) data.validate();
    check_shapes(data, theta, b);

    const std::size_t n = data.n;
    const auto nn = Eigen::Index(n * n);
    const auto total = Eigen::Index(data.subjects());
    const EdgeFamily family = data.family;
    const Eigen::Map<const Eigen::VectorXd> theta_vec(theta.data(), nn);
    const Eigen::MatrixXd x = data.covariates;  // N x p, column-major for block products

    LossAndGradients out;
    Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(nn);
    Eigen::MatrixXd g_b = Eigen::MatrixXd::Zero(nn, Eigen::Index(b.d3()));
    double total_loss = 0.0;

    Eigen::MatrixXd eta, resid;
    for (Eigen::Index start = 0; start < total; start += kSubjectBlock) {
        const Eigen::Index count = std::min(kSubjectBlock, total - start);
        const auto xb = x.middleRows(start, count);  // count x p
        eta.noalias() = b.flat() * xb.transpose();   // nn x count
        eta.colwise() += theta_vec;
        if (with_gradients) resid.resize(nn, count);

        for (Eigen::Index c = 0; c < count; ++c) {
            const double* a = data.responses.col(start + c).data();
            const double* e = eta.col(c).data();
            double subject = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t l = 0; l < n; ++l) {
                    const Eigen::Index idx = Eigen::Index(j * n + l);
                    if (j == l) {
                        if (with_gradients) resid(idx, c) = 0.0;
                        continue;
                    }
                    const double h = e[idx];
                    if (!std::isfinite(h) ||
                        (family == EdgeFamily::poisson_log && std::abs(h) > kMaxLogLinkPredictor)) {
                        throw DivergedFit("linear predictor out of range (" + std::to_string(h) + ")");
                    }
                    subject += a[idx] * h - cumulant(family, h);
                    if (with_gradients) resid(idx, c) = inverse_link(family, h) - a[idx];
                }
            }
            total_loss += subject;
        }
        if (with_gradients) {
            g_theta.noalias() += resid.rowwise().sum();
            if (with_b && b.d3() > 0) g_b.noalias() += resid * xb;
        }
    }

    const double scale = 1.0 / double(total);
    out.loss = -total_loss * scale;
    if (!std::isfinite(out.loss)) throw DivergedFit("non-finite loss");
    if (with_gradients) {
        out.grad_theta.resize(Eigen::Index(n), Eigen::Index(n));
        Eigen::Map<Eigen::VectorXd>(out.grad_theta.data(), nn) = g_theta * scale;
        out.grad_b = Tensor3(n, n, b.d3());
        if (with_b) out.grad_b.flat() = g_b * scale;
    }
    return out;
}

double neg_loglik(const NetworkDataset& data, const Matrix& theta, const Tensor3& b) {
    return evaluate_loss(data, theta, b, Gradients::none).loss;
}

Matrix grad_theta(const NetworkDataset& data, const Matrix& theta, const Tensor3& b) {
    return evaluate_loss(data, theta, b, Gradients::theta).grad_theta;
}

Tensor3 grad_b(const NetworkDataset& data, const Matrix& theta, const Tensor3& b) {
    return evaluate_loss(data, theta, b).grad_b;
}

namespace {

void check_factors(const Matrix& u, const Matrix& v) {
    if (u.rows() != v.rows() || u.cols() != v.cols()) {
        throw DimensionError("factor shapes differ: " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) +
                             " vs " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
    }
}

}  // namespace

double balance_penalty(const Matrix& u, const Matrix& v) {
    check_factors(u, v);
    const Matrix w = u.transpose() * u - v.transpose() * v;
    return w.squaredNorm() / 8.0;
}

double aug_loss(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b) {
    check_factors(u, v);
    return neg_loglik(data, u * v.transpose(), b) + balance_penalty(u, v);
}

Matrix factor_grad_u(const Matrix& g, const Matrix& u, const Matrix& v) {
    const Matrix w = u.transpose() * u - v.transpose() * v;
    return g * v + 0.5 * u * w;
}

Matrix factor_grad_v(const Matrix& g, const Matrix& u, const Matrix& v) {
    const Matrix w = u.transpose() * u - v.transpose() * v;
    return g.transpose() * u - 0.5 * v * w;
}

Matrix grad_u(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b) {
    check_factors(u, v);
    return factor_grad_u(grad_theta(data, u * v.transpose(), b), u, v);
}

Matrix grad_v(const NetworkDataset& data, const Matrix& u, const Matrix& v, const Tensor3& b) {
    check_factors(u, v);
    return factor_grad_v(grad_theta(data, u * v.transpose(), b), u, v);
}

Matrix symmetric_theta(const Matrix& u, const Vector& lambda) {
    if (lambda.size() != u.cols()) throw DimensionError("lambda length must equal the factor rank");
    const Matrix scaled = u * lambda.asDiagonal();
    Matrix theta = scaled * u.transpose();
    // Force exact symmetry; the product can differ in the last bit across the diagonal.
    for (Eigen::Index i = 0; i < theta.rows(); ++i)
        for (Eigen::Index j = i + 1; j < theta.cols(); ++j) theta(j, i) = theta(i, j);
    return theta;
}

Matrix symmetric_factor_grad(const Matrix& g, const Matrix& u, const Vector& lambda) {
    const Matrix gs = g + g.transpose();
    return gs * u * lambda.asDiagonal();
}

Matrix grad_u_symmetric(const NetworkDataset& data, const Matrix& u, const Vector& lambda,
                        const Tensor3& b) {
    return symmetric_factor_grad(grad_theta(data, symmetric_theta(u, lambda), b), u, lambda);
}

}  // namespace netreg
