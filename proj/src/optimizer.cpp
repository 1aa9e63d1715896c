#include "netreg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace netreg {

void Hyperparams::validate() const {
    if (rank < 1) throw std::invalid_argument("rank must be at least 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

std::size_t sparsity_budget(double fraction, std::size_t n, std::size_t p, bool symmetric) {
    if (!(fraction >= 0.0) || fraction > 1.0) {
        throw std::invalid_argument("sparsity fraction must lie in [0, 1]");
    }
    const double offdiag = double(n) * double(n > 0 ? n - 1 : 0) * double(p);
    // Small slack so that e.g. 0.3 * 2450 does not floor to 734.
    constexpr double slack = 1e-9;
    if (symmetric) return 2 * static_cast<std::size_t>(std::floor(fraction * offdiag / 2.0 + slack));
    return static_cast<std::size_t>(std::floor(fraction * offdiag + slack));
}

Matrix FactorModel::theta() const {
    if (mode == FactorMode::symmetric) return symmetric_theta(u, lambda);
    return u * v.transpose();
}

Matrix FactorModel::stacked() const {
    if (mode == FactorMode::symmetric) return u;
    Matrix m(u.rows() + v.rows(), u.cols());
    m << u, v;
    return m;
}

Matrix initial_link_matrix(const NetworkDataset& data) {
    data.validate();
    const auto n = Eigen::Index(data.n);
    const double subjects = double(data.subjects());
    const Eigen::VectorXd mean = data.responses.rowwise().mean();
    const double eps = 1.0 / (2.0 * subjects);

    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index l = 0; l < n; ++l) {
            if (j == l) {
                out(j, l) = 0.0;
                continue;
            }
            double a = mean(j * n + l);
            switch (data.family) {
                case EdgeFamily::bernoulli_logit: a = std::clamp(a, eps, 1.0 - eps); break;
                case EdgeFamily::poisson_log: a = std::max(a, eps); break;
                case EdgeFamily::gaussian_identity: break;
            }
            out(j, l) = link(data.family, a);
        }
    }
    return out;
}

double curvature_bound(const NetworkDataset& data) {
    switch (data.family) {
        case EdgeFamily::bernoulli_logit: return 0.25;
        case EdgeFamily::gaussian_identity: return 1.0;
        case EdgeFamily::poisson_log: {
            const double eps = 1.0 / (2.0 * double(data.subjects()));
            return std::max(data.responses.rowwise().mean().maxCoeff(), eps);
        }
    }
    return 1.0;
}

std::pair<double, double> default_steps(const NetworkDataset& data, double sigma1) {
    const double curvature = curvature_bound(data);
    double x_scale = 1.0;
    if (data.covariate_count() > 0 && data.subjects() > 0) {
        x_scale = data.covariates.colwise().squaredNorm().maxCoeff() / double(data.subjects());
        if (!(x_scale > 0.0)) x_scale = 1.0;
    }
    const double delta = kDefaultDeltaScale / (curvature * (sigma1 > 0.0 ? sigma1 : 1.0));
    const double tau = kDefaultTauScale / (curvature * x_scale);
    return {delta, tau};
}

AsymInit init_asym(const NetworkDataset& data, std::size_t rank) {
    if (data.subjects() == 0) throw DimensionError("init_asym: empty dataset");
    if (rank > data.n) {
        throw DimensionError("init_asym: rank " + std::to_string(rank) + " exceeds node count " +
                             std::to_string(data.n));
    }
    const SvdResult svd = svd_r(initial_link_matrix(data), rank);
    const Vector root = svd.sigma.cwiseSqrt();
    AsymInit init;
    init.u = svd.u * root.asDiagonal();
    init.v = svd.v * root.asDiagonal();
    init.b = Tensor3(data.n, data.n, data.covariate_count());
    init.sigma1 = rank > 0 ? svd.sigma(0) : 0.0;
    return init;
}

namespace {

Tensor3 symmetrized(const Tensor3& g) {
    Tensor3 out = g;
    for (std::size_t k = 0; k < g.d3(); ++k) {
        auto s = out.slice(k);
        const Matrix avg = 0.5 * (g.slice(k) + g.slice(k).transpose());
        s = avg;
    }
    return out;
}

// Gradient step on B followed by hard thresholding. Symmetric data keep B
// slices symmetric.
Tensor3 b_step(const Tensor3& b, const Tensor3& grad, double tau, std::size_t s, bool symmetric) {
    Tensor3 step = b;
    const Tensor3 g = symmetric ? symmetrized(grad) : grad;
    auto flat = step.flat();
    flat -= tau * g.flat();
    return truncate_offdiagonal(step, s, symmetric);
}

std::string describe(const std::vector<StepAttempt>& history) {
    std::ostringstream os;
    os << "fit diverged after " << history.size() << " attempts:";
    for (const auto& a : history) {
        os << " [delta=" << a.step_delta << ", tau=" << a.step_tau << ": " << a.failure << "]";
    }
    return os.str();
}

template <typename Attempt>
FitResult run_with_halving(double delta, double tau, Attempt&& attempt) {
    std::vector<StepAttempt> history;
    for (int k = 0; k <= kMaxStepHalvings; ++k) {
        try {
            FitResult result = attempt(delta, tau);
            history.push_back({delta, tau, {}});
            result.step_history = std::move(history);
            return result;
        } catch (const DivergedFit& e) {
            history.push_back({delta, tau, e.what()});
            delta *= 0.5;
            tau *= 0.5;
        }
    }
    throw DivergedFit(describe(history));
}

bool converged(const std::vector<double>& trace, double tol) {
    return trace.size() >= 2 && std::abs(trace.back() - trace[trace.size() - 2]) < tol;
}

}  // namespace

FitResult fit_asym(const NetworkDataset& data, const Hyperparams& hyper, const IterationObserver& observer) {
    hyper.validate();
    const AsymInit init = init_asym(data, hyper.rank);
    const bool symmetric = data.symmetric;
    const std::size_t s = hyper.sparsity;

    const auto [default_delta, default_tau] = default_steps(data, init.sigma1);
    const double delta0 = hyper.step_delta > 0.0 ? hyper.step_delta : default_delta;
    const double tau0 = hyper.step_tau > 0.0 ? hyper.step_tau : default_tau;

    return run_with_halving(delta0, tau0, [&](double delta, double tau) {
        FitResult r;
        r.hyper = hyper;
        r.hyper.step_delta = delta;
        r.hyper.step_tau = tau;
        r.sigma1_hat = init.sigma1;
        r.factors.mode = FactorMode::asymmetric;

        Matrix u = init.u, v = init.v;
        Tensor3 b = init.b;
        auto state = evaluate_loss(data, u * v.transpose(), b, Gradients::theta, false);
        r.objective_trace.push_back(state.loss + balance_penalty(u, v));
        if (observer) observer(0, FactorModel{FactorMode::asymmetric, u, v, {}}, b);

        for (std::size_t t = 1; t <= hyper.max_iter; ++t) {
            u -= delta * factor_grad_u(state.grad_theta, u, v);
            const auto at_u = evaluate_loss(data, u * v.transpose(), b, Gradients::theta, false);
            v -= delta * factor_grad_v(at_u.grad_theta, u, v);
            const Matrix theta = u * v.transpose();
            const auto at_uv = evaluate_loss(data, theta, b, Gradients::all, false);
            b = b_step(b, at_uv.grad_b, tau, s, symmetric);

            state = evaluate_loss(data, theta, b, Gradients::theta, false);
            const double objective = state.loss + balance_penalty(u, v);
            if (!std::isfinite(objective)) throw DivergedFit("non-finite objective at iteration " + std::to_string(t));
            r.objective_trace.push_back(objective);
            r.iterations = t;
            if (observer) observer(t, FactorModel{FactorMode::asymmetric, u, v, {}}, b);
            if (converged(r.objective_trace, hyper.tol)) {
                r.converged = true;
                break;
            }
        }
        r.factors.u = std::move(u);
        r.factors.v = std::move(v);
        r.b = std::move(b);
        return r;
    });
}

SymInit sym_init_from(const FitResult& warmup) {
    const Matrix& ut = warmup.factors.u;
    const Matrix& vt = warmup.factors.v;
    SymInit init;
    init.lambda.resize(ut.cols());
    for (Eigen::Index c = 0; c < ut.cols(); ++c) {
        init.lambda(c) = ut.col(c).dot(vt.col(c)) < 0.0 ? -1.0 : 1.0;
    }
    init.u = 0.5 * (ut + vt * init.lambda.asDiagonal());
    init.b = warmup.b;
    init.warmup = warmup;
    return init;
}

SymInit init_sym(const NetworkDataset& data, const Hyperparams& hyper) {
    if (!data.symmetric) throw std::invalid_argument("init_sym: dataset is not marked symmetric");
    return sym_init_from(fit_asym(data, hyper));
}

FitResult fit_sym(const NetworkDataset& data, const Hyperparams& hyper, const IterationObserver& observer) {
    hyper.validate();
    const SymInit init = init_sym(data, hyper);
    const std::size_t s = hyper.sparsity;

    return run_with_halving(init.warmup.hyper.step_delta, init.warmup.hyper.step_tau, [&](double delta, double tau) {
        FitResult r;
        r.hyper = hyper;
        r.hyper.step_delta = delta;
        r.hyper.step_tau = tau;
        r.sigma1_hat = init.warmup.sigma1_hat;
        r.warmup_iterations = init.warmup.iterations;
        r.factors.mode = FactorMode::symmetric;
        r.factors.lambda = init.lambda;

        Matrix u = init.u;
        const Vector& lambda = init.lambda;
        Tensor3 b = init.b;
        auto state = evaluate_loss(data, symmetric_theta(u, lambda), b, Gradients::theta, false);
        r.objective_trace.push_back(state.loss);
        if (observer) observer(0, FactorModel{FactorMode::symmetric, u, {}, lambda}, b);

        for (std::size_t t = 1; t <= hyper.max_iter; ++t) {
            u -= delta * symmetric_factor_grad(state.grad_theta, u, lambda);
            const Matrix theta = symmetric_theta(u, lambda);
            const auto at_u = evaluate_loss(data, theta, b, Gradients::all, false);
            b = b_step(b, at_u.grad_b, tau, s, true);

            state = evaluate_loss(data, theta, b, Gradients::theta, false);
            if (!std::isfinite(state.loss)) throw DivergedFit("non-finite objective at iteration " + std::to_string(t));
            r.objective_trace.push_back(state.loss);
            r.iterations = t;
            if (observer) observer(t, FactorModel{FactorMode::symmetric, u, {}, lambda}, b);
            if (converged(r.objective_trace, hyper.tol)) {
                r.converged = true;
                break;
            }
        }
        r.factors.u = std::move(u);
        r.b = std::move(b);
        return r;
    });
}

FitResult fit(const NetworkDataset& data, const Hyperparams& hyper) {
    return data.symmetric ? fit_sym(data, hyper) : fit_asym(data, hyper);
}

double procrustes_distance(const Matrix& m, const Matrix& m_star) {
    if (m.rows() != m_star.rows() || m.cols() != m_star.cols()) {
        throw DimensionError("procrustes_distance: shapes differ");
    }
    const Eigen::MatrixXd cross = m_star.transpose() * m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix rotation = svd.matrixU() * svd.matrixV().transpose();
    return (m - m_star * rotation).norm();
}

double distance_d(const FactorModel& m, const FactorModel& m_star, const Tensor3& b, const Tensor3& b_star,
                  double sigma1) {
    if (!b.same_shape(b_star)) throw DimensionError("distance_d: tensor shapes differ");
    const double d = procrustes_distance(m.stacked(), m_star.stacked());
    Tensor3 diff = b;
    diff.flat() -= b_star.flat();
    const double tb = frobenius_offdiag(diff);
    return d * d + tb * tb / sigma1;
}

FactorModel factor_truth(const Matrix& theta_star, std::size_t rank, FactorMode mode) {
    FactorModel f;
    f.mode = mode;
    const auto r = Eigen::Index(rank);
    if (mode == FactorMode::asymmetric) {
        const SvdResult svd = svd_r(theta_star, rank);
        const Vector root = svd.sigma.cwiseSqrt();
        f.u = svd.u * root.asDiagonal();
        f.v = svd.v * root.asDiagonal();
        return f;
    }
    const Eigen::MatrixXd sym = 0.5 * (theta_star + theta_star.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const Eigen::VectorXd values = eig.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) order[std::size_t(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index c) { return std::abs(values(a)) > std::abs(values(c)); });
    f.u.resize(sym.rows(), r);
    f.lambda.resize(r);
    for (Eigen::Index c = 0; c < r; ++c) {
        const Eigen::Index idx = order[std::size_t(c)];
        f.u.col(c) = eig.eigenvectors().col(idx) * std::sqrt(std::abs(values(idx)));
        f.lambda(c) = values(idx) < 0.0 ? -1.0 : 1.0;
    }
    return f;
}

double ebic_value(double loss, std::size_t n, std::size_t subjects, std::size_t p, std::size_t rank,
                  std::size_t sparsity) {
    const double nn = double(n) * double(n);
    const double penalty = std::log(nn * double(subjects)) + std::log(nn * double(p + 1));
    return 2.0 * double(subjects) * loss + penalty * (2.0 * double(n) * double(rank) + double(sparsity));
}

double ebic(const FitResult& fit, const NetworkDataset& data) {
    const double loss = neg_loglik(data, fit.theta(), fit.b);
    return ebic_value(loss, data.n, data.subjects(), data.covariate_count(), fit.hyper.rank, fit.hyper.sparsity);
}

TuneResult tune(const NetworkDataset& data, const std::vector<std::size_t>& ranks,
                const std::vector<double>& sparsity_fracs, const Hyperparams& hyper_template) {
    if (ranks.empty() || sparsity_fracs.empty()) throw std::invalid_argument("tune: empty grid");
    data.validate();

    TuneResult out;
    bool have_best = false;
    for (std::size_t r : ranks) {
        for (double frac : sparsity_fracs) {
            GridCell cell;
            cell.rank = r;
            cell.sparsity_frac = frac;
            cell.sparsity = sparsity_budget(frac, data.n, data.covariate_count(), data.symmetric);
            Hyperparams h = hyper_template;
            h.rank = r;
            h.sparsity = cell.sparsity;
            try {
                FitResult f = fit(data, h);
                cell.loss = neg_loglik(data, f.theta(), f.b);
                cell.ebic = ebic_value(cell.loss, data.n, data.subjects(), data.covariate_count(), r, cell.sparsity);
                cell.iterations = f.iterations;
                const bool better = !have_best || cell.ebic < out.grid[out.best_index].ebic ||
                                    (cell.ebic == out.grid[out.best_index].ebic &&
                                     std::pair(r, cell.sparsity) <
                                         std::pair(out.grid[out.best_index].rank, out.grid[out.best_index].sparsity));
                if (better) {
                    out.best = std::move(f);
                    out.best_index = out.grid.size();
                    have_best = true;
                }
            } catch (const DivergedFit& e) {
                cell.failed = true;
                cell.error = e.what();
            } catch (const DimensionError& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            cell.ebic = cell.failed ? std::numeric_limits<double>::quiet_NaN() : cell.ebic;
            out.grid.push_back(std::move(cell));
        }
    }
    if (!have_best) throw DivergedFit("tune: every grid cell failed");
    return out;
}

}  // namespace netreg
