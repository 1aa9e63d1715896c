#include "doctest.h"

#include "../common/oracles.hpp"
#include "netreg/simulation.hpp"

using namespace netreg;

namespace {

SimulatedData small_glsnet(std::size_t n, std::size_t subjects, std::uint64_t seed, std::size_t p = 3) {
    SimConfig cfg;
    cfg.n = n;
    cfg.p = p;
    cfg.subjects = subjects;
    cfg.rank = 2;
    cfg.s0 = 0.1;
    cfg.seed = seed;
    return gen_glsnet(cfg);
}

NetworkDataset as_directed(NetworkDataset d) {
    d.symmetric = false;
    return d;
}

}  // namespace

TEST_CASE("sparsity budget") {
    CHECK(sparsity_budget(0.1, 50, 10, false) == 2450);
    CHECK(sparsity_budget(0.1, 50, 10, true) == 2450);
    CHECK(sparsity_budget(0.3, 50, 1, false) == 735);
    CHECK(sparsity_budget(0.01, 5, 1, true) == 0);
    CHECK(sparsity_budget(0.15, 5, 1, true) == 2);  // floor(3/2) pairs
    CHECK(sparsity_budget(1.0, 4, 2, false) == 24);
    CHECK_THROWS(sparsity_budget(1.5, 4, 2, false));
}

TEST_CASE("hyperparameter validation") {
    Hyperparams h;
    h.rank = 0;
    CHECK_THROWS(h.validate());
    h.rank = 1;
    h.tol = 0.0;
    CHECK_THROWS(h.validate());
}

TEST_CASE("init_asym") {
    SUBCASE("exact low rank link matrix is reconstructed") {
        Matrix block(2, 2);
        block << 0, 1, 1, 0;
        Matrix a(4, 4);
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) a.block(2 * i, 2 * j, 2, 2).setConstant(block(i, j));
        a *= 1.7;
        const auto d = NetworkDataset::from_networks({a, a, a}, Matrix(3, 0), EdgeFamily::gaussian_identity, true);
        const auto init = init_asym(d, 2);
        CHECK((init.u * init.v.transpose() - a).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(init.b.nonzeros() == 0);
        CHECK(init.sigma1 == doctest::Approx(2 * 1.7));
    }

    SUBCASE("balanced by construction") {
        std::mt19937_64 rng(1);
        const auto d = oracle::random_dataset(rng, 8, 5, 2, EdgeFamily::bernoulli_logit, false);
        const auto init = init_asym(d, 3);
        CHECK((init.u.transpose() * init.u - init.v.transpose() * init.v).norm() <= 1e-10);
    }

    SUBCASE("clipping keeps the logit start finite") {
        Matrix a = Matrix::Zero(4, 4);
        a(0, 1) = a(1, 0) = 1.0;
        const auto d = NetworkDataset::from_networks({a, a}, Matrix(2, 0), EdgeFamily::bernoulli_logit, true);
        const Matrix link0 = initial_link_matrix(d);
        CHECK(link0.allFinite());
        CHECK(link0(0, 2) == doctest::Approx(std::log(0.25 / 0.75)));  // eps = 1/(2N) = 1/4
        CHECK(link0(0, 1) == doctest::Approx(std::log(0.75 / 0.25)));
        CHECK(link0.diagonal().isZero(0.0));
        CHECK(init_asym(d, 2).u.allFinite());
    }

    SUBCASE("errors") {
        std::mt19937_64 rng(2);
        const auto d = oracle::random_dataset(rng, 4, 2, 1, EdgeFamily::bernoulli_logit, false);
        CHECK_THROWS_AS(init_asym(d, 5), DimensionError);
    }
}

TEST_CASE("fit_asym") {
    SUBCASE("s = 0 keeps B at zero") {
        const auto sim = small_glsnet(15, 60, 3);
        Hyperparams h;
        h.rank = 2;
        h.sparsity = 0;
        const auto fit = fit_asym(as_directed(sim.data), h);
        CHECK(fit.b.nonzeros() == 0);
        CHECK(fit.objective_trace.size() == fit.iterations + 1);
    }

    SUBCASE("converges quickly with a decreasing objective") {
        const auto sim = small_glsnet(20, 100, 4);
        Hyperparams h;
        h.rank = 2;
        h.sparsity = sparsity_budget(0.1, 20, 3, true);
        const auto fit = fit_asym(sim.data, h);
        CHECK(fit.converged);
        CHECK(fit.iterations <= 50);
        CHECK(fit.objective_trace.back() < fit.objective_trace.front());
        REQUIRE(fit.step_history.size() == 1);
        CHECK(fit.step_history[0].failure.empty());
        CHECK(fit.hyper.step_delta > 0.0);
    }

    SUBCASE("budget holds at every iterate and B stays off the diagonal") {
        const auto sim = small_glsnet(12, 80, 5);
        Hyperparams h;
        h.rank = 2;
        h.sparsity = 30;
        bool ok = true;
        fit_asym(sim.data, h, [&](std::size_t, const FactorModel&, const Tensor3& b) {
            ok = ok && b.nonzeros() <= 30;
            for (std::size_t k = 0; k < b.d3(); ++k)
                for (std::size_t j = 0; j < b.d1(); ++j) ok = ok && b(j, j, k) == 0.0;
        });
        CHECK(ok);
    }

    SUBCASE("balance drift stays at the initial level") {
        const auto sim = small_glsnet(20, 100, 4);
        Hyperparams h;
        h.rank = 2;
        h.sparsity = sparsity_budget(0.1, 20, 3, true);
        h.tol = 1e-12;
        h.max_iter = 20000;
        const auto init = init_asym(sim.data, 2);
        const auto fit = fit_asym(sim.data, h);
        const double start = (init.u.transpose() * init.u - init.v.transpose() * init.v).norm();
        const double end = (fit.factors.u.transpose() * fit.factors.u - fit.factors.v.transpose() * fit.factors.v).norm();
        CHECK(fit.converged);
        CHECK(end <= start + 1e-6);
    }

    SUBCASE("Gaussian fit beats the unconstrained least-squares oracle") {
        std::mt19937_64 rng(7);
        const std::size_t n = 10, p = 2, subjects = 300;
        const Matrix w = oracle::random_matrix(rng, n, 2);
        const Matrix theta_star = w * w.transpose();
        Tensor3 b_star(n, n, p);
        b_star(0, 3, 0) = 1.5;
        b_star(4, 7, 1) = -1.0;
        b_star(8, 2, 0) = 2.0;
        const Matrix x = oracle::random_matrix(rng, subjects, p);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<Matrix> nets;
        for (std::size_t i = 0; i < subjects; ++i) {
            Matrix a = theta_star + mode3_product(b_star, x.row(Eigen::Index(i)).transpose());
            for (Eigen::Index j = 0; j < a.rows(); ++j)
                for (Eigen::Index l = 0; l < a.cols(); ++l) a(j, l) += noise(rng);
            nets.push_back(a);
        }
        const auto d = NetworkDataset::from_networks(nets, x, EdgeFamily::gaussian_identity, false);

        Hyperparams h;
        h.rank = 2;
        h.sparsity = 3;
        h.tol = 1e-10;
        h.max_iter = 3000;
        const auto fit = fit_asym(d, h);

        // per-edge regression of A_jl on (1, x)
        Eigen::MatrixXd design(Eigen::Index(subjects), Eigen::Index(p + 1));
        design.col(0).setOnes();
        design.rightCols(Eigen::Index(p)) = x;
        const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(d.responses.transpose());
        double ls_err = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l)
                if (j != l) ls_err += std::pow(coef(0, Eigen::Index(j * n + l)) - theta_star(Eigen::Index(j), Eigen::Index(l)), 2);
        const double fit_err = frobenius_offdiag(Matrix(fit.theta() - theta_star));
        CHECK(fit_err < std::sqrt(ls_err));
        CHECK(select_edges(fit.b) == select_edges(b_star));
    }
}

TEST_CASE("geometric decay of the distance on noiseless Gaussian data") {
    std::mt19937_64 rng(8);
    const std::size_t n = 12;
    const Matrix w = oracle::random_matrix(rng, n, 2);
    const Matrix z = oracle::random_matrix(rng, n, 2);
    const Matrix theta_star = w * z.transpose();
    const auto d = NetworkDataset::from_networks({theta_star, theta_star}, Matrix(2, 0), EdgeFamily::gaussian_identity,
                                                 false);
    const FactorModel truth = factor_truth(theta_star, 2, FactorMode::asymmetric);
    const double sigma1 = svd_r(theta_star, 1).sigma(0);
    const Tensor3 none(n, n, 0);

    Hyperparams h;
    h.rank = 2;
    h.sparsity = 0;
    h.step_delta = 0.1 / sigma1;
    h.tol = 1e-300;
    h.max_iter = 25;
    std::vector<double> dist;
    fit_asym(d, h, [&](std::size_t, const FactorModel& m, const Tensor3& b) {
        dist.push_back(distance_d(m, truth, b, none, sigma1));
    });
    REQUIRE(dist.size() == 26);
    for (std::size_t t = 0; t < 20; ++t) {
        CAPTURE(t);
        CHECK(dist[t + 5] < dist[t]);
    }
}

TEST_CASE("symmetric initialization") {
    SUBCASE("PSD truth gives lambda = +1") {
        const auto sim = small_glsnet(15, 100, 9);
        Hyperparams h;
        h.rank = 2;
        h.sparsity = sparsity_budget(0.1, 15, 3, true);
        const auto init = init_sym(sim.data, h);
        CHECK(init.lambda == Vector::Ones(2));
        const Matrix t = symmetric_theta(init.u, init.lambda);
        CHECK(t == t.transpose());
    }

    SUBCASE("equal factors are kept") {
        std::mt19937_64 rng(10);
        FitResult warm;
        warm.factors.u = oracle::random_matrix(rng, 6, 2);
        warm.factors.v = warm.factors.u;
        warm.b = Tensor3(6, 6, 1);
        const auto init = sym_init_from(warm);
        CHECK(init.lambda == Vector::Ones(2));
        CHECK(init.u == warm.factors.u);
    }

    SUBCASE("sign read from column inner products") {
        std::mt19937_64 rng(11);
        FitResult warm;
        warm.factors.u = oracle::random_matrix(rng, 6, 2);
        warm.factors.v = warm.factors.u;
        warm.factors.v.col(1) *= -1.0;
        warm.b = Tensor3(6, 6, 0);
        const auto init = sym_init_from(warm);
        CHECK(init.lambda(0) == 1.0);
        CHECK(init.lambda(1) == -1.0);
        CHECK((init.u - warm.factors.u).cwiseAbs().maxCoeff() < 1e-15);
    }

    SUBCASE("requires symmetric data") {
        const auto sim = small_glsnet(8, 20, 12);
        Hyperparams h;
        CHECK_THROWS(init_sym(as_directed(sim.data), h));
    }
}

TEST_CASE("fit_sym") {
    const auto sim = small_glsnet(20, 100, 13);
    Hyperparams h;
    h.rank = 2;
    h.sparsity = sparsity_budget(0.1, 20, 3, true);
    bool symmetric = true, budget = true;
    Vector first_lambda;
    bool lambda_fixed = true;
    const auto fit = fit_sym(sim.data, h, [&](std::size_t t, const FactorModel& m, const Tensor3& b) {
        const Matrix theta = m.theta();
        symmetric = symmetric && (theta - theta.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
        budget = budget && b.nonzeros() <= h.sparsity;
        for (std::size_t k = 0; k < b.d3(); ++k) {
            symmetric = symmetric && Matrix(b.slice(k)) == Matrix(b.slice(k).transpose());
        }
        if (t == 0) first_lambda = m.lambda;
        lambda_fixed = lambda_fixed && m.lambda == first_lambda;
    });
    CHECK(symmetric);
    CHECK(budget);
    CHECK(lambda_fixed);
    CHECK(fit.factors.mode == FactorMode::symmetric);
    CHECK(fit.objective_trace.back() < fit.objective_trace.front());
    CHECK(fit.warmup_iterations > 0);
    CHECK(fit.objective_trace.size() == fit.iterations + 1);
}

TEST_CASE("divergence is reported with the halving history") {
    std::mt19937_64 rng(14);
    const auto d = oracle::random_dataset(rng, 6, 4, 1, EdgeFamily::poisson_log, true);
    Hyperparams h;
    h.rank = 2;
    h.step_delta = 1e8;
    h.step_tau = 1e8;
    try {
        fit(d, h);
        FAIL("expected divergence");
    } catch (const DivergedFit& e) {
        const std::string what = e.what();
        CHECK(what.find("4 attempts") != std::string::npos);
        CHECK(what.find("delta=1.25e+07") != std::string::npos);
    }
}

TEST_CASE("distance_d") {
    std::mt19937_64 rng(15);
    FactorModel m;
    m.u = oracle::random_matrix(rng, 4, 2);
    m.v = oracle::random_matrix(rng, 4, 2);
    const Tensor3 b = oracle::random_tensor(rng, 4, 4, 2);
    CHECK(distance_d(m, m, b, b, 2.0) < 1e-20);

    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::random_matrix(rng, 2, 2)).householderQ();
        FactorModel rotated = m;
        rotated.u = m.u * q;
        rotated.v = m.v * q;
        CHECK(distance_d(m, rotated, b, b, 2.0) < 1e-10);

        FactorModel other;
        other.u = oracle::random_matrix(rng, 4, 2);
        other.v = oracle::random_matrix(rng, 4, 2);
        FactorModel other_rot = other;
        other_rot.u = other.u * q;
        other_rot.v = other.v * q;
        CHECK(std::abs(distance_d(m, other, b, b, 1.0) - distance_d(m, other_rot, b, b, 1.0)) < 1e-10);
    }

    SUBCASE("Procrustes matches a grid over rotations and reflections") {
        const Matrix a = oracle::random_matrix(rng, 4, 2), target = oracle::random_matrix(rng, 4, 2);
        double best = INFINITY;
        const int steps = 20000;
        for (int s = 0; s < steps; ++s) {
            const double angle = 2.0 * M_PI * s / steps;
            Matrix g(2, 2);
            g << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
            best = std::min(best, (a - target * g).norm());
            Matrix r(2, 2);
            r << std::cos(angle), std::sin(angle), std::sin(angle), -std::cos(angle);
            best = std::min(best, (a - target * r).norm());
        }
        const double exact = procrustes_distance(a, target);
        CHECK(exact <= best + 1e-12);
        CHECK(best - exact < 1e-5);
    }

    SUBCASE("tensor term scaled by sigma1 and diagonal ignored") {
        Tensor3 c = b;
        c(0, 1, 0) += 2.0;
        c(2, 2, 1) += 100.0;
        CHECK(distance_d(m, m, c, b, 4.0) == doctest::Approx(1.0));
    }
}

TEST_CASE("factor_truth") {
    std::mt19937_64 rng(16);
    const Matrix w = oracle::random_matrix(rng, 6, 3);
    Vector signs(3);
    signs << 1, -1, 1;
    const Matrix theta = w * signs.asDiagonal() * w.transpose();
    const auto sym = factor_truth(theta, 3, FactorMode::symmetric);
    CHECK((sym.theta() - theta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(sym.lambda.sum() == doctest::Approx(1.0));

    const auto asym = factor_truth(theta, 3, FactorMode::asymmetric);
    CHECK((asym.theta() - theta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((asym.u.transpose() * asym.u - asym.v.transpose() * asym.v).norm() < 1e-10);
}

TEST_CASE("eBIC") {
    const double want = 400.0 + (std::log(500000.0) + std::log(27500.0)) * 300.0;
    CHECK(std::abs(ebic_value(1.0, 50, 200, 10, 2, 100) - want) < 1e-6);
    CHECK(ebic_value(1.0, 50, 200, 10, 2, 100) == doctest::Approx(7403.3).epsilon(1e-5));

    const double per_unit = std::log(2500.0 * 200.0) + std::log(2500.0 * 11.0);
    CHECK(ebic_value(1.0, 50, 200, 10, 2, 101) - ebic_value(1.0, 50, 200, 10, 2, 100) == doctest::Approx(per_unit));
    CHECK(ebic_value(1.0, 50, 200, 10, 3, 100) - ebic_value(1.0, 50, 200, 10, 2, 100) ==
          doctest::Approx(100.0 * per_unit));

    const auto sim = small_glsnet(10, 30, 17);
    Hyperparams h;
    h.rank = 2;
    h.sparsity = 10;
    const auto f = fit(sim.data, h);
    CHECK(ebic(f, sim.data) == ebic(f, sim.data));
    CHECK(ebic(f, sim.data) == doctest::Approx(ebic_value(neg_loglik(sim.data, f.theta(), f.b), 10, 30, 3, 2, 10)));
}

TEST_CASE("tune") {
    const auto sim = small_glsnet(12, 60, 18);
    Hyperparams h;

    SUBCASE("single cell equals a direct fit") {
        const auto t = tune(sim.data, {2}, {0.1}, h);
        Hyperparams direct = h;
        direct.rank = 2;
        direct.sparsity = sparsity_budget(0.1, 12, 3, true);
        const auto f = fit(sim.data, direct);
        CHECK(t.grid.size() == 1);
        CHECK(t.best.theta() == f.theta());
        CHECK(t.best.b == f.b);
    }

    SUBCASE("failing cells are recorded and skipped") {
        const auto t = tune(sim.data, {1, 13}, {0.05}, h);
        REQUIRE(t.grid.size() == 2);
        CHECK(t.grid[1].failed);
        CHECK(std::isnan(t.grid[1].ebic));
        CHECK_FALSE(t.grid[1].error.empty());
        CHECK(t.best_index == 0);
    }

    SUBCASE("ties go to the first of equal cells") {
        const auto t = tune(sim.data, {2}, {0.1, 0.1}, h);
        CHECK(t.grid[0].ebic == t.grid[1].ebic);
        CHECK(t.best_index == 0);
    }

    CHECK_THROWS(tune(sim.data, {}, {0.1}, h));
}
