#include "doctest.h"

#include "../common/gradient_checks.hpp"

using namespace netreg;

namespace {

const EdgeFamily kFamilies[] = {EdgeFamily::bernoulli_logit, EdgeFamily::poisson_log, EdgeFamily::gaussian_identity};

NetworkDataset single(const Matrix& a, EdgeFamily family) {
    return NetworkDataset::from_networks({a}, Matrix(1, 0), family, false);
}

}  // namespace

TEST_CASE("family names and link functions") {
    CHECK(parse_family("bernoulli") == EdgeFamily::bernoulli_logit);
    CHECK(parse_family("count") == EdgeFamily::poisson_log);
    CHECK(parse_family(to_string(EdgeFamily::gaussian_identity)) == EdgeFamily::gaussian_identity);
    CHECK_THROWS(parse_family("gamma"));

    for (auto f : kFamilies) {
        for (double eta : {-3.0, -0.2, 0.0, 0.7, 4.0}) {
            CHECK(link(f, inverse_link(f, eta)) == doctest::Approx(eta).epsilon(1e-12));
            const double h = 1e-5;
            const double d1 = (cumulant(f, eta + h) - cumulant(f, eta - h)) / (2 * h);
            CHECK(d1 == doctest::Approx(inverse_link(f, eta)).epsilon(1e-8));
            CHECK(cumulant_d2(f, eta) > 0.0);
        }
    }
    for (double eta : {-30.0, -1.0, 0.0, 2.0, 30.0}) {
        const double p = inverse_link(EdgeFamily::bernoulli_logit, eta);
        CHECK(cumulant_d2(EdgeFamily::bernoulli_logit, eta) == doctest::Approx(p * (1 - p)));
        CHECK(cumulant_d2(EdgeFamily::bernoulli_logit, eta) <= 0.25);
    }
    CHECK(std::isfinite(cumulant(EdgeFamily::bernoulli_logit, 800.0)));
}

TEST_CASE("dataset validation") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 2.0;
    CHECK_THROWS_AS(single(a, EdgeFamily::bernoulli_logit).validate(), FamilyMismatch);
    a(0, 1) = 0.5;
    CHECK_THROWS_AS(single(a, EdgeFamily::poisson_log).validate(), FamilyMismatch);
    CHECK_NOTHROW(single(a, EdgeFamily::gaussian_identity).validate());

    Matrix s = Matrix::Zero(3, 3);
    s(0, 1) = 1.0;
    auto d = NetworkDataset::from_networks({s}, Matrix(1, 0), EdgeFamily::bernoulli_logit, true);
    CHECK_THROWS(d.validate());
    s(1, 0) = 1.0;
    s(2, 2) = 7.0;  // diagonal is never checked
    d = NetworkDataset::from_networks({s}, Matrix(1, 0), EdgeFamily::bernoulli_logit, true);
    CHECK_NOTHROW(d.validate());

    CHECK_THROWS_AS(NetworkDataset::from_networks({Matrix::Zero(3, 3), Matrix::Zero(4, 4)}, Matrix(2, 0),
                                                  EdgeFamily::bernoulli_logit, false),
                    DimensionError);
}

TEST_CASE("neg_loglik") {
    SUBCASE("Gaussian with theta equal to the network") {
        std::mt19937_64 rng(1);
        Matrix a = oracle::random_matrix(rng, 4, 4);
        const auto d = single(a, EdgeFamily::gaussian_identity);
        a.diagonal().setZero();
        CHECK(neg_loglik(d, d.adjacency(0), Tensor3(4, 4, 0)) == doctest::Approx(-0.5 * a.squaredNorm()).epsilon(1e-13));
    }

    SUBCASE("Bernoulli at zero is n(n-1) log 2") {
        std::mt19937_64 rng(2);
        const auto d = oracle::random_dataset(rng, 5, 3, 2, EdgeFamily::bernoulli_logit, true);
        CHECK(neg_loglik(d, Matrix::Zero(5, 5), Tensor3(5, 5, 2)) == doctest::Approx(20.0 * std::log(2.0)));
    }

    SUBCASE("matches per-edge loop on random instances") {
        std::mt19937_64 rng(3);
        for (auto f : kFamilies) {
            for (bool sym : {false, true}) {
                const auto d = oracle::random_dataset(rng, 4, 3, 2, f, sym);
                const Matrix theta = oracle::random_matrix(rng, 4, 4, 0.5);
                const Tensor3 b = oracle::random_tensor(rng, 4, 4, 2, 0.3);
                CHECK(neg_loglik(d, theta, b) == doctest::Approx(oracle::loop_loss(d, theta, b)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("diagonal of theta and B does not enter") {
        std::mt19937_64 rng(4);
        const auto d = oracle::random_dataset(rng, 4, 3, 2, EdgeFamily::bernoulli_logit, false);
        Matrix theta = oracle::random_matrix(rng, 4, 4);
        Tensor3 b = oracle::random_tensor(rng, 4, 4, 2);
        const double base = neg_loglik(d, theta, b);
        theta.diagonal().setConstant(7.0);
        b(1, 1, 0) = -9.0;
        CHECK(neg_loglik(d, theta, b) == base);
    }

    SUBCASE("log-link guard") {
        const auto d = single(Matrix::Ones(3, 3), EdgeFamily::poisson_log);
        CHECK_THROWS_AS(neg_loglik(d, Matrix::Constant(3, 3, 60.0), Tensor3(3, 3, 0)), DivergedFit);
    }
}

TEST_CASE("Gaussian loss differences equal half sum of squares") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = oracle::random_dataset(rng, 5, 4, 2, EdgeFamily::gaussian_identity, false);
        const Matrix t1 = oracle::random_matrix(rng, 5, 5), t2 = oracle::random_matrix(rng, 5, 5);
        const Tensor3 b = oracle::random_tensor(rng, 5, 5, 2);
        auto half_ss = [&](const Matrix& theta) {
            double ss = 0.0;
            for (std::size_t i = 0; i < d.subjects(); ++i) {
                const Matrix eta = theta + mode3_product(b, d.covariate_row(i));
                for (Eigen::Index j = 0; j < 5; ++j)
                    for (Eigen::Index l = 0; l < 5; ++l)
                        if (j != l) ss += std::pow(d.adjacency(i)(j, l) - eta(j, l), 2);
            }
            return 0.5 * ss / double(d.subjects());
        };
        CHECK(std::abs((neg_loglik(d, t1, b) - neg_loglik(d, t2, b)) - (half_ss(t1) - half_ss(t2))) < 1e-8);
    }
}

TEST_CASE("grad_theta") {
    SUBCASE("Bernoulli, theta = 0, all edges present") {
        Matrix a = Matrix::Ones(4, 4);
        a.diagonal().setZero();
        const auto d = NetworkDataset::from_networks({a, a}, Matrix(2, 0), EdgeFamily::bernoulli_logit, true);
        const Matrix g = grad_theta(d, Matrix::Zero(4, 4), Tensor3(4, 4, 0));
        for (Eigen::Index j = 0; j < 4; ++j)
            for (Eigen::Index l = 0; l < 4; ++l) CHECK(g(j, l) == doctest::Approx(j == l ? 0.0 : -0.5));
    }

    SUBCASE("Gaussian stationarity at the mean network") {
        std::mt19937_64 rng(6);
        const auto d = oracle::random_dataset(rng, 5, 6, 0, EdgeFamily::gaussian_identity, false);
        Matrix mean = Matrix::Zero(5, 5);
        for (std::size_t i = 0; i < d.subjects(); ++i) mean += d.adjacency(i);
        mean /= double(d.subjects());
        CHECK(grad_theta(d, mean, Tensor3(5, 5, 0)).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("diagonals are exactly zero") {
        std::mt19937_64 rng(7);
        const auto d = oracle::random_dataset(rng, 5, 3, 2, EdgeFamily::poisson_log, false);
        const Matrix theta = oracle::random_matrix(rng, 5, 5, 0.3);
        const Tensor3 b = oracle::random_tensor(rng, 5, 5, 2, 0.3);
        CHECK(grad_theta(d, theta, b).diagonal().isZero(0.0));
        const Tensor3 gb = grad_b(d, theta, b);
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t j = 0; j < 5; ++j) CHECK(gb(j, j, k) == 0.0);
    }
}

TEST_CASE("grad_b special cases") {
    std::mt19937_64 rng(8);
    auto d = oracle::random_dataset(rng, 4, 3, 2, EdgeFamily::bernoulli_logit, false);
    const Matrix theta = oracle::random_matrix(rng, 4, 4);
    d.covariates.setZero();
    CHECK(frobenius(grad_b(d, theta, Tensor3(4, 4, 2))) == 0.0);

    d.covariates = oracle::random_matrix(rng, 3, 1).replicate(1, 2);
    const Tensor3 g = grad_b(d, theta, Tensor3(4, 4, 2));
    CHECK(Matrix(g.slice(0)) == Matrix(g.slice(1)));
}

TEST_CASE("augmented loss") {
    std::mt19937_64 rng(9);
    const auto d = oracle::random_dataset(rng, 5, 3, 2, EdgeFamily::bernoulli_logit, true);
    const Tensor3 b = oracle::random_tensor(rng, 5, 5, 2, 0.2);
    const Matrix w = oracle::random_matrix(rng, 5, 2, 0.5);

    CHECK(balance_penalty(w, w) == 0.0);
    CHECK(aug_loss(d, w, w, b) == doctest::Approx(neg_loglik(d, w * w.transpose(), b)));
    CHECK(aug_loss(d, 2.0 * w, 0.5 * w, b) > aug_loss(d, w, w, b));
    CHECK(neg_loglik(d, (2.0 * w) * (0.5 * w).transpose(), b) == doctest::Approx(neg_loglik(d, w * w.transpose(), b)));

    const Matrix u = oracle::random_matrix(rng, 5, 2), v = oracle::random_matrix(rng, 5, 2);
    const Matrix diff = u.transpose() * u - v.transpose() * v;
    CHECK(aug_loss(d, u, v, b) == doctest::Approx(neg_loglik(d, u * v.transpose(), b) + diff.squaredNorm() / 8.0));

    // rotation invariance and equivariance of gradients
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::random_matrix(rng, 2, 2)).householderQ();
    CHECK(std::abs(aug_loss(d, u * q, v * q, b) - aug_loss(d, u, v, b)) < 1e-10);
    CHECK((grad_u(d, u * q, v * q, b) - grad_u(d, u, v, b) * q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((grad_v(d, u * q, v * q, b) - grad_v(d, u, v, b) * q).cwiseAbs().maxCoeff() < 1e-10);

    CHECK_THROWS_AS(aug_loss(d, u, oracle::random_matrix(rng, 5, 3), b), DimensionError);
}

TEST_CASE("grad_u vanishes at balanced stationary factors") {
    // Gaussian data with every network equal to w w' off the diagonal: theta = w w' is stationary.
    std::mt19937_64 rng(10);
    const Matrix w = oracle::random_matrix(rng, 5, 2);
    const Matrix a = w * w.transpose();
    const auto d = NetworkDataset::from_networks({a, a}, Matrix(2, 0), EdgeFamily::gaussian_identity, true);
    CHECK(grad_u(d, w, w, Tensor3(5, 5, 0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients match central differences") {
    for (auto f : kFamilies) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto e = oracle::check_gradients(f, 1000 + seed);
            CAPTURE(to_string(f));
            CAPTURE(seed);
            CHECK(e.theta <= 1e-5);
            CHECK(e.b <= 1e-5);
            CHECK(e.u <= 1e-5);
            CHECK(e.v <= 1e-5);
            CHECK(e.sym_u <= 1e-5);
        }
    }
}

TEST_CASE("symmetric theta is exactly symmetric") {
    std::mt19937_64 rng(11);
    const Matrix u = oracle::random_matrix(rng, 7, 3);
    Vector lambda(3);
    lambda << 1, -1, 1;
    const Matrix t = symmetric_theta(u, lambda);
    CHECK(t == t.transpose());
}

TEST_CASE("evaluation is bit-reproducible") {
    std::mt19937_64 rng(12);
    const auto d = oracle::random_dataset(rng, 8, 150, 3, EdgeFamily::bernoulli_logit, true);
    const Matrix theta = oracle::random_matrix(rng, 8, 8);
    const Tensor3 b = oracle::random_tensor(rng, 8, 8, 3);
    const auto first = evaluate_loss(d, theta, b);
    const auto second = evaluate_loss(d, theta, b);
    CHECK(first.loss == second.loss);
    CHECK(first.grad_theta == second.grad_theta);
    CHECK(first.grad_b == second.grad_b);
}
