#include "netreg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace netreg {

std::size_t Tensor3::nonzeros() const {
    return static_cast<std::size_t>(
        std::count_if(data_.begin(), data_.end(), [](double v) { return v != 0.0; }));
}

Matrix mode3_product(const Tensor3& b, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != b.d3()) {
        throw DimensionError("mode3_product: vector length " + std::to_string(x.size()) +
                             " does not match tensor depth " + std::to_string(b.d3()));
    }
    Matrix out = Matrix::Zero(Eigen::Index(b.d1()), Eigen::Index(b.d2()));
    if (b.d3() == 0) return out;
    Eigen::Map<Eigen::VectorXd>(out.data(), out.size()).noalias() = b.flat() * x;
    return out;
}

Vector tensor_matrix_inner(const Matrix& m, const Tensor3& b) {
    if (static_cast<std::size_t>(m.rows()) != b.d1() || static_cast<std::size_t>(m.cols()) != b.d2()) {
        throw DimensionError("tensor_matrix_inner: matrix shape does not match tensor slices");
    }
    Eigen::Map<const Eigen::VectorXd> mv(m.data(), m.size());
    return b.flat().transpose() * mv;
}

namespace {

// Orders candidate indices by decreasing magnitude, then increasing index.
struct ByMagnitude {
    const std::vector<double>* key;
    bool operator()(std::size_t a, std::size_t c) const {
        const double ka = (*key)[a], kc = (*key)[c];
        if (ka != kc) return ka > kc;
        return a < c;
    }
};

std::vector<std::size_t> top_indices(std::vector<std::size_t> candidates,
                                     const std::vector<double>& magnitude, std::size_t keep) {
    keep = std::min(keep, candidates.size());
    ByMagnitude cmp{&magnitude};
    std::nth_element(candidates.begin(), candidates.begin() + std::ptrdiff_t(keep), candidates.end(), cmp);
    candidates.resize(keep);
    return candidates;
}

}  // namespace

Tensor3 truncate(const Tensor3& b, std::size_t s) {
    if (s >= b.size()) return b;
    Tensor3 out(b.d1(), b.d2(), b.d3());
    if (s == 0) return out;

    std::vector<double> magnitude(b.size());
    std::transform(b.data().begin(), b.data().end(), magnitude.begin(),
                   [](double v) { return std::abs(v); });
    std::vector<std::size_t> all(b.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t idx : top_indices(std::move(all), magnitude, s)) out.data()[idx] = b.data()[idx];
    return out;
}

Tensor3 truncate_offdiagonal(const Tensor3& b, std::size_t s, bool mirrored) {
    if (mirrored && b.d1() != b.d2()) {
        throw DimensionError("truncate_offdiagonal: mirrored truncation needs square slices");
    }
    Tensor3 out(b.d1(), b.d2(), b.d3());
    std::vector<double> magnitude(b.size());
    std::transform(b.data().begin(), b.data().end(), magnitude.begin(),
                   [](double v) { return std::abs(v); });

    std::vector<std::size_t> candidates;
    candidates.reserve(b.size());
    for (std::size_t k = 0; k < b.d3(); ++k) {
        for (std::size_t i = 0; i < b.d1(); ++i) {
            for (std::size_t j = mirrored ? i + 1 : 0; j < b.d2(); ++j) {
                if (i != j) candidates.push_back(b.index(i, j, k));
            }
        }
    }

    const std::size_t keep = mirrored ? s / 2 : s;
    for (std::size_t idx : top_indices(std::move(candidates), magnitude, keep)) {
        out.data()[idx] = b.data()[idx];
        if (mirrored) {
            const std::size_t plane = b.d1() * b.d2();
            const std::size_t k = idx / plane, i = (idx % plane) / b.d2(), j = idx % b.d2();
            out(j, i, k) = b(j, i, k);
        }
    }
    return out;
}

SvdResult svd_r(const Matrix& m, std::size_t r) {
    const auto min_dim = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
    if (r > min_dim) {
        throw DimensionError("svd_r: rank " + std::to_string(r) + " exceeds min dimension " +
                             std::to_string(min_dim));
    }
    const auto rr = Eigen::Index(r);
    Eigen::MatrixXd dense = m;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);

    SvdResult out;
    out.u = svd.matrixU().leftCols(rr);
    out.v = svd.matrixV().leftCols(rr);
    out.sigma = svd.singularValues().head(rr);
    for (Eigen::Index c = 0; c < rr; ++c) {
        Eigen::Index arg = 0;
        out.u.col(c).cwiseAbs().maxCoeff(&arg);
        if (out.u(arg, c) < 0.0) {
            out.u.col(c) *= -1.0;
            out.v.col(c) *= -1.0;
        }
    }
    return out;
}

double frobenius(const Matrix& m) { return m.norm(); }

double frobenius(const Tensor3& b) {
    double acc = 0.0;
    for (double v : b.data()) acc += v * v;
    return std::sqrt(acc);
}

double frobenius_offdiag(const Matrix& m) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (i != j) acc += m(i, j) * m(i, j);
    return std::sqrt(acc);
}

double frobenius_offdiag(const Tensor3& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < b.d3(); ++k)
        for (std::size_t i = 0; i < b.d1(); ++i)
            for (std::size_t j = 0; j < b.d2(); ++j)
                if (i != j) acc += b(i, j, k) * b(i, j, k);
    return std::sqrt(acc);
}

void zero_diagonal(Tensor3& b) {
    const std::size_t n = std::min(b.d1(), b.d2());
    for (std::size_t k = 0; k < b.d3(); ++k)
        for (std::size_t i = 0; i < n; ++i) b(i, i, k) = 0.0;
}

}  // namespace netreg
