#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace netreg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Dense d1 x d2 x d3 array stored as d3 consecutive row-major d1 x d2 slices.
///
/// Entry (i, j, k) lives at linear index k*d1*d2 + i*d2 + j, so the whole
/// tensor can also be viewed as a column-major (d1*d2) x d3 matrix whose k-th
/// column is the vectorized k-th slice.
class Tensor3 {
public:
    using SliceMap = Eigen::Map<Matrix>;
    using ConstSliceMap = Eigen::Map<const Matrix>;
    using FlatMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstFlatMap = Eigen::Map<const Eigen::MatrixXd>;

    Tensor3() = default;
    Tensor3(std::size_t d1, std::size_t d2, std::size_t d3)
        : d1_(d1), d2_(d2), d3_(d3), data_(d1 * d2 * d3, 0.0) {}

    static Tensor3 zeros(std::size_t d1, std::size_t d2, std::size_t d3) { return {d1, d2, d3}; }

    std::size_t d1() const { return d1_; }
    std::size_t d2() const { return d2_; }
    std::size_t d3() const { return d3_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return k * d1_ * d2_ + i * d2_ + j;
    }

    SliceMap slice(std::size_t k) {
        return SliceMap(data_.data() + k * d1_ * d2_, Eigen::Index(d1_), Eigen::Index(d2_));
    }
    ConstSliceMap slice(std::size_t k) const {
        return ConstSliceMap(data_.data() + k * d1_ * d2_, Eigen::Index(d1_), Eigen::Index(d2_));
    }

    // (d1*d2) x d3 view; column k is slice k flattened row-major.
    FlatMap flat() { return FlatMap(data_.data(), Eigen::Index(d1_ * d2_), Eigen::Index(d3_)); }
    ConstFlatMap flat() const {
        return ConstFlatMap(data_.data(), Eigen::Index(d1_ * d2_), Eigen::Index(d3_));
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::size_t nonzeros() const;
    bool same_shape(const Tensor3& other) const {
        return d1_ == other.d1_ && d2_ == other.d2_ && d3_ == other.d3_;
    }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t d1_ = 0, d2_ = 0, d3_ = 0;
    std::vector<double> data_;
};

struct SvdResult {
    Matrix u;      // d1 x r
    Vector sigma;  // descending
    Matrix v;      // d2 x r
};

/// Sum_k x_k * B(:,:,k).
Matrix mode3_product(const Tensor3& b, const Vector& x);

/// Component k is <M, B(:,:,k)>.
Vector tensor_matrix_inner(const Matrix& m, const Tensor3& b);

/// Keeps the s largest-magnitude entries and zeroes the rest. Ties at the
/// cut-off go to the smaller linear index.
Tensor3 truncate(const Tensor3& b, std::size_t s);

/// Truncation used by the fitters: diagonal tube fibers (i == j) are never
/// kept. With `mirrored`, (i,j,k) and (j,i,k) are ranked together by the
/// magnitude of the upper entry and kept or dropped as a pair; each kept pair
/// costs two units of the budget.
Tensor3 truncate_offdiagonal(const Tensor3& b, std::size_t s, bool mirrored);

/// Top-r singular triplets. The largest-magnitude entry of each left singular
/// vector is made non-negative.
SvdResult svd_r(const Matrix& m, std::size_t r);

double frobenius(const Matrix& m);
double frobenius(const Tensor3& b);

/// Frobenius norm over entries with i != j (every slice for tensors).
double frobenius_offdiag(const Matrix& m);
double frobenius_offdiag(const Tensor3& b);

/// Zeroes the diagonal of every slice.
void zero_diagonal(Tensor3& b);

}  // namespace netreg
