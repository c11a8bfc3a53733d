#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "radiomap/errors.hpp"

namespace radiomap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Dims {
    Index I = 1;
    Index J = 1;
    Index K = 1;

    Index numel() const { return I * J * K; }
    Index along(int mode) const;
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense I x J x K tensor. Element (i,j,k) lives at (k*J + j)*I + i, so the
/// storage read as an IJ x K column-major matrix is exactly the mode-3 unfolding.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims dims);  // zero filled
    Tensor3(Dims dims, std::vector<double> data);

    static Tensor3 from_mode3(const Matrix& x3, Dims dims);

    const Dims& dims() const { return dims_; }
    Index size() const { return static_cast<Index>(data_.size()); }

    double operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }
    double& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    Eigen::Map<const Matrix> mode3() const { return {data_.data(), dims_.I * dims_.J, dims_.K}; }
    Eigen::Map<Matrix> mode3() { return {data_.data(), dims_.I * dims_.J, dims_.K}; }

    /// Frontal slab X(:,:,k) as an I x J matrix view.
    Eigen::Map<const Matrix> slab(Index k) const {
        return {data_.data() + k * dims_.I * dims_.J, dims_.I, dims_.J};
    }

    double squared_norm() const;
    double norm() const;
    bool all_finite() const;

private:
    std::size_t offset(Index i, Index j, Index k) const {
        return static_cast<std::size_t>((k * dims_.J + j) * dims_.I + i);
    }

    Dims dims_{};
    std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// LL1 factors: A[r] is I x L_r, B[r] is J x L_r, C is K x R.
struct Ll1Factors {
    std::vector<Matrix> A;
    std::vector<Matrix> B;
    Matrix C;

    Index R() const { return C.cols(); }
    std::vector<Index> ranks() const;
    Index total_rank() const;
    Dims dims() const;

    /// Throws DimensionError naming the first factor that breaks the shape rules.
    void validate() const;

    /// [A_1, ..., A_R] as one I x sum(L_r) matrix.
    Matrix stacked_A() const;
    Matrix stacked_B() const;

    /// Rebuild from stacked A (I x LR), B (J x LR) with uniform block width L.
    static Ll1Factors from_stacked(const Matrix& A, const Matrix& B, const Matrix& C, Index L);

    bool all_finite() const;
};

Tensor3 ll1_synthesize(const Ll1Factors& factors);

struct UnfoldedTensor {
    int mode = 3;
    Matrix matrix;
    Dims origin;
};

/// Mode-n unfolding. Mode 1 is JK x I with (j,k) at row k*J + j, mode 2 is
/// IK x J with (i,k) at row k*I + i, mode 3 is IJ x K with (i,j) at row j*I + i.
UnfoldedTensor unfold(const Tensor3& t, int mode);
Tensor3 fold(const Matrix& matrix, int mode, Dims dims);
inline Tensor3 fold(const UnfoldedTensor& u) { return fold(u.matrix, u.mode, u.origin); }

/// G = X x_mode M, where M has as many columns as X has entries along `mode`.
Tensor3 mode_product(const Tensor3& t, const Matrix& M, int mode);

/// Column-wise Kronecker product; row of (i,j) is i*J + j.
Matrix khatri_rao(const Matrix& X, const Matrix& Y);

/// [c_1 kron M_1, ..., c_R kron M_R] for M split column-wise into blocks of the given widths.
Matrix partition_khatri_rao(const Matrix& C, const Matrix& M, std::span<const Index> widths);
Matrix partition_khatri_rao(const Matrix& C, const Matrix& M, Index uniform_width);

/// IJ x R matrix whose column r is vec(A_r B_r^T), (i,j) at row j*I + i.
Matrix slf_matrix(const Ll1Factors& factors);

/// Row-selection matrix: rows of the n x n identity listed in `rows`.
Matrix selection_matrix(std::span<const Index> rows, Index n);

}  // namespace radiomap
