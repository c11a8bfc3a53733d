#pragma once

#include <random>

#include "radiomap/scenario.hpp"
#include "radiomap/tensor.hpp"

namespace radiomap::testing {

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

inline Ll1Factors random_factors(Dims d, Index L, Index R, Rng& rng) {
    Ll1Factors f;
    for (Index r = 0; r < R; ++r) {
        f.A.push_back(gaussian(d.I, L, rng));
        f.B.push_back(gaussian(d.J, L, rng));
    }
    f.C = gaussian(d.K, R, rng);
    return f;
}

inline Tensor3 random_tensor(Dims d, Rng& rng) {
    return Tensor3::from_mode3(gaussian(d.I * d.J, d.K, rng), d);
}

inline double rel_err(const Matrix& a, const Matrix& b) {
    double nb = b.norm();
    return (a - b).norm() / (nb > 0 ? nb : 1.0);
}

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    double m = 0.0;
    for (Index t = 0; t < a.size(); ++t) m = std::max(m, std::abs(a.data()[t] - b.data()[t]));
    return m;
}

/// Entrywise sum_r sum_l A_r(i,l) B_r(j,l) C(k,r).
inline double ll1_entry(const Ll1Factors& f, Index i, Index j, Index k) {
    double v = 0.0;
    for (Index r = 0; r < f.R(); ++r)
        for (Index l = 0; l < f.A[r].cols(); ++l) v += f.A[r](i, l) * f.B[r](j, l) * f.C(k, r);
    return v;
}

}  // namespace radiomap::testing

#include <functional>

#include <Eigen/QR>

namespace radiomap::testing {

/// Stacked factor for `mode` (1 = A, 2 = B, 3 = C) as a flat vector, column-major.
inline Matrix block_of(const Ll1Factors& f, int mode) {
    return mode == 1 ? f.stacked_A() : mode == 2 ? f.stacked_B() : f.C;
}

inline Ll1Factors with_block(const Ll1Factors& f, int mode, const Matrix& m, Index L) {
    if (mode == 3) {
        Ll1Factors g = f;
        g.C = m;
        return g;
    }
    return mode == 1 ? Ll1Factors::from_stacked(m, f.stacked_B(), f.C, L)
                     : Ll1Factors::from_stacked(f.stacked_A(), m, f.C, L);
}

/// Independent block minimizer: the observed model is linear in the chosen
/// block, so its design matrix is assembled column by column from unit
/// perturbations and the ridge problem is solved by dense QR.
inline Matrix dense_block_oracle(const Ll1Factors& f, int mode, Index L,
                                 const std::function<Vector(const Ll1Factors&)>& observe, const Vector& data,
                                 double lambda) {
    const Matrix shape = block_of(f, mode);
    const Index n = shape.size();
    const Vector base = observe(with_block(f, mode, Matrix::Zero(shape.rows(), shape.cols()), L));
    Matrix design(base.size() + n, n);
    for (Index e = 0; e < n; ++e) {
        Matrix unit = Matrix::Zero(shape.rows(), shape.cols());
        unit.data()[e] = 1.0;
        design.col(e).head(base.size()) = observe(with_block(f, mode, unit, L)) - base;
    }
    design.bottomRows(n) = std::sqrt(lambda) * Matrix::Identity(n, n);
    Vector rhs = Vector::Zero(base.size() + n);
    rhs.head(base.size()) = data - base;
    const Vector x = design.colPivHouseholderQr().solve(rhs);
    return Eigen::Map<const Matrix>(x.data(), shape.rows(), shape.cols());
}

/// Kronecker product, written out for the vectorized oracles.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector flatten(const Tensor3& t) { return Eigen::Map<const Vector>(t.data().data(), t.size()); }

}  // namespace radiomap::testing
