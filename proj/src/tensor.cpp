#include "radiomap/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace radiomap {

namespace {

void check_mode(int mode) {
    if (mode < 1 || mode > 3) {
        throw ValidationError("unfolding mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
}

void check_dims(const Dims& d) {
    if (d.I < 1 || d.J < 1 || d.K < 1) {
        throw DimensionError("tensor dimensions must be positive, got " + std::to_string(d.I) + "x" +
                             std::to_string(d.J) + "x" + std::to_string(d.K));
    }
}

std::string shape_str(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

Index Dims::along(int mode) const {
    check_mode(mode);
    return mode == 1 ? I : (mode == 2 ? J : K);
}

Tensor3::Tensor3(Dims dims) : dims_(dims) {
    check_dims(dims);
    data_.assign(static_cast<std::size_t>(dims.numel()), 0.0);
}

Tensor3::Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims);
    if (static_cast<Index>(data_.size()) != dims.numel()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(dims.numel()));
    }
    if (!all_finite()) throw ValidationError("tensor data contains NaN or Inf");
}

Tensor3 Tensor3::from_mode3(const Matrix& x3, Dims dims) {
    if (x3.rows() != dims.I * dims.J || x3.cols() != dims.K) {
        throw DimensionError("mode-3 matrix is " + shape_str(x3.rows(), x3.cols()) + ", expected " +
                             shape_str(dims.I * dims.J, dims.K));
    }
    return Tensor3(dims, std::vector<double>(x3.data(), x3.data() + x3.size()));
}

double Tensor3::squared_norm() const {
    return std::transform_reduce(data_.begin(), data_.end(), 0.0, std::plus<>{},
                                 [](double v) { return v * v; });
}

double Tensor3::norm() const { return std::sqrt(squared_norm()); }

bool Tensor3::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<Index> Ll1Factors::ranks() const {
    std::vector<Index> out;
    out.reserve(A.size());
    for (const auto& a : A) out.push_back(a.cols());
    return out;
}

Index Ll1Factors::total_rank() const {
    Index total = 0;
    for (const auto& a : A) total += a.cols();
    return total;
}

Dims Ll1Factors::dims() const {
    validate();
    return {A.front().rows(), B.front().rows(), C.rows()};
}

void Ll1Factors::validate() const {
    const auto R = static_cast<std::size_t>(C.cols());
    if (R == 0) throw DimensionError("factor C has no columns (R must be >= 1)");
    if (A.size() != R) {
        throw DimensionError("factor A has " + std::to_string(A.size()) + " blocks but C has " +
                             std::to_string(R) + " columns");
    }
    if (B.size() != R) {
        throw DimensionError("factor B has " + std::to_string(B.size()) + " blocks but C has " +
                             std::to_string(R) + " columns");
    }
    const Index I = A[0].rows();
    const Index J = B[0].rows();
    if (I < 1 || J < 1 || C.rows() < 1) throw DimensionError("factor C or A[0]/B[0] has zero rows");
    for (std::size_t r = 0; r < R; ++r) {
        if (A[r].rows() != I) {
            throw DimensionError("factor A[" + std::to_string(r) + "] has " + std::to_string(A[r].rows()) +
                                 " rows, expected " + std::to_string(I));
        }
        if (B[r].rows() != J) {
            throw DimensionError("factor B[" + std::to_string(r) + "] has " + std::to_string(B[r].rows()) +
                                 " rows, expected " + std::to_string(J));
        }
        if (A[r].cols() < 1 || A[r].cols() != B[r].cols()) {
            throw DimensionError("factor A[" + std::to_string(r) + "] and B[" + std::to_string(r) +
                                 "] must share a positive column count L_r");
        }
    }
}

Matrix Ll1Factors::stacked_A() const {
    Matrix out(A.front().rows(), total_rank());
    Index col = 0;
    for (const auto& a : A) {
        out.middleCols(col, a.cols()) = a;
        col += a.cols();
    }
    return out;
}

Matrix Ll1Factors::stacked_B() const {
    Matrix out(B.front().rows(), total_rank());
    Index col = 0;
    for (const auto& b : B) {
        out.middleCols(col, b.cols()) = b;
        col += b.cols();
    }
    return out;
}

Ll1Factors Ll1Factors::from_stacked(const Matrix& A, const Matrix& B, const Matrix& C, Index L) {
    const Index R = C.cols();
    if (L < 1 || A.cols() != L * R || B.cols() != L * R) {
        throw DimensionError("stacked factors need L*R = " + std::to_string(L * R) + " columns, got A " +
                             shape_str(A.rows(), A.cols()) + ", B " + shape_str(B.rows(), B.cols()));
    }
    Ll1Factors f;
    f.C = C;
    for (Index r = 0; r < R; ++r) {
        f.A.emplace_back(A.middleCols(r * L, L));
        f.B.emplace_back(B.middleCols(r * L, L));
    }
    return f;
}

bool Ll1Factors::all_finite() const {
    auto finite = [](const Matrix& m) { return m.allFinite(); };
    return C.allFinite() && std::all_of(A.begin(), A.end(), finite) && std::all_of(B.begin(), B.end(), finite);
}

Matrix slf_matrix(const Ll1Factors& factors) {
    factors.validate();
    const Index I = factors.A[0].rows();
    const Index J = factors.B[0].rows();
    Matrix S(I * J, factors.R());
    for (Index r = 0; r < factors.R(); ++r) {
        Matrix Sr = factors.A[r] * factors.B[r].transpose();
        S.col(r) = Eigen::Map<const Vector>(Sr.data(), I * J);
    }
    return S;
}

Tensor3 ll1_synthesize(const Ll1Factors& factors) {
    const Dims d = factors.dims();
    Matrix x3 = slf_matrix(factors) * factors.C.transpose();
    return Tensor3::from_mode3(x3, d);
}

UnfoldedTensor unfold(const Tensor3& t, int mode) {
    check_mode(mode);
    const auto [I, J, K] = t.dims();
    UnfoldedTensor u{mode, Matrix(), t.dims()};
    switch (mode) {
        case 1:
            u.matrix.resize(J * K, I);
            for (Index k = 0; k < K; ++k)
                for (Index j = 0; j < J; ++j)
                    for (Index i = 0; i < I; ++i) u.matrix(k * J + j, i) = t(i, j, k);
            break;
        case 2:
            u.matrix.resize(I * K, J);
            for (Index k = 0; k < K; ++k)
                for (Index j = 0; j < J; ++j)
                    for (Index i = 0; i < I; ++i) u.matrix(k * I + i, j) = t(i, j, k);
            break;
        default:
            u.matrix = t.mode3();
            break;
    }
    return u;
}

Tensor3 fold(const Matrix& m, int mode, Dims dims) {
    check_mode(mode);
    check_dims(dims);
    const auto [I, J, K] = dims;
    const Index rows = mode == 1 ? J * K : (mode == 2 ? I * K : I * J);
    const Index cols = dims.along(mode);
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError("mode-" + std::to_string(mode) + " unfolding is " + shape_str(m.rows(), m.cols()) +
                             ", expected " + shape_str(rows, cols));
    }
    if (mode == 3) return Tensor3::from_mode3(m, dims);
    Tensor3 t(dims);
    for (Index k = 0; k < K; ++k)
        for (Index j = 0; j < J; ++j)
            for (Index i = 0; i < I; ++i) t(i, j, k) = mode == 1 ? m(k * J + j, i) : m(k * I + i, j);
    if (!t.all_finite()) throw ValidationError("folded matrix contains NaN or Inf");
    return t;
}

Tensor3 mode_product(const Tensor3& t, const Matrix& M, int mode) {
    check_mode(mode);
    const Dims d = t.dims();
    if (M.cols() != d.along(mode)) {
        throw DimensionError("mode-" + std::to_string(mode) + " product needs a matrix with " +
                             std::to_string(d.along(mode)) + " columns, got " + shape_str(M.rows(), M.cols()));
    }
    Dims out = d;
    (mode == 1 ? out.I : mode == 2 ? out.J : out.K) = M.rows();
    // X_n = (...) * X^T-side factor, so the product acts on the unfolding from the right.
    Matrix xn = unfold(t, mode).matrix * M.transpose();
    return fold(xn, mode, out);
}

Matrix khatri_rao(const Matrix& X, const Matrix& Y) {
    if (X.cols() != Y.cols()) {
        throw DimensionError("khatri_rao: column counts differ (" + std::to_string(X.cols()) + " vs " +
                             std::to_string(Y.cols()) + ")");
    }
    const Index I = X.rows();
    const Index J = Y.rows();
    Matrix out(I * J, X.cols());
    for (Index c = 0; c < X.cols(); ++c)
        for (Index i = 0; i < I; ++i) out.col(c).segment(i * J, J) = X(i, c) * Y.col(c);
    return out;
}

Matrix partition_khatri_rao(const Matrix& C, const Matrix& M, std::span<const Index> widths) {
    if (static_cast<Index>(widths.size()) != C.cols()) {
        throw DimensionError("partition_khatri_rao: " + std::to_string(widths.size()) + " blocks but C has " +
                             std::to_string(C.cols()) + " columns");
    }
    const Index total = std::accumulate(widths.begin(), widths.end(), Index{0});
    if (total != M.cols()) {
        throw DimensionError("partition_khatri_rao: block widths sum to " + std::to_string(total) +
                             " but M has " + std::to_string(M.cols()) + " columns");
    }
    const Index K = C.rows();
    const Index n = M.rows();
    Matrix out(K * n, total);
    Index col = 0;
    for (Index r = 0; r < C.cols(); ++r) {
        const Index w = widths[static_cast<std::size_t>(r)];
        for (Index k = 0; k < K; ++k) out.block(k * n, col, n, w) = C(k, r) * M.middleCols(col, w);
        col += w;
    }
    return out;
}

Matrix partition_khatri_rao(const Matrix& C, const Matrix& M, Index uniform_width) {
    std::vector<Index> widths(static_cast<std::size_t>(C.cols()), uniform_width);
    return partition_khatri_rao(C, M, widths);
}

Matrix selection_matrix(std::span<const Index> rows, Index n) {
    Matrix P = Matrix::Zero(static_cast<Index>(rows.size()), n);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        if (rows[m] < 0 || rows[m] >= n) {
            throw DimensionError("selection index " + std::to_string(rows[m]) + " out of range [0," +
                                 std::to_string(n) + ")");
        }
        P(static_cast<Index>(m), rows[m]) = 1.0;
    }
    return P;
}

}  // namespace radiomap
