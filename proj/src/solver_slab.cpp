#include "radiomap/solver_slab.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <optional>

#include "bcd_loop.hpp"

namespace radiomap {

namespace {

Matrix rows_of(const Matrix& m, const IndexSet& rows) { return m(rows, Eigen::all); }

Vector indicator(const IndexSet& s, Index n) {
    Vector v = Vector::Zero(n);
    for (Index t : s) v(t) = 1.0;
    return v;
}

/// Column r = vec(A_r B_r^T) for stacked A, B with block width L.
Matrix slf_columns(const Matrix& A, const Matrix& B, Index L) {
    const Index R = A.cols() / L;
    Matrix S(A.rows() * B.rows(), R);
    for (Index r = 0; r < R; ++r) {
        Matrix s = A.middleCols(r * L, L) * B.middleCols(r * L, L).transpose();
        S.col(r) = Eigen::Map<const Vector>(s.data(), s.size());
    }
    return S;
}

Index uniform_rank(const Ll1Factors& f) {
    const auto ranks = f.ranks();
    for (Index l : ranks)
        if (l != ranks.front()) throw ValidationError("slab solver requires a uniform block rank L");
    return ranks.front();
}

void check_factors(const Ll1Factors& f, const SlabData& data) {
    f.validate();
    if (f.dims() != data.dims) throw DimensionError("factor dimensions do not match the slab data");
}

}  // namespace

void SlabData::validate() const {
    plan.validate(dims);
    const Dims d1{plan.M(), dims.J, static_cast<Index>(plan.s3.size())};
    const Dims d2{dims.I, plan.N(), static_cast<Index>(plan.s4.size())};
    if (x1.dims() != d1) throw DimensionError("x1 must be M x J x |s3|");
    if (x2.dims() != d2) throw DimensionError("x2 must be I x N x |s4|");
}

SlabData make_slab_data(const Tensor3& x, const SlabPlan& plan) {
    auto [x1, x2] = slab_subtensors(x, plan);
    SlabData d{std::move(x1), std::move(x2), plan, x.dims()};
    return d;
}

double slab_loss(const Ll1Factors& factors, const SlabData& data, const Lambda& lambda) {
    data.validate();
    check_factors(factors, data);
    const Index L = uniform_rank(factors);
    const Matrix A = factors.stacked_A();
    const Matrix B = factors.stacked_B();
    const Matrix& C = factors.C;
    const Matrix M1 = slf_columns(rows_of(A, data.plan.s1), B, L);
    const Matrix M2 = slf_columns(A, rows_of(B, data.plan.s2), L);
    const double fit1 = (data.x1.mode3() - M1 * rows_of(C, data.plan.s3).transpose()).squaredNorm();
    const double fit2 = (data.x2.mode3() - M2 * rows_of(C, data.plan.s4).transpose()).squaredNorm();
    return fit1 + fit2 + lambda.a * A.squaredNorm() + lambda.b * B.squaredNorm() + lambda.c * C.squaredNorm();
}

Matrix solve_row_decoupled_sylvester(const Vector& h1_diag, const Matrix& H2, const Matrix& H4, const Matrix& H5) {
    const Index n = H4.rows();
    if (H2.rows() != n || H2.cols() != n || H4.cols() != n || H5.cols() != n || h1_diag.size() != H5.rows()) {
        throw DimensionError("Sylvester operands have inconsistent shapes");
    }
    std::optional<Eigen::LLT<Matrix>> with_h2, without_h2;
    Matrix X(H5.rows(), n);
    for (Index i = 0; i < H5.rows(); ++i) {
        const double h = h1_diag(i);
        if (h != 0.0 && h != 1.0) throw ValidationError("h1_diag entries must be 0 or 1");
        auto& slot = h == 1.0 ? with_h2 : without_h2;
        if (!slot) {
            slot.emplace(h == 1.0 ? Matrix(H2 + H4) : H4);
            if (slot->info() != Eigen::Success || slot->rcond() < 1e-15) {
                throw NumericalError("Sylvester coefficient matrix is singular or indefinite "
                                     "(use a positive regularization weight)");
            }
        }
        // A(i,:) M = H5(i,:) with M symmetric  =>  M A(i,:)^T = H5(i,:)^T
        X.row(i) = slot->solve(H5.row(i).transpose()).transpose();
    }
    return X;
}

Matrix update_A(const Ll1Factors& factors, const SlabData& data, double lambda_a) {
    data.validate();
    check_factors(factors, data);
    const Index L = uniform_rank(factors);
    const auto& p = data.plan;
    const Matrix B = factors.stacked_B();
    const Matrix Z1 = partition_khatri_rao(rows_of(factors.C, p.s3), B, L);                  // (K1 J) x LR
    const Matrix Z2 = partition_khatri_rao(rows_of(factors.C, p.s4), rows_of(B, p.s2), L);  // (K2 N) x LR
    const Matrix H2 = Z1.transpose() * Z1;
    const Matrix H4 = Z2.transpose() * Z2 + lambda_a * Matrix::Identity(Z2.cols(), Z2.cols());
    Matrix H5 = unfold(data.x2, 1).matrix.transpose() * Z2;
    const Matrix part1 = unfold(data.x1, 1).matrix.transpose() * Z1;  // M x LR, scattered by P^T
    for (Index m = 0; m < p.M(); ++m) H5.row(p.s1[m]) += part1.row(m);
    return solve_row_decoupled_sylvester(indicator(p.s1, data.dims.I), H2, H4, H5);
}

Matrix update_B(const Ll1Factors& factors, const SlabData& data, double lambda_b) {
    data.validate();
    check_factors(factors, data);
    const Index L = uniform_rank(factors);
    const auto& p = data.plan;
    const Matrix A = factors.stacked_A();
    const Matrix Z1 = partition_khatri_rao(rows_of(factors.C, p.s3), rows_of(A, p.s1), L);  // (K1 M) x LR
    const Matrix Z2 = partition_khatri_rao(rows_of(factors.C, p.s4), A, L);                  // (K2 I) x LR
    const Matrix G2 = Z2.transpose() * Z2;
    const Matrix G4 = Z1.transpose() * Z1 + lambda_b * Matrix::Identity(Z1.cols(), Z1.cols());
    Matrix G5 = unfold(data.x1, 2).matrix.transpose() * Z1;
    const Matrix part2 = unfold(data.x2, 2).matrix.transpose() * Z2;  // N x LR, scattered by Q^T
    for (Index n = 0; n < p.N(); ++n) G5.row(p.s2[n]) += part2.row(n);
    return solve_row_decoupled_sylvester(indicator(p.s2, data.dims.J), G2, G4, G5);
}

Matrix update_C(const Ll1Factors& factors, const SlabData& data, double lambda_c, std::vector<std::string>* warnings) {
    data.validate();
    check_factors(factors, data);
    const Index L = uniform_rank(factors);
    const auto& p = data.plan;
    const Index R = factors.R();
    const Index K = data.dims.K;
    const Matrix A = factors.stacked_A();
    const Matrix B = factors.stacked_B();
    const Matrix M1 = slf_columns(rows_of(A, p.s1), B, L);
    const Matrix M2 = slf_columns(A, rows_of(B, p.s2), L);
    const Matrix G1 = M1.transpose() * M1;
    const Matrix G2 = M2.transpose() * M2;
    const Matrix rhs1 = data.x1.mode3().transpose() * M1;  // |s3| x R
    const Matrix rhs2 = data.x2.mode3().transpose() * M2;  // |s4| x R

    std::vector<Index> pos3(static_cast<std::size_t>(K), -1), pos4(static_cast<std::size_t>(K), -1);
    for (std::size_t t = 0; t < p.s3.size(); ++t) pos3[p.s3[t]] = static_cast<Index>(t);
    for (std::size_t t = 0; t < p.s4.size(); ++t) pos4[p.s4[t]] = static_cast<Index>(t);

    // coefficient d1 G1 + d2 G2 + lambda I, one factorization per (d1, d2) pattern
    std::array<std::optional<Eigen::LLT<Matrix>>, 4> solvers;
    Matrix C(K, R);
    for (Index k = 0; k < K; ++k) {
        const bool in1 = pos3[k] >= 0, in2 = pos4[k] >= 0;
        if (!in1 && !in2 && lambda_c == 0.0) {
            C.row(k).setZero();
            if (warnings) {
                warnings->push_back("band " + std::to_string(k) +
                                    " is unobserved and unregularized; its PSD row was set to zero");
            }
            continue;
        }
        auto& slot = solvers[(in1 ? 1 : 0) + (in2 ? 2 : 0)];
        if (!slot) {
            Matrix coef = lambda_c * Matrix::Identity(R, R);
            if (in1) coef += G1;
            if (in2) coef += G2;
            slot.emplace(coef);
            if (slot->info() != Eigen::Success || slot->rcond() < 1e-15) {
                throw NumericalError("PSD update system is singular (use a positive regularization weight)");
            }
        }
        Vector rhs = Vector::Zero(R);
        if (in1) rhs += rhs1.row(pos3[k]).transpose();
        if (in2) rhs += rhs2.row(pos4[k]).transpose();
        C.row(k) = slot->solve(rhs).transpose();
    }
    return C;
}

namespace {

// Spectra of every location observed over all K bands.
Matrix slab_full_spectra(const SlabData& d) {
    const Index K = d.dims.K;
    const bool full1 = static_cast<Index>(d.plan.s3.size()) == K;
    const bool full2 = static_cast<Index>(d.plan.s4.size()) == K;
    const Index n1 = full1 ? d.x1.dims().I * d.x1.dims().J : 0;
    const Index n2 = full2 ? d.x2.dims().I * d.x2.dims().J : 0;
    Matrix out(n1 + n2, K);
    if (full1) out.topRows(n1) = d.x1.mode3();
    if (full2) out.bottomRows(n2) = d.x2.mode3();
    return out;
}

struct SlabProblem {
    const SlabData& data;
    const Lambda& lambda;
    Matrix full_spectra;

    const Matrix& spectra() const { return full_spectra; }
    double energy() const { return data.x1.squared_norm() + data.x2.squared_norm(); }
    double loss(const Ll1Factors& f) const { return slab_loss(f, data, lambda); }
    Matrix update_a(const Ll1Factors& f, std::vector<std::string>&) const { return update_A(f, data, lambda.a); }
    Matrix update_b(const Ll1Factors& f, std::vector<std::string>&) const { return update_B(f, data, lambda.b); }
    Matrix update_c(const Ll1Factors& f, std::vector<std::string>& w) const { return update_C(f, data, lambda.c, &w); }
};

}  // namespace

SolveResult bcd_solve(const SlabData& data, const SolverConfig& config) {
    data.validate();
    if (!data.x1.all_finite() || !data.x2.all_finite()) throw ValidationError("slab data must be finite");
    return detail::run_bcd(SlabProblem{data, config.lambda, slab_full_spectra(data)}, config, data.dims);
}

}  // namespace radiomap
