#include "radiomap/solver_masked.hpp"

#include <Eigen/Cholesky>

#include <algorithm>

#include "bcd_loop.hpp"

namespace radiomap {

namespace {

Index uniform_rank(const Ll1Factors& f) {
    const auto ranks = f.ranks();
    for (Index l : ranks)
        if (l != ranks.front()) throw ValidationError("masked solver requires a uniform block rank L");
    return ranks.front();
}

/// Sort entries by `key` and record where each key value starts (size n + 1).
template <class Key>
std::vector<std::size_t> bucket(std::vector<MaskedProblem::Entry>& entries, Index n, Key key) {
    std::stable_sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    std::vector<std::size_t> start(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& e : entries) ++start[static_cast<std::size_t>(key(e)) + 1];
    for (std::size_t t = 1; t < start.size(); ++t) start[t] += start[t - 1];
    return start;
}

/// Solves (G + lambda I) x = rhs, falling back to a 1e-10 ridge when lambda = 0 leaves G singular.
Vector solve_row(Matrix G, const Vector& rhs, double lambda, const char* what, Index row,
                 std::vector<std::string>* warnings) {
    G.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
        const double ridge = 1e-10 * std::max(1.0, G.diagonal().maxCoeff());
        G.diagonal().array() += ridge;
        llt.compute(G);
        if (warnings) {
            warnings->push_back(std::string(what) + " row " + std::to_string(row) +
                                " has a singular weighted Gram matrix; applied ridge fallback");
        }
        if (llt.info() != Eigen::Success) throw NumericalError("row system remains singular after ridge fallback");
    }
    return llt.solve(rhs);
}

}  // namespace

MaskedProblem::MaskedProblem(const Tensor3& y, const FiberMask& w) : dims_(y.dims()) {
    if (w.weights.dims() != y.dims()) throw DimensionError("mask and observation tensor dimensions differ");
    for (Index k = 0; k < dims_.K; ++k)
        for (Index j = 0; j < dims_.J; ++j)
            for (Index i = 0; i < dims_.I; ++i) {
                const double wt = w.weights(i, j, k);
                if (wt <= 0.0) continue;
                const double v = y(i, j, k);
                if (!std::isfinite(v)) throw ValidationError("observed values must be finite");
                by_row_.push_back({i, j, k, wt * wt, wt * wt * v});
                energy_ += wt * wt * v * v;
            }
    by_col_ = by_row_;
    by_band_ = by_row_;
    row_start_ = bucket(by_row_, dims_.I, [](const Entry& e) { return e.i; });
    col_start_ = bucket(by_col_, dims_.J, [](const Entry& e) { return e.j; });
    band_start_ = bucket(by_band_, dims_.K, [](const Entry& e) { return e.k; });
}

double MaskedProblem::loss(const Ll1Factors& factors, const Lambda& lambda) const {
    factors.validate();
    if (factors.dims() != dims_) throw DimensionError("factor dimensions do not match the observations");
    const Matrix S = slf_matrix(factors);
    const Matrix& C = factors.C;
    double fit = 0.0;
    for (const auto& e : by_row_) {
        const double model = S.row(e.j * dims_.I + e.i).dot(C.row(e.k));
        const double v = e.w2y / e.w2;
        fit += e.w2 * (v - model) * (v - model);
    }
    return fit + lambda.a * factors.stacked_A().squaredNorm() + lambda.b * factors.stacked_B().squaredNorm() +
           lambda.c * C.squaredNorm();
}

Matrix MaskedProblem::update(int mode, const Ll1Factors& factors, double lambda,
                             std::vector<std::string>* warnings) const {
    if (mode < 1 || mode > 3) throw ValidationError("factor mode must be 1, 2 or 3");
    factors.validate();
    if (factors.dims() != dims_) throw DimensionError("factor dimensions do not match the observations");
    const Index L = uniform_rank(factors);
    const Index R = factors.R();
    const Matrix& C = factors.C;

    if (mode == 3) {
        const Matrix S = slf_matrix(factors);
        Matrix out(dims_.K, R);
        for (Index k = 0; k < dims_.K; ++k) {
            Matrix G = Matrix::Zero(R, R);
            Vector rhs = Vector::Zero(R);
            for (std::size_t t = band_start_[k]; t < band_start_[k + 1]; ++t) {
                const auto& e = by_band_[t];
                const Vector phi = S.row(e.j * dims_.I + e.i).transpose();
                G.selfadjointView<Eigen::Lower>().rankUpdate(phi, e.w2);
                rhs += e.w2y * phi;
            }
            G = G.selfadjointView<Eigen::Lower>();
            out.row(k) = solve_row(G, rhs, lambda, "C", k, warnings).transpose();
        }
        return out;
    }

    // mode 1: phi(r L + l) = C(k, r) B(j, r L + l); mode 2 swaps the roles of A and B
    const Matrix other = mode == 1 ? factors.stacked_B() : factors.stacked_A();
    const auto& entries = mode == 1 ? by_row_ : by_col_;
    const auto& start = mode == 1 ? row_start_ : col_start_;
    const Index n = mode == 1 ? dims_.I : dims_.J;
    const Index LR = L * R;
    Matrix out(n, LR);
    Vector phi(LR);
    for (Index row = 0; row < n; ++row) {
        Matrix G = Matrix::Zero(LR, LR);
        Vector rhs = Vector::Zero(LR);
        for (std::size_t t = start[row]; t < start[row + 1]; ++t) {
            const auto& e = entries[t];
            const Index partner = mode == 1 ? e.j : e.i;
            for (Index r = 0; r < R; ++r)
                phi.segment(r * L, L) = C(e.k, r) * other.row(partner).segment(r * L, L).transpose();
            G.selfadjointView<Eigen::Lower>().rankUpdate(phi, e.w2);
            rhs += e.w2y * phi;
        }
        G = G.selfadjointView<Eigen::Lower>();
        out.row(row) = solve_row(G, rhs, lambda, mode == 1 ? "A" : "B", row, warnings).transpose();
    }
    return out;
}

double masked_loss(const Ll1Factors& factors, const Tensor3& y, const FiberMask& w, const Lambda& lambda) {
    return MaskedProblem(y, w).loss(factors, lambda);
}

Matrix update_factor_masked(int mode, const Ll1Factors& factors, const Tensor3& y, const FiberMask& w,
                            double lambda, std::vector<std::string>* warnings) {
    return MaskedProblem(y, w).update(mode, factors, lambda, warnings);
}

namespace {

Matrix masked_full_spectra(const Tensor3& y, const FiberMask& w) {
    const Dims d = y.dims();
    std::vector<Index> rows;
    for (Index ij = 0; ij < d.I * d.J; ++ij)
        if ((w.weights.mode3().row(ij).array() > 0.0).all()) rows.push_back(ij);
    Matrix out(static_cast<Index>(rows.size()), d.K);
    for (std::size_t n = 0; n < rows.size(); ++n) out.row(static_cast<Index>(n)) = y.mode3().row(rows[n]);
    return out;
}

struct MaskedBcd {
    const MaskedProblem& problem;
    const Lambda& lambda;
    Matrix full_spectra;

    const Matrix& spectra() const { return full_spectra; }
    double energy() const { return problem.data_energy(); }
    double loss(const Ll1Factors& f) const { return problem.loss(f, lambda); }
    Matrix update_a(const Ll1Factors& f, std::vector<std::string>& w) const { return problem.update(1, f, lambda.a, &w); }
    Matrix update_b(const Ll1Factors& f, std::vector<std::string>& w) const { return problem.update(2, f, lambda.b, &w); }
    Matrix update_c(const Ll1Factors& f, std::vector<std::string>& w) const { return problem.update(3, f, lambda.c, &w); }
};

}  // namespace

SolveResult bcd_solve_masked(const Tensor3& y, const FiberMask& w, const SolverConfig& config) {
    const MaskedProblem problem(y, w);
    if (problem.observed() == 0) throw ValidationError("mask observes no entries");
    Matrix spectra = config.init == InitMode::Spa ? masked_full_spectra(y, w) : Matrix(0, y.dims().K);
    return detail::run_bcd(MaskedBcd{problem, config.lambda, std::move(spectra)}, config, y.dims());
}

}  // namespace radiomap
