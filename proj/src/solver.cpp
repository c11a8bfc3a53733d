#include "radiomap/solver.hpp"

#include <cmath>
#include <random>

#include "radiomap/scenario.hpp"

namespace radiomap {

void SolverConfig::validate() const {
    if (L < 1 || R < 1) throw ValidationError("solver needs L >= 1 and R >= 1");
    if (lambda.a < 0 || lambda.b < 0 || lambda.c < 0) throw ValidationError("regularization weights must be >= 0");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(rel_tol > 0)) throw ValidationError("rel_tol must be > 0");
    if (restarts < 1) throw ValidationError("restarts must be >= 1");
    if (init == InitMode::Given || init == InitMode::TruthPerturbed) {
        if (!init_factors) throw ValidationError("given/perturbed init requires init_factors");
        init_factors->validate();
        if (init_factors->R() != R) throw ValidationError("init_factors has a different R than the config");
        for (Index l : init_factors->ranks()) {
            if (l != L) throw ValidationError("solvers require uniform block rank L; init_factors disagrees");
        }
    }
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Tolerance: return "tol";
        case Termination::MaxIters: return "max_iters";
        case Termination::Diverged: return "diverged";
    }
    return "?";
}

Ll1Factors initial_factors(const SolverConfig& config, const Dims& dims, int restart) {
    Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(restart));
    std::normal_distribution<double> g(0.0, 1.0);
    auto gauss = [&](Index r, Index c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return g(rng); })); };

    if (config.init == InitMode::Random || config.init == InitMode::Spa ||
        (config.init == InitMode::Given && restart > 0)) {
        return Ll1Factors::from_stacked(gauss(dims.I, config.L * config.R), gauss(dims.J, config.L * config.R),
                                        gauss(dims.K, config.R), config.L);
    }
    Ll1Factors f = *config.init_factors;
    if (f.dims() != dims) throw DimensionError("init_factors do not match the data dimensions");
    if (config.init == InitMode::TruthPerturbed) {
        auto perturb = [&](Matrix& m) {
            const double scale = config.perturb_scale * m.norm() / std::sqrt(double(m.size()));
            m += scale * gauss(m.rows(), m.cols());
        };
        for (auto& a : f.A) perturb(a);
        for (auto& b : f.B) perturb(b);
        perturb(f.C);
    }
    return f;
}

std::vector<Index> successive_projection(const Matrix& rows, Index R) {
    if (R < 1 || R > rows.rows()) throw ValidationError("successive_projection: need 1 <= R <= number of rows");
    Matrix X = rows;
    std::vector<Index> picked;
    for (Index r = 0; r < R; ++r) {
        Index best = 0;
        const double n2 = X.rowwise().squaredNorm().maxCoeff(&best);
        if (!(n2 > 0.0)) throw NumericalError("successive_projection: rows span fewer than R directions");
        picked.push_back(best);
        const Vector u = X.row(best).transpose() / std::sqrt(n2);
        X -= (X * u) * u.transpose();
    }
    return picked;
}

}  // namespace radiomap
