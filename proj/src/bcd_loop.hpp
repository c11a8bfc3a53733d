#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "radiomap/scenario.hpp"
#include "radiomap/solver.hpp"

namespace radiomap::detail {

/// Revives C columns that collapsed to zero; a dead block never comes back under exact updates.
/// Counts revivals per column in `revivals`.
inline void revive_dead_columns(Matrix& C, Rng& rng, std::vector<int>& revivals) {
    const double total = C.norm();
    if (total == 0.0) return;
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index r = 0; r < C.cols(); ++r) {
        if (C.col(r).norm() > 1e-12 * total) continue;
        Vector v = Vector::NullaryExpr(C.rows(), [&] { return g(rng); });
        C.col(r) = 1e-3 * total * v / v.norm();
        ++revivals[static_cast<std::size_t>(r)];
    }
}

/// Spa start: C from successive projection over the fully observed spectra,
/// then a few A/B sweeps so the first C update sees fitted spatial factors.
template <class Problem>
void spa_start(const Problem& problem, const SolverConfig& config, Ll1Factors& f, std::vector<std::string>& warnings) {
    const Matrix& spectra = problem.spectra();
    if (spectra.rows() < config.R || spectra.cols() != f.C.rows()) {
        warnings.push_back("spa init: fewer than R fully observed spectra, using the Gaussian start");
        return;
    }
    try {
        const auto rows = successive_projection(spectra, config.R);
        for (Index r = 0; r < config.R; ++r) f.C.col(r) = spectra.row(rows[static_cast<std::size_t>(r)]).transpose();
    } catch (const NumericalError& e) {
        warnings.push_back(std::string("spa init: ") + e.what() + ", using the Gaussian start");
        return;
    }
    for (int s = 0; s < kSpaWarmupSweeps; ++s) {
        Matrix A = problem.update_a(f, warnings);
        f = Ll1Factors::from_stacked(A, f.stacked_B(), f.C, config.L);
        Matrix B = problem.update_b(f, warnings);
        f = Ll1Factors::from_stacked(f.stacked_A(), B, f.C, config.L);
    }
}

/// Runs the cyclic exact-BCD loop for every restart and keeps the lowest final loss.
/// `problem` provides loss(F), update_a/b/c(F, warnings) and energy().
template <class Problem>
SolveResult run_bcd(const Problem& problem, const SolverConfig& config, const Dims& dims) {
    config.validate();
    const double floor = kExactFitFraction * problem.energy();
    SolveResult best;
    bool have_best = false;
    std::vector<double> restart_losses;
    std::vector<std::string> all_warnings;

    for (int restart = 0; restart < config.restarts; ++restart) {
        Ll1Factors f = initial_factors(config, dims, restart);
        SolveResult run;
        if (config.init == InitMode::Spa) spa_start(problem, config, f, run.warnings);
        std::vector<int> revivals(static_cast<std::size_t>(config.R), 0);
        Rng revive_rng = make_rng(config.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(restart));
        run.restart_index = restart;
        run.loss_trace.push_back(problem.loss(f));
        bool diverged = !std::isfinite(run.loss_trace.back());

        for (int it = 1; it <= config.max_iters && !diverged; ++it) {
            Matrix A = problem.update_a(f, run.warnings);
            f = Ll1Factors::from_stacked(A, f.stacked_B(), f.C, config.L);
            Matrix B = problem.update_b(f, run.warnings);
            f = Ll1Factors::from_stacked(f.stacked_A(), B, f.C, config.L);
            f.C = problem.update_c(f, run.warnings);
            revive_dead_columns(f.C, revive_rng, revivals);

            const double prev = run.loss_trace.back();
            const double cur = problem.loss(f);
            run.iterations = it;
            if (!std::isfinite(cur) || !f.all_finite()) {
                diverged = true;
                run.loss_trace.push_back(std::numeric_limits<double>::quiet_NaN());
                break;
            }
            run.loss_trace.push_back(cur);
            if (cur <= floor || std::abs(prev - cur) < config.rel_tol * prev) {
                run.termination = Termination::Tolerance;
                break;
            }
        }
        for (std::size_t r = 0; r < revivals.size(); ++r)
            if (revivals[r] > 0)
                run.warnings.push_back("column " + std::to_string(r) + " of C collapsed to zero and was reinitialized " +
                                       std::to_string(revivals[r]) + " time(s)");
        run.factors = std::move(f);
        if (diverged) {
            run.termination = Termination::Diverged;
            all_warnings.push_back("restart " + std::to_string(restart) + " diverged (non-finite values)");
        }
        restart_losses.push_back(diverged ? std::numeric_limits<double>::quiet_NaN() : run.final_loss());
        for (auto& w : run.warnings) all_warnings.push_back("restart " + std::to_string(restart) + ": " + w);

        const bool better = !diverged && (!have_best || best.termination == Termination::Diverged ||
                                          run.final_loss() < best.final_loss());
        if (!have_best || better) {
            best = std::move(run);
            have_best = true;
        }
    }
    best.restart_losses = std::move(restart_losses);
    best.warnings = std::move(all_warnings);
    return best;
}

}  // namespace radiomap::detail
