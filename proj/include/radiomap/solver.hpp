#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/tensor.hpp"

namespace radiomap {

/// Ridge weights on |A|^2, |B|^2, |C|^2.
struct Lambda {
    double a = 1e-2;
    double b = 1e-2;
    double c = 1e-2;
};

/// Spa: C columns taken from observed full spectra picked by successive
/// projection, A and B Gaussian followed by a few A/B-only sweeps.
enum class InitMode { Random, Given, TruthPerturbed, Spa };

/// Shared by the slab and masked BCD solvers.
struct SolverConfig {
    Index L = 2;
    Index R = 2;
    Lambda lambda;
    int max_iters = 100;
    double rel_tol = 1e-3;
    int restarts = 1;
    InitMode init = InitMode::Random;
    std::optional<Ll1Factors> init_factors;  // Given / TruthPerturbed
    double perturb_scale = 0.1;              // TruthPerturbed: relative Gaussian perturbation
    std::uint64_t seed = 1;

    void validate() const;
};

enum class Termination { Tolerance, MaxIters, Diverged };

const char* to_string(Termination t);

struct SolveResult {
    Ll1Factors factors;
    std::vector<double> loss_trace;  // entry 0 is the initial loss, then one per iteration
    int iterations = 0;
    Termination termination = Termination::MaxIters;
    int restart_index = 0;
    std::vector<double> restart_losses;  // final loss of every restart (NaN when diverged)
    std::vector<std::string> warnings;

    double final_loss() const { return loss_trace.empty() ? 0.0 : loss_trace.back(); }
};

/// Starting point for restart `restart` under the config's init mode.
Ll1Factors initial_factors(const SolverConfig& config, const Dims& dims, int restart);

/// Successive projection: indices of R rows that span the dominant extreme
/// directions of `rows` (largest residual norm, then project it out).
std::vector<Index> successive_projection(const Matrix& rows, Index R);

/// A/B-only sweeps run after a Spa initialization.
inline constexpr int kSpaWarmupSweeps = 3;

/// Loss at or below this fraction of the data energy counts as an exact fit.
inline constexpr double kExactFitFraction = 1e-20;

}  // namespace radiomap
