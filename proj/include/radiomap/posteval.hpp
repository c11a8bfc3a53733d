#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radiomap/sampling.hpp"
#include "radiomap/scenario.hpp"
#include "radiomap/solver.hpp"
#include "radiomap/tensor.hpp"

namespace radiomap {

// ---------------------------------------------------------------------------
// Permutation matching and NAE metrics
// ---------------------------------------------------------------------------

/// cost(r, s) = | c_r/|c_r|_1 - c_hat_s/|c_hat_s|_1 |_1
Matrix l1_match_cost(const Matrix& c_true, const Matrix& c_hat);

/// perm[r] is the column of c_hat paired with true column r. Brute force for
/// R <= 8, Hungarian assignment above; both minimize the same separable cost.
std::vector<Index> match_permutation(const Matrix& c_true, const Matrix& c_hat);
std::vector<Index> match_permutation_bruteforce(const Matrix& cost);
std::vector<Index> match_permutation_assignment(const Matrix& cost);

/// Columns (or blocks) reordered so that output column r is input column perm[r].
Matrix permute_columns(const Matrix& m, const std::vector<Index>& perm);

/// (1/R) sum_r | c_r/|c_r|_1 - c_hat_r/|c_hat_r|_1 |_1 on already matched columns.
double nae_psd(const Matrix& c_true, const Matrix& c_hat);
/// Same normalized-L1 error with every S_r flattened.
double nae_slf(const std::vector<Matrix>& s_true, const std::vector<Matrix>& s_hat);
/// sum |X - X_hat| / sum |X|.
double nae_map(const Tensor3& x_true, const Tensor3& x_hat);

// ---------------------------------------------------------------------------
// SLF refinement and thin-plate splines
// ---------------------------------------------------------------------------

/// Least-squares SLF rows S(l,:) = X3(l,:) pinv(C_hat^T) for fully observed spectra (n x K -> n x R).
Matrix refine_slf(const Matrix& spectra, const Matrix& c_hat);

struct TpsPoint {
    double x;
    double y;
    double value;
};

/// f(p) = sum_i w_i phi(|p - p_i|) + a0 + a1 x + a2 y with phi(d) = d^2 log d.
struct TpsModel {
    std::vector<Eigen::Vector2d> nodes;
    Vector kernel_weights;
    Eigen::Vector3d affine = Eigen::Vector3d::Zero();
    double smoothing = 0.0;

    double operator()(double x, double y) const;
};

double tps_kernel(double d);

/// Fits one spline. Duplicate nodes are averaged; fewer than three
/// non-collinear nodes is a ValidationError.
TpsModel tps_fit(const std::vector<TpsPoint>& points, double smoothing);

/// Fits one spline per column of `values` over shared nodes (one factorization).
std::vector<TpsModel> tps_fit_many(const std::vector<Eigen::Vector2d>& nodes, const Matrix& values, double smoothing);

/// Spline evaluated at every grid point (i, j) of an I x J grid.
Matrix tps_eval(const TpsModel& model, Index I, Index J);

// ---------------------------------------------------------------------------
// Disaggregation pipeline
// ---------------------------------------------------------------------------

/// X = sum_r S_r o c_r.
Tensor3 reconstruct_map(const std::vector<Matrix>& slfs, const Matrix& psd);

/// Grid locations whose whole spectrum was observed, with those spectra (n x K).
struct SpectrumSamples {
    Dims dims;
    std::vector<std::pair<Index, Index>> locations;
    Matrix spectra;

    Index count() const { return static_cast<Index>(locations.size()); }
};

SpectrumSamples full_spectrum_samples(const Tensor3& x1, const Tensor3& x2, const SlabPlan& plan, const Dims& dims);
SpectrumSamples full_spectrum_samples(const Tensor3& y, const FiberMask& w);

struct PostprocessConfig {
    bool refine = true;
    double tps_smoothing = 1e-3;
    std::optional<Matrix> reference_psd;  // enables permutation matching
};

struct DisaggregationResult {
    std::vector<Matrix> slfs_hat;
    Matrix psd_hat;
    Tensor3 map_hat;
    std::vector<Index> permutation;  // output r came from solver block permutation[r]
    Vector scales;                   // psd_hat(:,r) = C(:,perm[r]) / scales(r)
    bool refined = false;
    std::vector<std::string> notes;
};

/// Normalizes every PSD to unit L1 norm with a positive sum (scale moved into
/// the SLF), optionally matches the permutation against a reference, refines
/// SLF rows where full spectra exist and TPS-interpolates them to the grid.
DisaggregationResult disaggregate_full(const SolveResult& result, const SpectrumSamples& samples,
                                       const PostprocessConfig& config);

struct Metrics {
    double nae_c = 0.0;
    double nae_s = 0.0;
    double nae_x = 0.0;
};

/// Matches `est` against the truth (if not already matched) and computes all three NAEs.
Metrics evaluate(const GroundTruth& truth, const DisaggregationResult& est);

}  // namespace radiomap
