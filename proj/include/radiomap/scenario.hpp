#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "radiomap/tensor.hpp"

namespace radiomap {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream id); trial t of an experiment uses seed = master + t.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Power spectra
// ---------------------------------------------------------------------------

/// One squared-sinc lobe. `center` is a 1-based band number, so band k of a
/// length-K spectrum (vector index k-1) sits at distance k - center.
struct PsdComponent {
    bool active = true;
    double amplitude = 1.0;
    double center = 1.0;
    double width = 3.0;
};

struct PsdSpec {
    std::vector<PsdComponent> components;

    void validate(Index K) const;
    bool any_active() const;
};

struct PsdRanges {
    int components = 3;
    double activation_probability = 0.5;
    std::pair<double, double> amplitude{0.5, 2.0};
    std::pair<double, double> width{2.0, 4.0};
};

/// Normalized sinc, sin(pi x)/(pi x) with sinc(0) = 1.
double sinc(double x);

/// c(k) = sum_i p_i a_i sinc^2((k - f_i) / w_i) for k = 1..K.
Vector gen_psd(const PsdSpec& spec, Index K);

/// Draws a spec per the ranges; a draw with every component inactive is redrawn.
PsdSpec sample_psd_spec(const PsdRanges& ranges, Index K, Rng& rng);

// ---------------------------------------------------------------------------
// Spatial loss fields
// ---------------------------------------------------------------------------

enum class ShadowMode { Coarse, Exact };

struct ShadowSpec {
    double sigma = 4.0;      // dB
    double xc = 30.0;        // decorrelation distance, grid units (meters)
    int gen_resolution = 4;  // coarse-grid spacing used in Coarse mode
    ShadowMode mode = ShadowMode::Coarse;

    void validate() const;
};

/// Largest grid (I*J) accepted by ShadowMode::Exact.
inline constexpr Index kExactShadowMaxPoints = 64 * 64;

/// Zero-mean Gaussian field on the I x J grid with covariance
/// sigma^2 exp(-|y - y'| / xc). Coarse mode factorizes the covariance of a
/// lattice with spacing gen_resolution and upsamples bilinearly.
Matrix gen_shadow_field(const ShadowSpec& spec, Index I, Index J, Rng& rng);

struct EmitterSpec {
    Eigen::Vector2d location{0.5, 0.5};
    double pathloss_exponent = 2.0;
    PsdSpec psd;
};

/// Distance from `location` to the nearest point of the integer I x J grid.
double grid_clearance(const Eigen::Vector2d& location, Index I, Index J);

/// S(i,j) = |y - z|^-eta * 10^(shadow(i,j)/10) at y = (i, j).
Matrix gen_slf(const EmitterSpec& emitter, const Matrix& shadow, double min_clearance = 0.5);

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

enum class SlfModel {
    PathLoss,   // path loss + correlated log-normal shadowing
    Flat,       // S_r = 1 everywhere (test mode)
    RandomLl1,  // S_r = A_r B_r^T with Gaussian factors, C uniform on [0,1)
};

struct ScenarioConfig {
    Index I = 101;
    Index J = 101;
    Index K = 64;
    Index R = 2;
    ShadowSpec shadow;
    std::pair<double, double> eta_range{2.0, 3.0};
    PsdRanges psd;
    double min_clearance = 0.5;
    std::uint64_t seed = 1;
    SlfModel slf_model = SlfModel::PathLoss;
    Index ll1_rank = 2;  // RandomLl1 only

    void validate() const;
};

struct GroundTruth {
    std::vector<Matrix> slfs;  // R matrices, I x J
    Matrix psd;                // K x R
    Tensor3 map;
    std::vector<EmitterSpec> emitters;
    std::uint64_t seed = 0;
    Ll1Factors factors;  // populated for SlfModel::RandomLl1 only

    Index R() const { return psd.cols(); }
    Dims dims() const { return map.dims(); }
    /// IJ x R, column r = vec(S_r).
    Matrix slf_matrix() const;
};

/// Map = sum_r S_r o c_r.
GroundTruth make_ground_truth(std::vector<Matrix> slfs, Matrix psd);

GroundTruth assemble_ground_truth(const ScenarioConfig& config, Rng& rng);
GroundTruth assemble_ground_truth(const ScenarioConfig& config);  // rng from config.seed

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// X + N with N iid Gaussian rescaled so that 10 log10(|X|^2/|N|^2) == snr_db.
/// snr_db = +inf returns X unchanged.
Tensor3 add_noise(const Tensor3& x, double snr_db, Rng& rng);

/// tau_i = sum_{k<=i} mu_k / sum_k mu_k over the singular values of s (i is 1-based).
double lowrank_energy_ratio(const Matrix& s, Index i);

}  // namespace radiomap
