#include "radiomap/scenario.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <string>

namespace radiomap {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

// --- PSD -------------------------------------------------------------------

void PsdSpec::validate(Index K) const {
    for (const auto& c : components) {
        if (!(c.amplitude > 0.0)) throw ValidationError("PSD amplitude must be positive");
        if (!(c.width > 0.0)) throw ValidationError("PSD width must be positive");
        if (c.center < 1.0 || c.center > static_cast<double>(K)) {
            throw ValidationError("PSD center " + std::to_string(c.center) + " outside bands [1, " +
                                  std::to_string(K) + "]");
        }
    }
}

bool PsdSpec::any_active() const {
    return std::any_of(components.begin(), components.end(), [](const PsdComponent& c) { return c.active; });
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

Vector gen_psd(const PsdSpec& spec, Index K) {
    spec.validate(K);
    Vector c = Vector::Zero(K);
    for (const auto& comp : spec.components) {
        if (!comp.active) continue;
        for (Index k = 0; k < K; ++k) {
            const double s = sinc((static_cast<double>(k + 1) - comp.center) / comp.width);
            c(k) += comp.amplitude * s * s;
        }
    }
    return c;
}

PsdSpec sample_psd_spec(const PsdRanges& ranges, Index K, Rng& rng) {
    if (ranges.components < 1) throw ValidationError("PSD needs at least one component");
    std::bernoulli_distribution on(ranges.activation_probability);
    std::uniform_real_distribution<double> amp(ranges.amplitude.first, ranges.amplitude.second);
    std::uniform_real_distribution<double> width(ranges.width.first, ranges.width.second);
    std::uniform_int_distribution<Index> center(1, K);
    PsdSpec spec;
    do {
        spec.components.clear();
        for (int i = 0; i < ranges.components; ++i) {
            PsdComponent c;
            c.active = on(rng);
            c.amplitude = amp(rng);
            c.center = static_cast<double>(center(rng));
            c.width = width(rng);
            spec.components.push_back(c);
        }
    } while (!spec.any_active());
    return spec;
}

// --- shadowing ---------------------------------------------------------------

void ShadowSpec::validate() const {
    if (!(sigma >= 0.0)) throw ValidationError("shadow sigma must be >= 0");
    if (!(xc > 0.0)) throw ValidationError("shadow decorrelation distance must be > 0");
    if (gen_resolution < 1) throw ValidationError("shadow gen_resolution must be >= 1");
}

namespace {

/// Lower Cholesky factor of the exponential covariance over points (x_n, y_n).
Matrix exp_covariance_factor(const std::vector<Eigen::Vector2d>& pts, double sigma, double xc) {
    const auto n = static_cast<Index>(pts.size());
    Matrix cov(n, n);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b <= a; ++b) {
            const double v = sigma * sigma * std::exp(-(pts[a] - pts[b]).norm() / xc);
            cov(a, b) = v;
            cov(b, a) = v;
        }
    double jitter = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::LLT<Matrix> llt(cov + jitter * Matrix::Identity(n, n));
        if (llt.info() == Eigen::Success) return llt.matrixL();
        jitter = jitter == 0.0 ? 1e-12 * sigma * sigma : jitter * 100.0;
    }
    throw NumericalError("shadow covariance factorization failed after jitter retries; "
                         "increase gen_resolution or use coarse mode");
}

Vector standard_normals(Index n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(n);
    for (Index t = 0; t < n; ++t) v(t) = g(rng);
    return v;
}

}  // namespace

Matrix gen_shadow_field(const ShadowSpec& spec, Index I, Index J, Rng& rng) {
    spec.validate();
    if (I < 1 || J < 1) throw DimensionError("shadow grid must be non-empty");
    if (spec.sigma == 0.0) return Matrix::Zero(I, J);

    if (spec.mode == ShadowMode::Exact) {
        if (I * J > kExactShadowMaxPoints) {
            throw ValidationError("exact shadow mode supports at most " + std::to_string(kExactShadowMaxPoints) +
                                  " grid points");
        }
        std::vector<Eigen::Vector2d> pts;
        for (Index j = 0; j < J; ++j)
            for (Index i = 0; i < I; ++i) pts.emplace_back(double(i), double(j));
        const Vector z = exp_covariance_factor(pts, spec.sigma, spec.xc) * standard_normals(I * J, rng);
        return Eigen::Map<const Matrix>(z.data(), I, J);
    }

    const int g = spec.gen_resolution;
    const Index ci = (I - 1 + g - 1) / g + 1;  // coarse nodes cover [0, I-1]
    const Index cj = (J - 1 + g - 1) / g + 1;
    std::vector<Eigen::Vector2d> pts;
    for (Index b = 0; b < cj; ++b)
        for (Index a = 0; a < ci; ++a) pts.emplace_back(double(a * g), double(b * g));
    const Vector zc = exp_covariance_factor(pts, spec.sigma, spec.xc) * standard_normals(ci * cj, rng);
    const Eigen::Map<const Matrix> coarse(zc.data(), ci, cj);

    Matrix field(I, J);
    for (Index j = 0; j < J; ++j) {
        const Index b0 = std::min(j / g, cj - 1);
        const Index b1 = std::min(b0 + 1, cj - 1);
        const double tb = double(j - b0 * g) / g;
        for (Index i = 0; i < I; ++i) {
            const Index a0 = std::min(i / g, ci - 1);
            const Index a1 = std::min(a0 + 1, ci - 1);
            const double ta = double(i - a0 * g) / g;
            field(i, j) = (1 - ta) * (1 - tb) * coarse(a0, b0) + ta * (1 - tb) * coarse(a1, b0) +
                          (1 - ta) * tb * coarse(a0, b1) + ta * tb * coarse(a1, b1);
        }
    }
    return field;
}

double grid_clearance(const Eigen::Vector2d& location, Index I, Index J) {
    const double gi = std::clamp(std::round(location.x()), 0.0, double(I - 1));
    const double gj = std::clamp(std::round(location.y()), 0.0, double(J - 1));
    return (location - Eigen::Vector2d(gi, gj)).norm();
}

Matrix gen_slf(const EmitterSpec& emitter, const Matrix& shadow, double min_clearance) {
    const Index I = shadow.rows();
    const Index J = shadow.cols();
    if (!(emitter.pathloss_exponent > 0.0)) throw ValidationError("path-loss exponent must be positive");
    const double clearance = grid_clearance(emitter.location, I, J);
    if (clearance < min_clearance || clearance == 0.0) {
        throw ValidationError("emitter at (" + std::to_string(emitter.location.x()) + ", " +
                              std::to_string(emitter.location.y()) + ") is " + std::to_string(clearance) +
                              " from a grid point; minimum clearance is " + std::to_string(min_clearance));
    }
    Matrix S(I, J);
    for (Index j = 0; j < J; ++j)
        for (Index i = 0; i < I; ++i) {
            const double d = (Eigen::Vector2d(double(i), double(j)) - emitter.location).norm();
            S(i, j) = std::pow(d, -emitter.pathloss_exponent) * std::pow(10.0, shadow(i, j) / 10.0);
        }
    return S;
}

// --- ground truth --------------------------------------------------------------

void ScenarioConfig::validate() const {
    if (I < 1 || J < 1 || K < 1) throw ValidationError("scenario grid and band count must be positive");
    if (R < 1) throw ValidationError("scenario needs R >= 1 emitters");
    shadow.validate();
    if (!(eta_range.first > 0.0) || eta_range.second < eta_range.first) {
        throw ValidationError("eta_range must satisfy 0 < lo <= hi");
    }
    if (!(psd.amplitude.first > 0.0) || psd.amplitude.second < psd.amplitude.first) {
        throw ValidationError("psd amplitude range must satisfy 0 < lo <= hi");
    }
    if (!(psd.width.first > 0.0) || psd.width.second < psd.width.first) {
        throw ValidationError("psd width range must satisfy 0 < lo <= hi");
    }
    if (!(min_clearance >= 0.0) || min_clearance > 0.7) {
        // no point of a unit grid is farther than sqrt(0.5) from every node
        throw ValidationError("min_clearance must lie in [0, 0.7]");
    }
    if (slf_model == SlfModel::RandomLl1 && ll1_rank < 1) throw ValidationError("ll1_rank must be >= 1");
}

Matrix GroundTruth::slf_matrix() const {
    if (slfs.empty()) return Matrix(0, 0);
    const Index I = slfs[0].rows();
    const Index J = slfs[0].cols();
    Matrix S(I * J, R());
    for (Index r = 0; r < R(); ++r) S.col(r) = Eigen::Map<const Vector>(slfs[r].data(), I * J);
    return S;
}

GroundTruth make_ground_truth(std::vector<Matrix> slfs, Matrix psd) {
    if (slfs.empty() || static_cast<Index>(slfs.size()) != psd.cols()) {
        throw DimensionError("need one SLF per PSD column (" + std::to_string(slfs.size()) + " vs " +
                             std::to_string(psd.cols()) + ")");
    }
    const Index I = slfs[0].rows();
    const Index J = slfs[0].cols();
    for (const auto& s : slfs) {
        if (s.rows() != I || s.cols() != J) throw DimensionError("all SLFs must share the grid shape");
    }
    GroundTruth gt;
    gt.slfs = std::move(slfs);
    gt.psd = std::move(psd);
    const Dims d{I, J, gt.psd.rows()};
    gt.map = Tensor3::from_mode3(gt.slf_matrix() * gt.psd.transpose(), d);
    return gt;
}

GroundTruth assemble_ground_truth(const ScenarioConfig& config, Rng& rng) {
    config.validate();
    const Index I = config.I, J = config.J, K = config.K, R = config.R;

    if (config.slf_model == SlfModel::RandomLl1) {
        std::normal_distribution<double> g(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Ll1Factors f;
        for (Index r = 0; r < R; ++r) {
            f.A.push_back(Matrix::NullaryExpr(I, config.ll1_rank, [&] { return g(rng); }));
            f.B.push_back(Matrix::NullaryExpr(J, config.ll1_rank, [&] { return g(rng); }));
        }
        f.C = Matrix::NullaryExpr(K, R, [&] { return u(rng); });
        std::vector<Matrix> slfs;
        for (Index r = 0; r < R; ++r) slfs.push_back(f.A[r] * f.B[r].transpose());
        GroundTruth gt = make_ground_truth(std::move(slfs), f.C);
        gt.factors = std::move(f);
        gt.seed = config.seed;
        return gt;
    }

    std::uniform_real_distribution<double> ux(0.0, double(I - 1));
    std::uniform_real_distribution<double> uy(0.0, double(J - 1));
    std::uniform_real_distribution<double> eta(config.eta_range.first, config.eta_range.second);

    std::vector<EmitterSpec> emitters;
    std::vector<Matrix> slfs;
    Matrix C(K, R);
    for (Index r = 0; r < R; ++r) {
        EmitterSpec e;
        do {
            e.location = {ux(rng), uy(rng)};
        } while (grid_clearance(e.location, I, J) < std::max(config.min_clearance, 1e-9));
        e.pathloss_exponent = eta(rng);
        e.psd = sample_psd_spec(config.psd, K, rng);
        C.col(r) = gen_psd(e.psd, K);
        if (config.slf_model == SlfModel::Flat) {
            slfs.push_back(Matrix::Ones(I, J));
        } else {
            const Matrix shadow = gen_shadow_field(config.shadow, I, J, rng);
            slfs.push_back(gen_slf(e, shadow, config.min_clearance));
        }
        emitters.push_back(std::move(e));
    }
    GroundTruth gt = make_ground_truth(std::move(slfs), std::move(C));
    gt.emitters = std::move(emitters);
    gt.seed = config.seed;
    return gt;
}

GroundTruth assemble_ground_truth(const ScenarioConfig& config) {
    Rng rng = make_rng(config.seed);
    return assemble_ground_truth(config, rng);
}

Tensor3 add_noise(const Tensor3& x, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0) return x;
    if (!std::isfinite(snr_db)) throw ValidationError("SNR must be finite or +inf");
    const double signal = x.norm();
    if (signal == 0.0) throw ValidationError("SNR is undefined for an all-zero tensor");
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> noise(static_cast<std::size_t>(x.size()));
    for (auto& v : noise) v = g(rng);
    const double raw = std::sqrt(std::transform_reduce(noise.begin(), noise.end(), 0.0, std::plus<>{},
                                                       [](double v) { return v * v; }));
    const double scale = signal * std::pow(10.0, -snr_db / 20.0) / raw;
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += scale * noise[t];
    return Tensor3(x.dims(), std::move(out));
}

double lowrank_energy_ratio(const Matrix& s, Index i) {
    const Index n = std::min(s.rows(), s.cols());
    if (i < 1 || i > n) {
        throw ValidationError("energy-ratio index " + std::to_string(i) + " outside [1, " + std::to_string(n) + "]");
    }
    const Vector mu = Eigen::BDCSVD<Matrix>(s).singularValues();
    const double total = mu.sum();
    if (total == 0.0) throw ValidationError("energy ratio undefined for a zero matrix");
    if (i == n) return 1.0;
    return mu.head(i).sum() / total;
}

}  // namespace radiomap
