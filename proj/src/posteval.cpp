#include "radiomap/posteval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/SVD>

namespace radiomap {

namespace {

Vector l1_normalized(const Eigen::Ref<const Vector>& v, const char* what) {
    const double n = v.lpNorm<1>();
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError(std::string(what) + ": zero or non-finite column");
    return v / n;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError(std::string(what) + ": shape mismatch");
}

}  // namespace

Matrix l1_match_cost(const Matrix& c_true, const Matrix& c_hat) {
    require_same_shape(c_true, c_hat, "l1_match_cost");
    const Index R = c_true.cols();
    Matrix ct(c_true.rows(), R), ch(c_hat.rows(), R);
    for (Index r = 0; r < R; ++r) {
        ct.col(r) = l1_normalized(c_true.col(r), "l1_match_cost");
        ch.col(r) = l1_normalized(c_hat.col(r), "l1_match_cost");
    }
    Matrix cost(R, R);
    for (Index r = 0; r < R; ++r)
        for (Index s = 0; s < R; ++s) cost(r, s) = (ct.col(r) - ch.col(s)).lpNorm<1>();
    return cost;
}

std::vector<Index> match_permutation_bruteforce(const Matrix& cost) {
    const Index R = cost.rows();
    if (cost.cols() != R) throw DimensionError("match_permutation: cost matrix must be square");
    std::vector<Index> perm(static_cast<std::size_t>(R));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<Index> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (Index r = 0; r < R; ++r) c += cost(r, perm[static_cast<std::size_t>(r)]);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Shortest augmenting path Hungarian algorithm, O(R^3).
std::vector<Index> match_permutation_assignment(const Matrix& cost) {
    const Index n = cost.rows();
    if (cost.cols() != n) throw DimensionError("match_permutation: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index j = 1; j <= n; ++j) perm[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    return perm;
}

std::vector<Index> match_permutation(const Matrix& c_true, const Matrix& c_hat) {
    const Matrix cost = l1_match_cost(c_true, c_hat);
    return cost.rows() <= 8 ? match_permutation_bruteforce(cost) : match_permutation_assignment(cost);
}

Matrix permute_columns(const Matrix& m, const std::vector<Index>& perm) {
    if (static_cast<Index>(perm.size()) != m.cols()) throw DimensionError("permute_columns: permutation length");
    Matrix out(m.rows(), m.cols());
    for (Index r = 0; r < m.cols(); ++r) out.col(r) = m.col(perm[static_cast<std::size_t>(r)]);
    return out;
}

double nae_psd(const Matrix& c_true, const Matrix& c_hat) {
    require_same_shape(c_true, c_hat, "nae_psd");
    if (c_true.cols() == 0) throw DimensionError("nae_psd: no columns");
    double acc = 0.0;
    for (Index r = 0; r < c_true.cols(); ++r)
        acc += (l1_normalized(c_true.col(r), "nae_psd") - l1_normalized(c_hat.col(r), "nae_psd")).lpNorm<1>();
    return acc / static_cast<double>(c_true.cols());
}

double nae_slf(const std::vector<Matrix>& s_true, const std::vector<Matrix>& s_hat) {
    if (s_true.size() != s_hat.size() || s_true.empty()) throw DimensionError("nae_slf: emitter count mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < s_true.size(); ++r) {
        require_same_shape(s_true[r], s_hat[r], "nae_slf");
        const Eigen::Map<const Vector> a(s_true[r].data(), s_true[r].size());
        const Eigen::Map<const Vector> b(s_hat[r].data(), s_hat[r].size());
        acc += (l1_normalized(a, "nae_slf") - l1_normalized(b, "nae_slf")).lpNorm<1>();
    }
    return acc / static_cast<double>(s_true.size());
}

double nae_map(const Tensor3& x_true, const Tensor3& x_hat) {
    if (!(x_true.dims() == x_hat.dims())) throw DimensionError("nae_map: dims mismatch");
    const double den = x_true.mode3().lpNorm<1>();
    if (!(den > 0.0)) throw ValidationError("nae_map: zero reference map");
    return (x_true.mode3() - x_hat.mode3()).lpNorm<1>() / den;
}

Matrix refine_slf(const Matrix& spectra, const Matrix& c_hat) {
    if (spectra.cols() != c_hat.rows()) throw DimensionError("refine_slf: spectra width must equal K");
    Eigen::JacobiSVD<Matrix> svd(c_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv.size() < c_hat.cols() || sv(sv.size() - 1) <= 1e-10)
        throw NumericalError("refine_slf: estimated PSD matrix is rank deficient");
    // S = X3 pinv(C^T) = X3 U diag(1/sv) V^T
    return spectra * svd.matrixU() * sv.cwiseInverse().asDiagonal() * svd.matrixV().transpose();
}

// ---------------------------------------------------------------------------

double tps_kernel(double d) { return d > 0.0 ? d * d * std::log(d) : 0.0; }

double TpsModel::operator()(double x, double y) const {
    double f = affine(0) + affine(1) * x + affine(2) * y;
    for (std::size_t n = 0; n < nodes.size(); ++n)
        f += kernel_weights(static_cast<Index>(n)) * tps_kernel(std::hypot(x - nodes[n].x(), y - nodes[n].y()));
    return f;
}

namespace {

void require_non_collinear(const std::vector<Eigen::Vector2d>& nodes) {
    if (nodes.size() < 3) throw ValidationError("tps_fit: at least three distinct nodes required");
    const Eigen::Vector2d& p0 = nodes.front();
    double scale = 0.0;
    for (const auto& p : nodes) scale = std::max(scale, (p - p0).norm());
    for (std::size_t a = 1; a < nodes.size(); ++a) {
        const Eigen::Vector2d u = nodes[a] - p0;
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            const Eigen::Vector2d v = nodes[b] - p0;
            if (std::abs(u.x() * v.y() - u.y() * v.x()) > 1e-12 * scale * scale) return;
        }
    }
    throw ValidationError("tps_fit: nodes are collinear");
}

}  // namespace

std::vector<TpsModel> tps_fit_many(const std::vector<Eigen::Vector2d>& nodes, const Matrix& values, double smoothing) {
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw ValidationError("tps_fit: smoothing must be >= 0");
    if (values.rows() != static_cast<Index>(nodes.size())) throw DimensionError("tps_fit: one value row per node");
    {
        std::set<std::pair<double, double>> seen;
        for (const auto& p : nodes)
            if (!seen.emplace(p.x(), p.y()).second) throw ValidationError("tps_fit: duplicate nodes");
    }
    require_non_collinear(nodes);

    const Index n = static_cast<Index>(nodes.size());
    Matrix sys = Matrix::Zero(n + 3, n + 3);
    for (Index a = 0; a < n; ++a) {
        for (Index b = a + 1; b < n; ++b) {
            const double k = tps_kernel((nodes[a] - nodes[b]).norm());
            sys(a, b) = k;
            sys(b, a) = k;
        }
        sys(a, a) = smoothing;
        sys(a, n) = sys(n, a) = 1.0;
        sys(a, n + 1) = sys(n + 1, a) = nodes[a].x();
        sys(a, n + 2) = sys(n + 2, a) = nodes[a].y();
    }
    Matrix rhs = Matrix::Zero(n + 3, values.cols());
    rhs.topRows(n) = values;

    const Matrix sol = sys.partialPivLu().solve(rhs);
    if (!sol.allFinite()) throw NumericalError("tps_fit: singular system");

    std::vector<TpsModel> out(static_cast<std::size_t>(values.cols()));
    for (Index c = 0; c < values.cols(); ++c) {
        TpsModel& m = out[static_cast<std::size_t>(c)];
        m.nodes = nodes;
        m.kernel_weights = sol.col(c).head(n);
        m.affine = sol.col(c).tail<3>();
        m.smoothing = smoothing;
    }
    return out;
}

TpsModel tps_fit(const std::vector<TpsPoint>& points, double smoothing) {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<double> sums;
    std::vector<int> counts;
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.value))
            throw ValidationError("tps_fit: non-finite point");
        std::size_t at = nodes.size();
        for (std::size_t n = 0; n < nodes.size(); ++n)
            if (nodes[n].x() == p.x && nodes[n].y() == p.y) at = n;
        if (at == nodes.size()) {
            nodes.emplace_back(p.x, p.y);
            sums.push_back(0.0);
            counts.push_back(0);
        }
        sums[at] += p.value;
        counts[at] += 1;
    }
    Matrix values(static_cast<Index>(nodes.size()), 1);
    for (std::size_t n = 0; n < nodes.size(); ++n) values(static_cast<Index>(n), 0) = sums[n] / counts[n];
    return std::move(tps_fit_many(nodes, values, smoothing).front());
}

Matrix tps_eval(const TpsModel& model, Index I, Index J) {
    Matrix out(I, J);
    for (Index j = 0; j < J; ++j)
        for (Index i = 0; i < I; ++i) out(i, j) = model(static_cast<double>(i), static_cast<double>(j));
    return out;
}

// ---------------------------------------------------------------------------

Tensor3 reconstruct_map(const std::vector<Matrix>& slfs, const Matrix& psd) {
    if (slfs.empty() || static_cast<Index>(slfs.size()) != psd.cols())
        throw DimensionError("reconstruct_map: one SLF per PSD column required");
    const Index I = slfs.front().rows(), J = slfs.front().cols();
    Matrix S(I * J, psd.cols());
    for (std::size_t r = 0; r < slfs.size(); ++r) {
        if (slfs[r].rows() != I || slfs[r].cols() != J) throw DimensionError("reconstruct_map: SLF shape mismatch");
        S.col(static_cast<Index>(r)) = Eigen::Map<const Vector>(slfs[r].data(), I * J);
    }
    return Tensor3::from_mode3(S * psd.transpose(), Dims{I, J, psd.rows()});
}

SpectrumSamples full_spectrum_samples(const Tensor3& x1, const Tensor3& x2, const SlabPlan& plan, const Dims& dims) {
    SpectrumSamples out;
    out.dims = dims;
    std::vector<std::pair<Index, Index>> locs;
    std::vector<Vector> rows;
    const Index K = dims.K;
    if (static_cast<Index>(plan.s3.size()) == K) {
        for (std::size_t a = 0; a < plan.s1.size(); ++a)
            for (Index j = 0; j < dims.J; ++j) {
                Vector v(K);
                for (Index k = 0; k < K; ++k) v(k) = x1(static_cast<Index>(a), j, k);
                locs.emplace_back(plan.s1[a], j);
                rows.push_back(std::move(v));
            }
    }
    if (static_cast<Index>(plan.s4.size()) == K) {
        const IndexSet& s1 = plan.s1;
        for (std::size_t b = 0; b < plan.s2.size(); ++b)
            for (Index i = 0; i < dims.I; ++i) {
                if (static_cast<Index>(plan.s3.size()) == K && std::binary_search(s1.begin(), s1.end(), i)) continue;
                Vector v(K);
                for (Index k = 0; k < K; ++k) v(k) = x2(i, static_cast<Index>(b), k);
                locs.emplace_back(i, plan.s2[b]);
                rows.push_back(std::move(v));
            }
    }
    out.locations = std::move(locs);
    out.spectra.resize(static_cast<Index>(rows.size()), K);
    for (std::size_t n = 0; n < rows.size(); ++n) out.spectra.row(static_cast<Index>(n)) = rows[n].transpose();
    return out;
}

SpectrumSamples full_spectrum_samples(const Tensor3& y, const FiberMask& w) {
    if (!(y.dims() == w.weights.dims())) throw DimensionError("full_spectrum_samples: mask dims mismatch");
    const Dims d = y.dims();
    SpectrumSamples out;
    out.dims = d;
    std::vector<Index> picked;
    for (Index j = 0; j < d.J; ++j)
        for (Index i = 0; i < d.I; ++i) {
            bool full = true;
            for (Index k = 0; k < d.K && full; ++k) full = w.weights(i, j, k) > 0.0;
            if (full) out.locations.emplace_back(i, j);
        }
    out.spectra.resize(out.count(), d.K);
    for (Index n = 0; n < out.count(); ++n) {
        const auto [i, j] = out.locations[static_cast<std::size_t>(n)];
        for (Index k = 0; k < d.K; ++k) out.spectra(n, k) = y(i, j, k);
    }
    return out;
}

DisaggregationResult disaggregate_full(const SolveResult& result, const SpectrumSamples& samples,
                                       const PostprocessConfig& config) {
    const Ll1Factors& f = result.factors;
    f.validate();
    const Dims dims = f.dims();
    const Index R = f.R();

    // Unit L1 PSDs with positive sum; the scale moves into A_r.
    Vector scales(R);
    Matrix C = f.C;
    std::vector<Matrix> A = f.A;
    DisaggregationResult out;
    for (Index r = 0; r < R; ++r) {
        const double n1 = C.col(r).lpNorm<1>();
        double s = C.col(r).sum() < 0.0 ? -n1 : n1;
        if (!(n1 > 0.0) || !std::isfinite(n1)) {
            s = 1.0;
            out.notes.push_back("emitter " + std::to_string(r) + ": zero PSD column left unscaled");
        }
        scales(r) = s;
        C.col(r) /= s;
        A[static_cast<std::size_t>(r)] *= s;
    }

    std::vector<Index> perm(static_cast<std::size_t>(R));
    std::iota(perm.begin(), perm.end(), Index{0});
    if (config.reference_psd) {
        if (config.reference_psd->rows() != C.rows() || config.reference_psd->cols() != R)
            throw DimensionError("disaggregate_full: reference PSD shape");
        perm = match_permutation(*config.reference_psd, C);
    }

    out.permutation = perm;
    out.psd_hat = permute_columns(C, perm);
    Vector permuted_scales(R);
    std::vector<Matrix> raw(static_cast<std::size_t>(R));
    for (Index r = 0; r < R; ++r) {
        const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(r)]);
        permuted_scales(r) = scales(static_cast<Index>(src));
        raw[static_cast<std::size_t>(r)] = A[src] * f.B[src].transpose();
    }
    out.scales = permuted_scales;
    out.slfs_hat = raw;

    if (config.refine && samples.count() > 0) {
        if (samples.spectra.cols() != dims.K || !(samples.dims == dims))
            throw DimensionError("disaggregate_full: spectrum samples do not match the factor dims");
        try {
            const Matrix rows = refine_slf(samples.spectra, out.psd_hat);
            std::vector<Eigen::Vector2d> nodes;
            nodes.reserve(samples.locations.size());
            for (const auto& [i, j] : samples.locations)
                nodes.emplace_back(static_cast<double>(i), static_cast<double>(j));
            const auto models = tps_fit_many(nodes, rows, config.tps_smoothing);
            for (Index r = 0; r < R; ++r)
                out.slfs_hat[static_cast<std::size_t>(r)] = tps_eval(models[static_cast<std::size_t>(r)], dims.I, dims.J);
            out.refined = true;
        } catch (const std::exception& e) {
            out.notes.push_back(std::string("refinement skipped: ") + e.what());
        }
    } else if (config.refine) {
        out.notes.push_back("refinement skipped: no fully observed spectrum");
    }

    out.map_hat = reconstruct_map(out.slfs_hat, out.psd_hat);
    return out;
}

Metrics evaluate(const GroundTruth& truth, const DisaggregationResult& est) {
    if (static_cast<Index>(est.slfs_hat.size()) != truth.R() || est.psd_hat.cols() != truth.R())
        throw DimensionError("evaluate: emitter count mismatch");
    const auto perm = match_permutation(truth.psd, est.psd_hat);
    std::vector<Matrix> s(est.slfs_hat.size());
    for (std::size_t r = 0; r < s.size(); ++r) s[r] = est.slfs_hat[static_cast<std::size_t>(perm[r])];
    Metrics m;
    m.nae_c = nae_psd(truth.psd, permute_columns(est.psd_hat, perm));
    m.nae_s = nae_slf(truth.slfs, s);
    m.nae_x = nae_map(truth.map, est.map_hat);
    return m;
}

}  // namespace radiomap
