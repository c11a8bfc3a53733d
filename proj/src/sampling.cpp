#include "radiomap/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <sstream>

namespace radiomap {

namespace {

void check_index_set(const IndexSet& s, Index n, const std::string& name) {
    if (s.empty()) throw ValidationError("index set " + name + " is empty");
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (s[t] < 0 || s[t] >= n) {
            throw DimensionError("index " + std::to_string(s[t]) + " in " + name + " outside [0, " +
                                 std::to_string(n) + ")");
        }
        if (t > 0 && s[t] <= s[t - 1]) throw ValidationError("index set " + name + " must be sorted and unique");
    }
}

template <class T>
Index isize(const std::vector<T>& s) { return static_cast<Index>(s.size()); }

std::string fmt(const char* pattern, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

}  // namespace

IndexSet full_range(Index n) {
    IndexSet s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), Index{0});
    return s;
}

IndexSet intersect(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IndexSet unite(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void SlabPlan::validate(const Dims& dims) const {
    check_index_set(s1, dims.I, "s1");
    check_index_set(s2, dims.J, "s2");
    check_index_set(s3, dims.K, "s3");
    check_index_set(s4, dims.K, "s4");
}

bool SlabPlan::covers_all_bands(Index K) const { return isize(unite(s3, s4)) == K; }

SlabPlan equispaced_slab_plan(const Dims& dims, Index M, Index N) {
    if (M < 1 || M > dims.I || N < 1 || N > dims.J) throw ValidationError("slab counts must satisfy 1<=M<=I, 1<=N<=J");
    auto spread = [](Index count, Index n) {
        IndexSet s;
        for (Index m = 0; m < count; ++m) s.push_back((2 * m + 1) * n / (2 * count));
        return s;
    };
    SlabPlan p{spread(M, dims.I), spread(N, dims.J), full_range(dims.K), full_range(dims.K)};
    p.validate(dims);
    return p;
}

void FiberGroupPlan::validate(const Dims& dims) const {
    if (groups.empty()) throw ValidationError("fiber-group plan has no groups");
    for (std::size_t d = 0; d < groups.size(); ++d) {
        const std::string tag = "group " + std::to_string(d);
        check_index_set(groups[d].I, dims.I, tag + " I");
        check_index_set(groups[d].J, dims.J, tag + " J");
        check_index_set(groups[d].K, dims.K, tag + " K");
    }
}

FiberMask FiberMask::from_weights(Tensor3 weights) {
    FiberMask m{std::move(weights), 0};
    for (double w : m.weights.data()) {
        if (!(w >= 0.0)) throw ValidationError("mask weights must be finite and nonnegative");
        if (w > 0.0) ++m.observed_count;
    }
    return m;
}

FiberMask FiberMask::all_observed(const Dims& dims) {
    return from_weights(Tensor3(dims, std::vector<double>(static_cast<std::size_t>(dims.numel()), 1.0)));
}

Tensor3 subtensor(const Tensor3& x, const IndexSet& rows, const IndexSet& cols, const IndexSet& bands) {
    const Dims d = x.dims();
    check_index_set(rows, d.I, "rows");
    check_index_set(cols, d.J, "columns");
    check_index_set(bands, d.K, "bands");
    Tensor3 out({isize(rows), isize(cols), isize(bands)});
    for (Index k = 0; k < isize(bands); ++k)
        for (Index j = 0; j < isize(cols); ++j)
            for (Index i = 0; i < isize(rows); ++i) out(i, j, k) = x(rows[i], cols[j], bands[k]);
    return out;
}

std::pair<Tensor3, Tensor3> slab_subtensors(const Tensor3& x, const SlabPlan& plan) {
    const Dims d = x.dims();
    plan.validate(d);
    return {subtensor(x, plan.s1, full_range(d.J), plan.s3), subtensor(x, full_range(d.I), plan.s2, plan.s4)};
}

std::vector<Tensor3> group_subtensors(const Tensor3& x, const FiberGroupPlan& plan) {
    plan.validate(x.dims());
    std::vector<Tensor3> out;
    for (const auto& g : plan.groups) out.push_back(subtensor(x, g.I, g.J, g.K));
    return out;
}

FiberMask plan_to_mask(const FiberGroupPlan& plan, const Dims& dims) {
    plan.validate(dims);
    Tensor3 w(dims);
    for (const auto& g : plan.groups)
        for (Index k : g.K)
            for (Index j : g.J)
                for (Index i : g.I) w(i, j, k) += 1.0;
    for (double& v : w.data()) v = std::sqrt(v);
    return FiberMask::from_weights(std::move(w));
}

FiberMask random_fiber_mask(const Dims& dims, Index q, Rng& rng) {
    if (q < 1 || q > dims.I) {
        throw ValidationError("per-column sample count q=" + std::to_string(q) + " outside [1, " +
                              std::to_string(dims.I) + "]");
    }
    Tensor3 w(dims);
    IndexSet rows = full_range(dims.I);
    for (Index k = 0; k < dims.K; ++k)
        for (Index j = 0; j < dims.J; ++j) {
            // partial Fisher-Yates: the first q slots become a uniform q-subset
            for (Index t = 0; t < q; ++t) {
                std::uniform_int_distribution<Index> pick(t, dims.I - 1);
                std::swap(rows[t], rows[pick(rng)]);
                w(rows[t], j, k) = 1.0;
            }
        }
    return FiberMask::from_weights(std::move(w));
}

// --- checks ------------------------------------------------------------------

void CheckReport::add(std::string condition, double value, double threshold, bool pass) {
    clauses.push_back({std::move(condition), value, threshold, pass});
}

void CheckReport::finalize() {
    satisfied = std::all_of(clauses.begin(), clauses.end(), [](const CheckClause& c) { return c.pass; });
}

Index ll1_split_score(Index a, Index b, Index L, Index R) {
    return std::min(a / L, R) + std::min(b / L, R);
}

namespace {

void require_positive(Index L, Index R) {
    if (L < 1 || R < 1) throw ValidationError("L and R must be positive");
}

}  // namespace

CheckReport check_ll1_uniqueness(const Dims& dims, Index L, Index R) {
    require_positive(L, R);
    CheckReport rep;
    rep.name = "ll1-uniqueness";
    rep.add("K >= R", double(dims.K), double(R), dims.K >= R);
    const Index score = ll1_split_score(dims.I, dims.J, L, R);
    rep.add("min(floor(I/L),R) + min(floor(J/L),R) >= R+2", double(score), double(R + 2), score >= R + 2);
    rep.finalize();
    return rep;
}

CheckReport check_ll1_uniqueness_relaxed(const Dims& dims, Index L, Index R) {
    require_positive(L, R);
    CheckReport rep;
    rep.name = "ll1-uniqueness-relaxed";
    rep.add("I*J >= L^2 R", double(dims.I * dims.J), double(L * L * R), dims.I * dims.J >= L * L * R);
    const Index score = ll1_split_score(dims.I, dims.J, L, R) + std::min(dims.K, R);
    rep.add("min(floor(I/L),R) + min(floor(J/L),R) + min(K,R) >= 2R+2", double(score), double(2 * R + 2),
            score >= 2 * R + 2);
    rep.finalize();
    return rep;
}

CheckReport check_slab_identifiability(const SlabPlan& plan, const Dims& dims, Index L, Index R) {
    require_positive(L, R);
    plan.validate(dims);
    CheckReport rep;
    rep.name = "slab";
    const Index shared = isize(intersect(plan.s3, plan.s4));
    rep.add("|S3 n S4| >= R", double(shared), double(R), shared >= R);
    const Index covered = isize(unite(plan.s3, plan.s4));
    rep.add("S3 u S4 = [K]", double(covered), double(dims.K), covered == dims.K);

    const Index M = plan.M(), N = plan.N();
    const Index score1 = ll1_split_score(M, dims.J, L, R);
    const Index score2 = ll1_split_score(N, dims.I, L, R);
    const bool branch1 = M >= 2 * L && dims.J >= L * R && score1 >= R + 2;
    const bool branch2 = N >= 2 * L && dims.I >= L * R && score2 >= R + 2;
    rep.add(fmt("(1) M>=2L [%ld>=%ld], J>=LR [%ld>=%ld], min(M/L,R)+min(J/L,R)>=R+2 [%ld>=%ld]: %s",
                long(M), long(2 * L), long(dims.J), long(L * R), long(score1), long(R + 2), branch1 ? "ok" : "fail") +
                fmt(" OR (2) N>=2L [%ld>=%ld], I>=LR [%ld>=%ld], min(N/L,R)+min(I/L,R)>=R+2 [%ld>=%ld]: %s",
                    long(N), long(2 * L), long(dims.I), long(L * R), long(score2), long(R + 2),
                    branch2 ? "ok" : "fail"),
            double(std::max(branch1 ? score1 : 0, branch2 ? score2 : 0)), double(R + 2), branch1 || branch2);
    rep.finalize();
    return rep;
}

std::optional<std::vector<Index>> find_group_ordering(Index n, const std::function<bool(Index, Index)>& compatible) {
    if (n <= 0) return std::vector<Index>{};
    if (n <= 8) {
        std::vector<Index> order = full_range(n);
        do {
            bool ok = true;
            for (Index t = 0; t + 1 < n && ok; ++t) ok = compatible(order[t], order[t + 1]);
            if (ok) return order;
        } while (std::next_permutation(order.begin(), order.end()));
        return std::nullopt;
    }
    if (n > 24) throw ValidationError("ordering search supports at most 24 groups");
    // reach[mask] has bit v set when some path visits exactly `mask` and ends at v
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<std::uint32_t> reach(full + 1, 0);
    for (Index v = 0; v < n; ++v) reach[std::size_t{1} << v] = 1u << v;
    std::vector<std::uint32_t> adj(static_cast<std::size_t>(n), 0);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b)
            if (a != b && compatible(a, b)) adj[a] |= 1u << b;
    for (std::size_t mask = 1; mask <= full; ++mask) {
        const std::uint32_t ends = reach[mask];
        if (!ends) continue;
        for (Index v = 0; v < n; ++v) {
            if (!(ends >> v & 1u)) continue;
            std::uint32_t next = adj[v] & ~static_cast<std::uint32_t>(mask);
            while (next) {
                const int w = std::countr_zero(next);
                next &= next - 1;
                reach[mask | (std::size_t{1} << w)] |= 1u << w;
            }
        }
    }
    if (!reach[full]) return std::nullopt;
    // walk back from any end vertex
    std::vector<Index> path;
    std::size_t mask = full;
    Index v = std::countr_zero(reach[full]);
    while (true) {
        path.push_back(v);
        const std::size_t prev = mask & ~(std::size_t{1} << v);
        if (!prev) break;
        Index u = 0;
        for (; u < n; ++u)
            if ((reach[prev] >> u & 1u) && (adj[u] >> v & 1u)) break;
        mask = prev;
        v = u;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

namespace {

void add_ordering_clause(CheckReport& rep, Index D, const std::function<bool(Index, Index)>& compatible,
                         const std::string& text) {
    try {
        auto order = find_group_ordering(D, compatible);
        std::string shown = text;
        if (order) {
            shown += " [witness:";
            for (Index d : *order) shown += " " + std::to_string(d + 1);
            shown += "]";
        }
        rep.add(shown, order ? 1.0 : 0.0, 1.0, order.has_value());
        rep.witness = order;
    } catch (const ValidationError& e) {
        rep.add(text + " [" + e.what() + "]", 0.0, 1.0, false);
    }
}

void add_cover_clauses(CheckReport& rep, const FiberGroupPlan& plan, const Dims& dims, bool bands) {
    IndexSet ui, uj, uk;
    for (const auto& g : plan.groups) {
        ui = unite(ui, g.I);
        uj = unite(uj, g.J);
        uk = unite(uk, g.K);
    }
    rep.add("union of I^(d) = [I]", double(isize(ui)), double(dims.I), isize(ui) == dims.I);
    rep.add("union of J^(d) = [J]", double(isize(uj)), double(dims.J), isize(uj) == dims.J);
    if (bands) rep.add("union of K^(d) = [K]", double(isize(uk)), double(dims.K), isize(uk) == dims.K);
}

}  // namespace

CheckReport check_group_identifiability(const FiberGroupPlan& plan, const Dims& dims, Index L, Index R) {
    require_positive(L, R);
    plan.validate(dims);
    CheckReport rep;
    rep.name = "fiber-groups";
    add_cover_clauses(rep, plan, dims, true);
    const auto& gs = plan.groups;
    for (std::size_t d = 0; d < gs.size(); ++d) {
        const std::string tag = "group " + std::to_string(d + 1) + ": ";
        const Index ni = isize(gs[d].I), nj = isize(gs[d].J), nk = isize(gs[d].K);
        rep.add(tag + "|I^(d)| >= L", double(ni), double(L), ni >= L);
        rep.add(tag + "|J^(d)| >= L", double(nj), double(L), nj >= L);
        rep.add(tag + "|K^(d)| >= R", double(nk), double(R), nk >= R);
        const Index score = ll1_split_score(ni, nj, L, R);
        rep.add(tag + "min(|I|/L,R)+min(|J|/L,R) >= R+2", double(score), double(R + 2), score >= R + 2);
    }
    auto compatible = [&](Index a, Index b) {
        const Index spatial = std::max(isize(intersect(gs[a].I, gs[b].I)), isize(intersect(gs[a].J, gs[b].J)));
        return spatial >= L && isize(intersect(gs[a].K, gs[b].K)) >= 2;
    };
    add_ordering_clause(rep, isize(gs), compatible,
                        "ordering with max(|I n I'|,|J n J'|) >= L and |K n K'| >= 2 between neighbours");
    rep.finalize();
    return rep;
}

CheckReport check_anchor_identifiability(const FiberGroupPlan& plan, const Dims& dims, Index L, Index R) {
    require_positive(L, R);
    plan.validate(dims);
    CheckReport rep;
    rep.name = "anchor-group";
    add_cover_clauses(rep, plan, dims, false);
    const auto& gs = plan.groups;
    for (std::size_t d = 0; d < gs.size(); ++d) {
        const std::string tag = "group " + std::to_string(d + 1) + ": ";
        rep.add(tag + "|I^(d)| >= L", double(isize(gs[d].I)), double(L), isize(gs[d].I) >= L);
        rep.add(tag + "|J^(d)| >= L", double(isize(gs[d].J)), double(L), isize(gs[d].J) >= L);
    }
    rep.add("K >= R", double(dims.K), double(R), dims.K >= R);
    // best anchor: full spectrum and the largest split score
    std::optional<std::size_t> anchor;
    Index best = -1;
    for (std::size_t d = 0; d < gs.size(); ++d) {
        if (isize(gs[d].K) != dims.K) continue;
        const Index score = ll1_split_score(isize(gs[d].I), isize(gs[d].J), L, R);
        if (score > best) {
            best = score;
            anchor = d;
        }
    }
    rep.add("some group d0 has K^(d0) = [K]", anchor ? 1.0 : 0.0, 1.0, anchor.has_value());
    rep.add(anchor ? "anchor group " + std::to_string(*anchor + 1) + ": min(|I|/L,R)+min(|J|/L,R) >= R+2"
                   : "anchor group: min(|I|/L,R)+min(|J|/L,R) >= R+2",
            double(std::max<Index>(best, 0)), double(R + 2), anchor && best >= R + 2);
    auto compatible = [&](Index a, Index b) {
        return std::max(isize(intersect(gs[a].I, gs[b].I)), isize(intersect(gs[a].J, gs[b].J))) >= L;
    };
    add_ordering_clause(rep, isize(gs), compatible, "ordering with max(|I n I'|,|J n J'|) >= L between neighbours");
    rep.finalize();
    return rep;
}

CheckReport check_random_fiber(const Dims& dims, Index L, Index R, Index q, double epsilon) {
    require_positive(L, R);
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in (0, 1]");
    CheckReport rep;
    rep.name = "random-fiber";
    const Index I = dims.I, J = dims.J, LR = L * R;
    rep.add("I <= J", double(I), double(J), I <= J);
    const Index bound = (LR + 1) * (I - LR);
    rep.add("J > (LR+1)(I-LR)", double(J), double(bound), J > bound);
    rep.add("LR <= I/6", double(LR), double(I) / 6.0, 6 * LR <= I);
    const double need = std::max(12.0 * std::log(double(I) / epsilon + 1.0), double(2 * LR));
    rep.add("q >= max(12 ln(I/eps+1), 2LR)", double(q), need, double(q) >= need);
    rep.add("q <= I", double(q), double(I), q >= 1 && q <= I);
    rep.finalize();
    return rep;
}

}  // namespace radiomap
