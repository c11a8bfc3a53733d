#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radiomap/scenario.hpp"
#include "radiomap/tensor.hpp"

namespace radiomap {

/// Sorted, duplicate-free, zero-based indices.
using IndexSet = std::vector<Index>;

IndexSet full_range(Index n);
IndexSet intersect(const IndexSet& a, const IndexSet& b);
IndexSet unite(const IndexSet& a, const IndexSet& b);

/// Two moving sensors: sensor 1 sweeps rows s1 over bands s3, sensor 2 sweeps
/// columns s2 over bands s4. Observations are X(s1,:,s3) and X(:,s2,s4).
struct SlabPlan {
    IndexSet s1, s2, s3, s4;

    Index M() const { return static_cast<Index>(s1.size()); }
    Index N() const { return static_cast<Index>(s2.size()); }
    void validate(const Dims& dims) const;
    bool covers_all_bands(Index K) const;
};

/// M rows and N columns spread evenly over the grid, every band observed by both sensors.
SlabPlan equispaced_slab_plan(const Dims& dims, Index M, Index N);

struct FiberGroup {
    IndexSet I, J, K;
};

/// D sensor groups; group d observes every (i, j, k) in I_d x J_d x K_d.
struct FiberGroupPlan {
    std::vector<FiberGroup> groups;

    void validate(const Dims& dims) const;
};

/// Nonnegative weight per entry, zero meaning unobserved.
struct FiberMask {
    Tensor3 weights;
    Index observed_count = 0;

    static FiberMask from_weights(Tensor3 weights);
    static FiberMask all_observed(const Dims& dims);
};

Tensor3 subtensor(const Tensor3& x, const IndexSet& rows, const IndexSet& cols, const IndexSet& bands);

/// (X(s1,:,s3), X(:,s2,s4)).
std::pair<Tensor3, Tensor3> slab_subtensors(const Tensor3& x, const SlabPlan& plan);
std::vector<Tensor3> group_subtensors(const Tensor3& x, const FiberGroupPlan& plan);

/// Weight sqrt(P) where P is the number of groups observing the entry, so
/// squared weights sum the per-group losses.
FiberMask plan_to_mask(const FiberGroupPlan& plan, const Dims& dims);

/// Exactly q of the I entries of every column X(:, j, k), uniformly without replacement.
FiberMask random_fiber_mask(const Dims& dims, Index q, Rng& rng);

// ---------------------------------------------------------------------------
// Identifiability checks. Every check evaluates sufficient conditions only.
// ---------------------------------------------------------------------------

struct CheckClause {
    std::string condition;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct CheckReport {
    std::string name;
    bool satisfied = false;
    std::vector<CheckClause> clauses;
    std::optional<std::vector<Index>> witness;  // zero-based group ordering
    std::string disclaimer = "sufficient conditions only; a failed check does not imply non-identifiability";

    void add(std::string condition, double value, double threshold, bool pass);
    void finalize();
};

/// min(floor(a/L), R) + min(floor(b/L), R).
Index ll1_split_score(Index a, Index b, Index L, Index R);

/// Essential uniqueness of a full LL1 tensor, K >= R variant.
CheckReport check_ll1_uniqueness(const Dims& dims, Index L, Index R);
/// Essential uniqueness without K >= R.
CheckReport check_ll1_uniqueness_relaxed(const Dims& dims, Index L, Index R);

CheckReport check_slab_identifiability(const SlabPlan& plan, const Dims& dims, Index L, Index R);
CheckReport check_group_identifiability(const FiberGroupPlan& plan, const Dims& dims, Index L, Index R);
CheckReport check_anchor_identifiability(const FiberGroupPlan& plan, const Dims& dims, Index L, Index R);
CheckReport check_random_fiber(const Dims& dims, Index L, Index R, Index q, double epsilon);

/// Hamiltonian path through the graph whose edges are `compatible(a, b)` pairs.
/// Exhaustive over permutations for n <= 8, bitmask DP otherwise (n <= 24).
std::optional<std::vector<Index>> find_group_ordering(Index n,
                                                      const std::function<bool(Index, Index)>& compatible);

}  // namespace radiomap
