#pragma once

#include <string>
#include <vector>

#include "radiomap/sampling.hpp"
#include "radiomap/solver.hpp"

namespace radiomap {

/// Weighted completion problem sum w^2 (y - model)^2 + ridge terms. `y` holds raw
/// observed values (entries with zero weight are ignored); the weights are
/// squared in the loss so sqrt(P) group weights add P copies of a group loss.
class MaskedProblem {
public:
    MaskedProblem(const Tensor3& y, const FiberMask& w);

    const Dims& dims() const { return dims_; }
    Index observed() const { return static_cast<Index>(by_row_.size()); }
    double data_energy() const { return energy_; }

    double loss(const Ll1Factors& factors, const Lambda& lambda) const;

    /// Exact minimizer over the factor of `mode` (1 = A, 2 = B, 3 = C) with the
    /// others fixed. A and B come back stacked.
    Matrix update(int mode, const Ll1Factors& factors, double lambda,
                  std::vector<std::string>* warnings = nullptr) const;

    struct Entry {
        Index i, j, k;
        double w2;   // squared weight
        double w2y;  // squared weight times observation
    };

private:
    Dims dims_;
    std::vector<Entry> by_row_, by_col_, by_band_;
    std::vector<std::size_t> row_start_, col_start_, band_start_;
    double energy_ = 0.0;
};

double masked_loss(const Ll1Factors& factors, const Tensor3& y, const FiberMask& w, const Lambda& lambda);

Matrix update_factor_masked(int mode, const Ll1Factors& factors, const Tensor3& y, const FiberMask& w,
                            double lambda, std::vector<std::string>* warnings = nullptr);

SolveResult bcd_solve_masked(const Tensor3& y, const FiberMask& w, const SolverConfig& config);

}  // namespace radiomap
