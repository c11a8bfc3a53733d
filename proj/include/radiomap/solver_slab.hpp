#pragma once

#include <string>
#include <vector>

#include "radiomap/sampling.hpp"
#include "radiomap/solver.hpp"

namespace radiomap {

/// The two slab observations X(s1,:,s3) and X(:,s2,s4) plus the plan that produced them.
struct SlabData {
    Tensor3 x1;
    Tensor3 x2;
    SlabPlan plan;
    Dims dims;  // full tensor

    void validate() const;
};

SlabData make_slab_data(const Tensor3& x, const SlabPlan& plan);

/// |X1 - sum (P A_r B_r^T) o (R1 c_r)|^2 + |X2 - sum (A_r B_r^T Q^T) o (R2 c_r)|^2
///   + la |A|^2 + lb |B|^2 + lc |C|^2
double slab_loss(const Ll1Factors& factors, const SlabData& data, const Lambda& lambda);

/// Solves diag(h1) A H2 + A H4 = H5 for A. Because diag(h1) is 0/1, row i
/// satisfies A(i,:) (h1_i H2 + H4) = H5(i,:), so only H2 + H4 and H4 are factorized.
Matrix solve_row_decoupled_sylvester(const Vector& h1_diag, const Matrix& H2, const Matrix& H4, const Matrix& H5);

/// Exact block minimizers. A and B are returned stacked (I x LR, J x LR).
Matrix update_A(const Ll1Factors& factors, const SlabData& data, double lambda_a);
Matrix update_B(const Ll1Factors& factors, const SlabData& data, double lambda_b);
Matrix update_C(const Ll1Factors& factors, const SlabData& data, double lambda_c,
                std::vector<std::string>* warnings = nullptr);

/// Cyclic A -> B -> C exact block minimization with restarts.
SolveResult bcd_solve(const SlabData& data, const SolverConfig& config);

}  // namespace radiomap
