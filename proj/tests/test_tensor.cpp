#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "radiomap/tensor.hpp"
#include "test_util.hpp"

using namespace radiomap;
using namespace radiomap::testing;

namespace {

Matrix enumerate_unfolding(const Tensor3& t, int mode) {
    const Dims d = t.dims();
    Matrix m;
    if (mode == 1) m.resize(d.J * d.K, d.I);
    if (mode == 2) m.resize(d.I * d.K, d.J);
    if (mode == 3) m.resize(d.I * d.J, d.K);
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.J; ++j)
            for (Index i = 0; i < d.I; ++i) {
                if (mode == 1) m(k * d.J + j, i) = t(i, j, k);
                if (mode == 2) m(k * d.I + i, j) = t(i, j, k);
                if (mode == 3) m(j * d.I + i, k) = t(i, j, k);
            }
    return m;
}

}  // namespace

TEST(Synthesize, OuterProductByHand) {
    Ll1Factors f;
    f.A = {Matrix{{1.0}, {2.0}}};
    f.B = {Matrix{{3.0}}};
    f.C = Matrix{{5.0}};
    Tensor3 x = ll1_synthesize(f);
    EXPECT_EQ(x.dims(), (Dims{2, 1, 1}));
    EXPECT_DOUBLE_EQ(x(0, 0, 0), 15.0);
    EXPECT_DOUBLE_EQ(x(1, 0, 0), 30.0);
}

TEST(Synthesize, ZeroBlockGivesZeroTensor) {
    Rng rng = make_rng(3);
    Ll1Factors f = random_factors({3, 4, 2}, 2, 1, rng);
    f.A[0].setZero();
    EXPECT_EQ(ll1_synthesize(f).norm(), 0.0);
}

TEST(Synthesize, MatchesTripleLoop) {
    Rng rng = make_rng(4);
    Ll1Factors f = random_factors({4, 5, 6}, 2, 2, rng);
    Tensor3 x = ll1_synthesize(f);
    for (Index k = 0; k < 6; ++k)
        for (Index j = 0; j < 5; ++j)
            for (Index i = 0; i < 4; ++i) EXPECT_NEAR(x(i, j, k), ll1_entry(f, i, j, k), 1e-12);
}

TEST(Synthesize, ShapeErrorNamesFactor) {
    Rng rng = make_rng(5);
    Ll1Factors f = random_factors({4, 5, 6}, 2, 2, rng);
    f.B[1] = gaussian(3, 2, rng);
    try {
        ll1_synthesize(f);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("B[1]"), std::string::npos) << e.what();
    }
}

TEST(Unfold, DegenerateScalar) {
    Tensor3 t({1, 1, 1}, {7.0});
    for (int mode = 1; mode <= 3; ++mode) {
        Matrix m = unfold(t, mode).matrix;
        ASSERT_EQ(m.rows(), 1);
        ASSERT_EQ(m.cols(), 1);
        EXPECT_EQ(m(0, 0), 7.0);
    }
}

TEST(Unfold, TwoByTwoByTwoMatchesEnumeration) {
    Tensor3 t({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    EXPECT_EQ(t(1, 0, 0), 2.0);
    EXPECT_EQ(t(0, 1, 0), 3.0);
    EXPECT_EQ(t(0, 0, 1), 5.0);
    for (int mode = 1; mode <= 3; ++mode) EXPECT_EQ(unfold(t, mode).matrix, enumerate_unfolding(t, mode));
}

TEST(Unfold, RandomMatchesEnumeration) {
    Rng rng = make_rng(6);
    Tensor3 t = random_tensor({3, 4, 5}, rng);
    for (int mode = 1; mode <= 3; ++mode) EXPECT_EQ(unfold(t, mode).matrix, enumerate_unfolding(t, mode));
}

TEST(Unfold, InvalidModeRejected) {
    Tensor3 t({2, 2, 2});
    EXPECT_THROW(unfold(t, 0), ValidationError);
    EXPECT_THROW(unfold(t, 4), ValidationError);
}

TEST(Unfold, Mode3IsSlfTimesCTransposed) {
    Rng rng = make_rng(7);
    Ll1Factors f = random_factors({5, 4, 3}, 2, 3, rng);
    EXPECT_LT(rel_err(unfold(ll1_synthesize(f), 3).matrix, slf_matrix(f) * f.C.transpose()), 1e-12);
}

TEST(Unfold, ClosedFormsOnRandomModels) {
    Rng rng = make_rng(8);
    std::uniform_int_distribution<Index> dim(1, 12), rank(1, 3);
    for (int trial = 0; trial < 30; ++trial) {
        Dims d{dim(rng), dim(rng), dim(rng)};
        Index L = rank(rng), R = rank(rng);
        Ll1Factors f = random_factors(d, L, R, rng);
        Tensor3 x = ll1_synthesize(f);
        EXPECT_LT(rel_err(unfold(x, 1).matrix, partition_khatri_rao(f.C, f.stacked_B(), L) * f.stacked_A().transpose()),
                  1e-12);
        EXPECT_LT(rel_err(unfold(x, 2).matrix, partition_khatri_rao(f.C, f.stacked_A(), L) * f.stacked_B().transpose()),
                  1e-12);
        EXPECT_LT(rel_err(unfold(x, 3).matrix, slf_matrix(f) * f.C.transpose()), 1e-12);
    }
}

TEST(Fold, RoundTripAllModes) {
    Rng rng = make_rng(9);
    Tensor3 t = random_tensor({4, 3, 5}, rng);
    for (int mode = 1; mode <= 3; ++mode) EXPECT_EQ(max_abs_diff(fold(unfold(t, mode)), t), 0.0);
}

TEST(Fold, ZeroMatrixGivesZeroTensor) {
    Tensor3 t = fold(Matrix::Zero(12, 2), 1, {2, 3, 4});
    EXPECT_EQ(t.dims(), (Dims{2, 3, 4}));
    EXPECT_EQ(t.norm(), 0.0);
}

TEST(Fold, ShapeMismatchRejected) { EXPECT_THROW(fold(Matrix::Zero(5, 2), 1, {2, 3, 4}), DimensionError); }

TEST(ModeProduct, IdentityIsNoOp) {
    Rng rng = make_rng(10);
    Tensor3 t = random_tensor({3, 4, 5}, rng);
    EXPECT_EQ(max_abs_diff(mode_product(t, Matrix::Identity(3, 3), 1), t), 0.0);
    EXPECT_EQ(max_abs_diff(mode_product(t, Matrix::Identity(4, 4), 2), t), 0.0);
    EXPECT_EQ(max_abs_diff(mode_product(t, Matrix::Identity(5, 5), 3), t), 0.0);
}

TEST(ModeProduct, SelectionEqualsSlicing) {
    Rng rng = make_rng(11);
    Tensor3 t = random_tensor({3, 2, 2}, rng);
    std::vector<Index> rows{0, 2};
    Tensor3 g = mode_product(t, selection_matrix(rows, 3), 1);
    ASSERT_EQ(g.dims(), (Dims{2, 2, 2}));
    for (Index k = 0; k < 2; ++k)
        for (Index j = 0; j < 2; ++j)
            for (Index m = 0; m < 2; ++m) EXPECT_EQ(g(m, j, k), t(rows[m], j, k));
}

TEST(ModeProduct, DistinctModesCommute) {
    Rng rng = make_rng(12);
    Tensor3 t = random_tensor({4, 5, 3}, rng);
    Matrix P = gaussian(2, 4, rng), Q = gaussian(3, 5, rng);
    Tensor3 a = mode_product(mode_product(t, P, 1), Q, 2);
    Tensor3 b = mode_product(mode_product(t, Q, 2), P, 1);
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
}

TEST(ModeProduct, Ll1ModelTransformsFactors) {
    Rng rng = make_rng(13);
    Ll1Factors f = random_factors({5, 6, 4}, 2, 2, rng);
    Matrix P = gaussian(3, 5, rng), Q = gaussian(4, 6, rng), R3 = gaussian(2, 4, rng);
    Tensor3 lhs = mode_product(mode_product(mode_product(ll1_synthesize(f), P, 1), Q, 2), R3, 3);
    Ll1Factors g = f;
    for (Index r = 0; r < 2; ++r) {
        g.A[r] = P * f.A[r];
        g.B[r] = Q * f.B[r];
    }
    g.C = R3 * f.C;
    Tensor3 rhs = ll1_synthesize(g);
    EXPECT_LT(rel_err(lhs.mode3(), rhs.mode3()), 1e-12);
}

TEST(ModeProduct, InnerDimensionMismatch) {
    Tensor3 t({3, 4, 5});
    EXPECT_THROW(mode_product(t, Matrix::Identity(4, 4), 1), DimensionError);
}

TEST(KhatriRao, Scalars) { EXPECT_EQ(khatri_rao(Matrix{{2.0}}, Matrix{{3.0}})(0, 0), 6.0); }

TEST(KhatriRao, HandExpansion) {
    Matrix X{{1, 2}, {3, 4}}, Y{{5, 6}, {7, 8}};
    Matrix expected{{5, 12}, {7, 16}, {15, 24}, {21, 32}};
    EXPECT_EQ(khatri_rao(X, Y), expected);
}

TEST(KhatriRao, MatchesDoubleLoop) {
    Rng rng = make_rng(14);
    Matrix X = gaussian(4, 3, rng), Y = gaussian(5, 3, rng);
    Matrix kr = khatri_rao(X, Y);
    ASSERT_EQ(kr.rows(), 20);
    for (Index c = 0; c < 3; ++c)
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 5; ++j) EXPECT_NEAR(kr(i * 5 + j, c), X(i, c) * Y(j, c), 1e-14);
}

TEST(KhatriRao, ColumnMismatch) {
    EXPECT_THROW(khatri_rao(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), DimensionError);
}

TEST(PartitionKhatriRao, SingleBlockIsKronecker) {
    Rng rng = make_rng(15);
    Matrix c = gaussian(3, 1, rng), M = gaussian(4, 2, rng);
    Matrix pk = partition_khatri_rao(c, M, 2);
    for (Index k = 0; k < 3; ++k) EXPECT_LT(rel_err(pk.middleRows(k * 4, 4), c(k, 0) * M), 1e-15);
}

TEST(PartitionKhatriRao, UnitWidthsCollapseToKhatriRao) {
    Rng rng = make_rng(16);
    Matrix C = gaussian(3, 4, rng), M = gaussian(5, 4, rng);
    EXPECT_LT(rel_err(partition_khatri_rao(C, M, 1), khatri_rao(C, M)), 1e-15);
}

TEST(PartitionKhatriRao, MatchesBlockwise) {
    Rng rng = make_rng(17);
    Matrix C = gaussian(3, 2, rng), M = gaussian(4, 5, rng);
    std::vector<Index> widths{2, 3};
    Matrix pk = partition_khatri_rao(C, M, widths);
    ASSERT_EQ(pk.cols(), 5);
    Index col = 0;
    for (Index r = 0; r < 2; ++r) {
        for (Index l = 0; l < widths[r]; ++l, ++col)
            for (Index k = 0; k < 3; ++k)
                for (Index i = 0; i < 4; ++i) EXPECT_NEAR(pk(k * 4 + i, col), C(k, r) * M(i, col), 1e-14);
    }
}

TEST(PartitionKhatriRao, BlockCountMismatch) {
    std::vector<Index> widths{2, 2, 1};
    EXPECT_THROW(partition_khatri_rao(Matrix::Zero(3, 2), Matrix::Zero(4, 5), widths), DimensionError);
}

TEST(SlfMatrix, HandExample) {
    Ll1Factors f;
    f.A = {Matrix{{1.0}, {0.0}}};
    f.B = {Matrix{{1.0}, {1.0}}};
    f.C = Matrix{{1.0}};
    Vector expected(4);
    expected << 1, 0, 1, 0;
    EXPECT_EQ(Vector(slf_matrix(f).col(0)), expected);
}

TEST(SlfMatrix, ZeroBlockGivesZeroColumn) {
    Rng rng = make_rng(18);
    Ll1Factors f = random_factors({4, 4, 3}, 2, 2, rng);
    f.A[1].setZero();
    EXPECT_EQ(slf_matrix(f).col(1).norm(), 0.0);
    EXPECT_GT(slf_matrix(f).col(0).norm(), 0.0);
}

TEST(SlfMatrix, ColumnsHaveRankL) {
    Rng rng = make_rng(19);
    Ll1Factors f = random_factors({7, 6, 3}, 3, 2, rng);
    Matrix s = slf_matrix(f);
    for (Index r = 0; r < 2; ++r) {
        Matrix sr = Eigen::Map<const Matrix>(s.col(r).data(), 7, 6);
        Vector sv = Eigen::JacobiSVD<Matrix>(sr).singularValues();
        Index rank = (sv.array() > 1e-10).count();
        EXPECT_EQ(rank, 3);
    }
}

TEST(Ll1Factors, StackedRoundTrip) {
    Rng rng = make_rng(20);
    Ll1Factors f = random_factors({4, 5, 3}, 2, 3, rng);
    Ll1Factors g = Ll1Factors::from_stacked(f.stacked_A(), f.stacked_B(), f.C, 2);
    for (Index r = 0; r < 3; ++r) {
        EXPECT_EQ(g.A[r], f.A[r]);
        EXPECT_EQ(g.B[r], f.B[r]);
    }
    EXPECT_EQ(f.total_rank(), 6);
}
