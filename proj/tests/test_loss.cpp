#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "scfa/loss.hpp"
#include "test_util.hpp"

using namespace scfa;
using testutil::Batch;
using testutil::make_distinct_label_batch;
using testutil::make_random_batch;
using testutil::naive_scfa_loss;

TEST(NormalizeTest, ThreeFourFive) {
    auto v = l2_normalize({3.0, 4.0});
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(NormalizeTest, UnitVectorUnchanged) {
    auto v = l2_normalize({1.0, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(v[0], 1.0);
    EXPECT_DOUBLE_EQ(v[1], 0.0);
}

TEST(NormalizeTest, ZeroVectorStaysZero) {
    auto v = l2_normalize({0.0, 0.0, 0.0, 0.0});
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(NormalizeTest, RowsHaveUnitNorm) {
    Batch b = make_random_batch(8, 16, 3, 11, /*normalized=*/false);
    Tensor z = l2_normalize_rows(b.z);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double nsq = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) nsq += z.at(i, j) * z.at(i, j);
        EXPECT_NEAR(std::sqrt(nsq), 1.0, 1e-6);
    }
}

TEST(SimilarityTest, IdenticalRowsHitInverseTemperature) {
    Tensor z({2, 3});
    z.at(0, 0) = 1.0;
    z.at(1, 0) = 1.0;
    Tensor s = similarity_matrix(z, 0.07);
    EXPECT_NEAR(s.at(0, 1), 1.0 / 0.07, 1e-12);
    EXPECT_NEAR(s.at(0, 0), 1.0 / 0.07, 1e-12);
}

TEST(SimilarityTest, OrthogonalRowsAreZero) {
    Tensor z({2, 2});
    z.at(0, 0) = 1.0;
    z.at(1, 1) = 1.0;
    Tensor s = similarity_matrix(z, 0.3);
    EXPECT_DOUBLE_EQ(s.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.at(1, 0), 0.0);
}

TEST(SimilarityTest, MatchesBruteForceDots) {
    Batch b = make_random_batch(6, 8, 3, 21);
    Tensor s = similarity_matrix(b.z, 0.5);
    for (std::size_t i = 0; i < b.z.rows(); ++i) {
        for (std::size_t j = 0; j < b.z.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < b.z.cols(); ++k) dot += b.z.at(i, k) * b.z.at(j, k);
            ASSERT_NEAR(s.at(i, j), 2.0 * dot, 1e-12);
            ASSERT_EQ(s.at(i, j), s.at(j, i));  // exact symmetry
        }
    }
}

TEST(SimilarityTest, TemperatureScalingIdentity) {
    Batch b = make_random_batch(4, 8, 2, 31);
    Tensor s1 = similarity_matrix(b.z, 0.07);
    Tensor s2 = similarity_matrix(b.z, 0.5);
    for (std::size_t i = 0; i < s1.size(); ++i) {
        EXPECT_NEAR(s1.data[i], (0.5 / 0.07) * s2.data[i], 1e-12);
    }
}

TEST(SimilarityTest, RejectsNonPositiveTemperature) {
    Tensor z({2, 2});
    EXPECT_THROW(similarity_matrix(z, 0.0), std::invalid_argument);
    EXPECT_THROW(similarity_matrix(z, -1.0), std::invalid_argument);
}

TEST(PositiveMaskTest, SingleVideoSiblingOnly) {
    PositiveMask m = positive_mask({0, 0}, {"a", "a"}, {0, 1});
    EXPECT_FALSE(m.at(0, 0));
    EXPECT_TRUE(m.at(0, 1));
    EXPECT_TRUE(m.at(1, 0));
    EXPECT_FALSE(m.at(1, 1));
}

TEST(PositiveMaskTest, DistinctLabelsKeepOnlySiblings) {
    PositiveMask m = positive_mask({0, 0, 1, 1}, {"a", "a", "b", "b"}, {0, 1, 0, 1});
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(m.count_row(i), 1u);
        const std::size_t sib = (i % 2 == 0) ? i + 1 : i - 1;
        EXPECT_TRUE(m.at(i, sib));
    }
}

TEST(PositiveMaskTest, SharedLabelMakesAllPairsPositive) {
    PositiveMask m = positive_mask({3, 3, 3, 3}, {"a", "a", "b", "b"}, {0, 1, 0, 1});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m.at(i, j), i != j);
}

TEST(PositiveMaskTest, SymmetricWithFalseDiagonal) {
    Batch b = make_random_batch(8, 4, 3, 17);
    PositiveMask m = positive_mask(b.labels, b.video_ids, b.view_ids);
    for (std::size_t i = 0; i < m.n; ++i) {
        EXPECT_FALSE(m.at(i, i));
        const std::size_t sib = (i % 2 == 0) ? i + 1 : i - 1;
        EXPECT_TRUE(m.at(i, sib));
        for (std::size_t j = 0; j < m.n; ++j) EXPECT_EQ(m.at(i, j), m.at(j, i));
    }
}

TEST(PositiveMaskTest, RejectsMismatchedLengths) {
    EXPECT_THROW(positive_mask({0, 0}, {"a"}, {0, 1}), std::invalid_argument);
    EXPECT_THROW(positive_mask({0, 0}, {"a", "a"}, {0}), std::invalid_argument);
}

TEST(ScfaLossTest, IdenticalSiblingPairIsZero) {
    Tensor z({2, 4});
    z.at(0, 2) = 1.0;
    z.at(1, 2) = 1.0;
    EXPECT_EQ(scfa_loss(z, {0, 0}, {"a", "a"}, {0, 1}, 0.07), 0.0);
}

TEST(ScfaLossTest, TwoClassOrthogonalFixture) {
    // two videos on orthogonal axes, one per class: every anchor sees one
    // positive at similarity 1 and two negatives at similarity 0, so each
    // row term is log(1 + 2/e)
    Tensor z({4, 2});
    z.at(0, 0) = 1.0;
    z.at(1, 0) = 1.0;
    z.at(2, 1) = 1.0;
    z.at(3, 1) = 1.0;
    const double loss = scfa_loss(z, {0, 0, 1, 1}, {"a", "a", "b", "b"}, {0, 1, 0, 1}, 1.0);
    EXPECT_NEAR(loss, 0.5514447139320511, 1e-12);
    EXPECT_NEAR(loss, std::log1p(2.0 / std::exp(1.0)), 1e-12);
}

TEST(ScfaLossTest, MatchesNaiveTripleLoopOracle) {
    const double taus[] = {0.07, 0.5, 1.0};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + (trial % 7);
        Batch b = make_random_batch(n, 4 + (trial % 13), 3, 1000 + trial);
        const double tau = taus[trial % 3];
        ASSERT_NEAR(scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, tau),
                    naive_scfa_loss(b, tau), 1e-12);
    }
}

TEST(ScfaLossTest, EqualsNtxentWhenAllLabelsDistinct) {
    for (int trial = 0; trial < 50; ++trial) {
        Batch b = make_distinct_label_batch(2 + (trial % 6), 8, 500 + trial);
        const double scfa_val = scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 0.2);
        const double ntxent_val = ntxent_loss(b.z, 0.2);
        ASSERT_NEAR(scfa_val, ntxent_val, 1e-12);
    }
}

TEST(ScfaLossTest, NonNegativeOnRandomBatches) {
    for (int trial = 0; trial < 500; ++trial) {
        Batch b = make_random_batch(2 + (trial % 8), 4, 2 + (trial % 3), trial);
        ASSERT_GE(scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 0.1), 0.0);
    }
}

TEST(ScfaLossTest, PermutationInvariant) {
    Batch b = make_random_batch(6, 8, 2, 77);
    const double base = scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 0.07);

    std::vector<std::size_t> perm(b.z.rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(5);
    std::shuffle(perm.begin(), perm.end(), rng);

    Batch p;
    p.z = Tensor({b.z.rows(), b.z.cols()});
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t j = 0; j < b.z.cols(); ++j) p.z.at(i, j) = b.z.at(perm[i], j);
        p.labels.push_back(b.labels[perm[i]]);
        p.video_ids.push_back(b.video_ids[perm[i]]);
        p.view_ids.push_back(b.view_ids[perm[i]]);
    }
    EXPECT_NEAR(scfa_loss(p.z, p.labels, p.video_ids, p.view_ids, 0.07), base, 1e-12);
}

TEST(ScfaLossTest, RotationInvariant) {
    Batch b = make_random_batch(5, 8, 2, 88);
    Tensor q = testutil::random_rotation(8, 3);
    Tensor zr = testutil::matmul(b.z, q);
    const double base = scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 0.07);
    EXPECT_NEAR(scfa_loss(zr, b.labels, b.video_ids, b.view_ids, 0.07), base, 1e-10);
}

TEST(ScfaLossTest, EmptyPositiveRowsContributeZeroWithWarning) {
    // externally supplied batch: no siblings, all labels distinct
    Tensor z = make_random_batch(2, 4, 2, 9).z;
    testing::internal::CaptureStderr();
    const double loss = scfa_loss(z, {0, 1, 2, 3}, {"a", "b", "c", "d"}, {0, 1, 0, 1}, 0.5);
    const std::string err = testing::internal::GetCapturedStderr();
    EXPECT_EQ(loss, 0.0);
    EXPECT_NE(err.find("warning"), std::string::npos);
    EXPECT_NE(err.find("no positives"), std::string::npos);
}

TEST(ScfaLossTest, FiniteAtVerySmallTemperature) {
    Batch b = make_random_batch(8, 16, 3, 123);
    const double loss = scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 1e-3);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GE(loss, 0.0);
}

TEST(ScfaLossTest, ErrorPaths) {
    Batch b = make_random_batch(2, 4, 2, 1);
    EXPECT_THROW(scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, 0.0), std::invalid_argument);
    EXPECT_THROW(scfa_loss(b.z, b.labels, b.video_ids, b.view_ids, -0.1), std::invalid_argument);

    Tensor odd({3, 4});
    EXPECT_THROW(scfa_loss(odd, {0, 0, 1}, {"a", "a", "b"}, {0, 1, 0}, 0.1),
                 std::invalid_argument);
    EXPECT_THROW(scfa_loss(b.z, {0, 0}, b.video_ids, b.view_ids, 0.1), std::invalid_argument);
}

TEST(NtxentLossTest, IdenticalPairIsZero) {
    Tensor z({2, 3});
    z.at(0, 1) = 1.0;
    z.at(1, 1) = 1.0;
    EXPECT_EQ(ntxent_loss(z, 0.07), 0.0);
}

TEST(NtxentLossTest, MutuallyOrthogonalRowsGiveLogThree) {
    Tensor z({4, 4});
    for (std::size_t i = 0; i < 4; ++i) z.at(i, i) = 1.0;
    EXPECT_NEAR(ntxent_loss(z, 1.0), std::log(3.0), 1e-12);
    EXPECT_NEAR(ntxent_loss(z, 1.0), 1.0986122886681098, 1e-12);
}

TEST(NtxentLossTest, ErrorPaths) {
    Tensor z({2, 2});
    EXPECT_THROW(ntxent_loss(z, 0.0), std::invalid_argument);
    Tensor odd({3, 2});
    EXPECT_THROW(ntxent_loss(odd, 0.1), std::invalid_argument);
}

TEST(EmbeddingBatchTest, ValidatesSiblingStructure) {
    Batch b = make_random_batch(3, 4, 2, 55);
    EmbeddingBatch eb{b.z, b.labels, b.video_ids, b.view_ids};
    EXPECT_NO_THROW(eb.validate());

    EmbeddingBatch broken = eb;
    broken.video_ids[1] = "other";
    EXPECT_THROW(broken.validate(), std::invalid_argument);

    EmbeddingBatch same_view = eb;
    same_view.view_ids[1] = same_view.view_ids[0];
    EXPECT_THROW(same_view.validate(), std::invalid_argument);

    EmbeddingBatch short_meta = eb;
    short_meta.labels.pop_back();
    EXPECT_THROW(short_meta.validate(), std::invalid_argument);
}
