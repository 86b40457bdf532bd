// SPDX-License-Identifier: Apache-2.0
//
// fasar: SAR-aware precoding and fluid antenna positioning for multiuser MIMO
// Copyright (C) 2026 The fasar authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <gtest/gtest.h>

#include "fasar/exposure.hpp"
#include "test_util.hpp"

using namespace fasar;
using namespace fasar::testing;

namespace
{

const std::complex<double> kJ(0.0, 1.0);

// Quadratic form accumulated entry by entry.
double oracle_sar(const CMatrixd &P, const CMatrixd &R)
{
    std::complex<double> acc = 0.0;
    for (Eigen::Index k = 0; k < P.cols(); ++k)
        for (Eigen::Index a = 0; a < R.rows(); ++a)
            for (Eigen::Index b = 0; b < R.cols(); ++b)
                acc += std::conj(P(a, k)) * R(a, b) * P(b, k);
    return acc.real();
}

} // namespace

TEST(SarValue, ZeroPrecoderIsZero)
{
    const auto model = default_sar_model<double>(4, 1.6);
    EXPECT_EQ(sar_value(Precoderd(Precoderd::Zero(4, 3)), model), 0.0);
}

TEST(SarValue, FirstUnitVectorGivesDiagonal)
{
    const auto model = default_sar_model<double>(4, 1.6);
    Precoderd P = Precoderd::Zero(4, 1);
    P(0, 0) = 1.0;
    EXPECT_NEAR(sar_value(P, model), 1.6, 1e-15);
}

TEST(SarValue, ImaginaryOffDiagonalsCancel)
{
    const auto model = default_sar_model<double>(4, 1.6);
    Precoderd P = Precoderd::Zero(4, 1);
    P(0, 0) = 1.0;
    P(1, 0) = 1.0;
    EXPECT_NEAR(sar_value(P, model), 3.2, 1e-15);
}

TEST(SarValue, MatchesEntrywiseOracle)
{
    const auto model = default_sar_model<double>(4, 1.6);
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
    {
        const Precoderd P = random_complex(4, 4, seed);
        const double ref = oracle_sar(P, model.matrix());
        EXPECT_NEAR(sar_value(P, model), ref, 1e-12 * ref);
    }
}

TEST(SarValue, QuadraticInScale)
{
    const auto model = default_sar_model<double>(4, 1.6);
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const Precoderd P = random_complex(4, 3, seed);
        const std::complex<double> c(0.3 * static_cast<double>(seed), -1.7);
        const double base = sar_value(P, model);
        EXPECT_NEAR(sar_value((c * P).eval(), model), std::norm(c) * base, 1e-10 * std::norm(c) * base);
    }
}

TEST(SarValue, NonNegativeAndPhaseInvariant)
{
    for (int M : {1, 2, 4, 6})
    {
        const auto model = default_sar_model<double>(M, 1.0, 5);
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
        {
            const Precoderd P = random_complex(M, 3, seed);
            const double base = sar_value(P, model);
            EXPECT_GE(base, 0.0);
            Precoderd Q = P;
            for (Eigen::Index k = 0; k < Q.cols(); ++k)
                Q.col(k) *= std::polar(1.0, 0.9 * static_cast<double>(k + seed));
            EXPECT_NEAR(sar_value(Q, model), base, 1e-12 * std::max(1.0, base));
        }
    }
}

TEST(PublishedMatrix, Entries)
{
    const CMatrixd R = paper_sar_matrix<double>();
    ASSERT_EQ(R.rows(), 4);
    for (int i = 0; i < 4; ++i)
        EXPECT_EQ(R(i, i), std::complex<double>(1.6, 0.0));
    EXPECT_EQ(R(0, 1), -1.2 * kJ);
    EXPECT_EQ(R(1, 0), 1.2 * kJ);
    EXPECT_EQ(R(1, 2), -1.2 * kJ);
    EXPECT_EQ(R(3, 2), 1.2 * kJ);
    EXPECT_EQ(R(0, 2), std::complex<double>(-0.42, 0.0));
    EXPECT_EQ(R(1, 3), std::complex<double>(-0.42, 0.0));
    EXPECT_EQ(R(0, 3), std::complex<double>(0.0, 0.0));
}

TEST(PublishedMatrix, HermitianAndPsd)
{
    const CMatrixd R = paper_sar_matrix<double>();
    EXPECT_LE((R - R.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<CMatrixd> es(R);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    const SarModeld model(R, 1.6);
    EXPECT_FALSE(model.synthetic());
}

TEST(SyntheticMatrix, ScalarCase)
{
    const CMatrixd R = synthesize_sar_matrix<double>(1, 0);
    ASSERT_EQ(R.rows(), 1);
    EXPECT_NEAR(R(0, 0).real(), 1.6, 1e-15);
}

TEST(SyntheticMatrix, SeedZeroReproducesPublishedBands)
{
    const CMatrixd R = banded_sar_matrix<double>(4, SarPattern<double>{}, 0, 0.0, false);
    EXPECT_LE((R - paper_sar_matrix<double>()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SyntheticMatrix, AlwaysHermitianPsdAndFlagged)
{
    for (int M : {2, 3, 5, 8, 12})
        for (std::uint64_t seed = 0; seed < 10; ++seed)
        {
            const auto model = default_sar_model<double>(M, 1.0, seed);
            const CMatrixd &R = model.matrix();
            EXPECT_LE((R - R.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_GE(model.eigenvalues().minCoeff(), -1e-10);
            EXPECT_TRUE(model.synthetic());
        }
}

TEST(SyntheticMatrix, DeterministicPerSeed)
{
    EXPECT_EQ(synthesize_sar_matrix<double>(6, 3), synthesize_sar_matrix<double>(6, 3));
    EXPECT_NE(synthesize_sar_matrix<double>(6, 3), synthesize_sar_matrix<double>(6, 4));
}

TEST(SarModelValidation, RejectsBadInput)
{
    CMatrixd R = paper_sar_matrix<double>();
    EXPECT_THROW(SarModeld(R, 0.0), ConfigError);
    EXPECT_THROW(SarModeld(R, -1.0), ConfigError);
    CMatrixd skew = R;
    skew(0, 1) += 1e-6;
    EXPECT_THROW(SarModeld(skew, 1.0), ConfigError);
    CMatrixd indefinite = CMatrixd::Identity(2, 2);
    indefinite(1, 1) = -1e-3;
    EXPECT_THROW(SarModeld(indefinite, 1.0), ConfigError);
    EXPECT_THROW(SarModeld(CMatrixd(2, 3), 1.0), ConfigError);
}

TEST(SarModelValidation, MinPositiveEigenvalueSkipsNullSpace)
{
    CMatrixd R = CMatrixd::Zero(3, 3);
    R(0, 0) = 2.0;
    R(1, 1) = 0.5;
    const SarModeld model(R, 1.0);
    EXPECT_NEAR(model.min_positive_eigenvalue(), 0.5, 1e-15);
}
