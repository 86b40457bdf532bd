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

#ifndef FASAR_EXPOSURE_HPP
#define FASAR_EXPOSURE_HPP

#include <random>

#include "fasar/types.hpp"

namespace fasar
{

/// Quadratic SAR surrogate: SAR(P) = sum_k p_k^H R p_k, with a budget Q0 in W/kg.
///
/// R must be Hermitian (to 1e-12) and positive semidefinite (smallest eigenvalue
/// >= -1e-10); both are checked on construction and the object is immutable after.
/// Matrices for M != 4 are synthetic and carry `synthetic() == true`.
template <typename Real>
class SarModel
{
public:
    static constexpr double hermitian_tolerance = 1e-12;
    static constexpr double psd_tolerance = -1e-10;

    SarModel(CMatrix<Real> matrix, Real budget, bool synthetic = false)
        : matrix_(std::move(matrix)), budget_(budget), synthetic_(synthetic)
    {
        if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1)
            throw ConfigError("SAR matrix must be square and non-empty");
        if (!(budget_ > Real(0)))
            throw ConfigError("SAR budget must be positive");
        if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > Real(hermitian_tolerance))
            throw ConfigError("SAR matrix is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(matrix_, Eigen::EigenvaluesOnly);
        eigenvalues_ = es.eigenvalues();
        if (eigenvalues_.minCoeff() < Real(psd_tolerance))
            throw ConfigError("SAR matrix is not positive semidefinite");
    }

    const CMatrix<Real> &matrix() const { return matrix_; }
    Real budget() const { return budget_; }
    bool synthetic() const { return synthetic_; }
    Eigen::Index size() const { return matrix_.rows(); }
    const RVector<Real> &eigenvalues() const { return eigenvalues_; }

    // Smallest strictly positive eigenvalue of (R + R^H) / 2.
    Real min_positive_eigenvalue() const
    {
        const Real floor = std::max(Real(1e-12), Real(1e-12) * eigenvalues_.maxCoeff());
        Real best = std::numeric_limits<Real>::infinity();
        for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i)
            if (eigenvalues_[i] > floor)
                best = std::min(best, eigenvalues_[i]);
        return best;
    }

    SarModel with_budget(Real budget) const { return SarModel(matrix_, budget, synthetic_); }

private:
    CMatrix<Real> matrix_;
    Real budget_;
    bool synthetic_;
    RVector<Real> eigenvalues_;
};

template <typename Real>
Real sar_value(const Precoder<Real> &P, const CMatrix<Real> &R)
{
    if (P.rows() != R.rows())
        throw ConfigError("precoder rows do not match the SAR matrix");
    const std::complex<Real> total = (P.adjoint() * R * P).trace();
    const Real scale = std::max(Real(1), std::abs(total.real()));
    if (std::abs(total.imag()) > Real(1e-10) * scale)
        throw SolverError("SAR quadratic form has a non-negligible imaginary part");
    return std::max(Real(0), total.real());
}

template <typename Real>
Real sar_value(const Precoder<Real> &P, const SarModel<Real> &model)
{
    return sar_value(P, model.matrix());
}

// Banded pattern of the published 4x4 matrix: diagonal d, first super-diagonal
// -j*c (sub-diagonal +j*c), second off-diagonals -s, zero elsewhere.
template <typename Real>
struct SarPattern
{
    Real diagonal = Real(1.6);
    Real first_off = Real(1.2);
    Real second_off = Real(0.42);
};

// Builds the banded matrix with optional per-entry multiplicative jitter, then
// projects onto the PSD cone by clipping negative eigenvalues to zero.
template <typename Real>
CMatrix<Real> banded_sar_matrix(Eigen::Index M, const SarPattern<Real> &pattern, std::uint64_t seed, Real jitter,
                                bool clip = true)
{
    if (M < 1)
        throw ConfigError("SAR matrix size must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u(Real(1) - jitter, Real(1) + jitter);
    auto draw = [&]() { return jitter > Real(0) ? u(rng) : Real(1); };

    const std::complex<Real> j(Real(0), Real(1));
    CMatrix<Real> R = CMatrix<Real>::Zero(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        R(i, i) = pattern.diagonal * draw();
    for (Eigen::Index i = 0; i + 1 < M; ++i)
    {
        R(i, i + 1) = -j * pattern.first_off * draw();
        R(i + 1, i) = std::conj(R(i, i + 1));
    }
    for (Eigen::Index i = 0; i + 2 < M; ++i)
    {
        R(i, i + 2) = -pattern.second_off * draw();
        R(i + 2, i) = R(i, i + 2);
    }
    if (!clip)
        return R;

    Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(R);
    const RVector<Real> clipped = es.eigenvalues().cwiseMax(Real(0));
    CMatrix<Real> out = es.eigenvectors() * clipped.template cast<std::complex<Real>>().asDiagonal() *
                        es.eigenvectors().adjoint();
    // Restore exact Hermitian symmetry lost to rounding.
    return (out + out.adjoint()) / Real(2);
}

// The published 4x4 SAR matrix, unmodified.
template <typename Real>
CMatrix<Real> paper_sar_matrix()
{
    return banded_sar_matrix<Real>(4, SarPattern<Real>{}, 0, Real(0), false);
}

// Synthetic matrix for arbitrary M. Seed 0 reproduces the published band values
// exactly; other seeds jitter each band entry by up to +/-10%.
template <typename Real>
CMatrix<Real> synthesize_sar_matrix(Eigen::Index M, std::uint64_t seed)
{
    return banded_sar_matrix<Real>(M, SarPattern<Real>{}, seed, seed == 0 ? Real(0) : Real(0.1), true);
}

// The published matrix when M == 4, otherwise a flagged synthetic one.
template <typename Real>
SarModel<Real> default_sar_model(Eigen::Index M, Real budget, std::uint64_t seed = 0)
{
    if (M == 4)
        return SarModel<Real>(paper_sar_matrix<Real>(), budget, false);
    return SarModel<Real>(synthesize_sar_matrix<Real>(M, seed), budget, true);
}

} // namespace fasar

#endif // FASAR_EXPOSURE_HPP
