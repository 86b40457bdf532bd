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

#ifndef FASAR_TYPES_HPP
#define FASAR_TYPES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "fasar/errors.hpp"

namespace fasar
{

template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
using Point2 = Eigen::Matrix<Real, 2, 1>;

// Column m holds (x_m, y_m) in meters.
template <typename Real>
using Positions = Eigen::Matrix<Real, 2, Eigen::Dynamic>;

// M x K precoding matrix, column k is the beamformer p_k of user k.
template <typename Real>
using Precoder = CMatrix<Real>;

// Square transmit region S = [-A, A] x [-A, A], with A = half_width * wavelength.
template <typename Real>
struct Region
{
    Real half_width = Real(1); // in wavelengths
    Real wavelength = Real(0.01); // meters

    Region() = default;
    Region(Real half_width_wl, Real wavelength_m) : half_width(half_width_wl), wavelength(wavelength_m)
    {
        if (!(half_width > Real(0)))
            throw ConfigError("region half width must be positive");
        if (!(wavelength > Real(0)))
            throw ConfigError("wavelength must be positive");
    }

    Real half_extent() const { return half_width * wavelength; }

    bool contains(const Point2<Real> &t, Real tol = Real(0)) const
    {
        const Real a = half_extent() + tol;
        return std::abs(t.x()) <= a && std::abs(t.y()) <= a;
    }

    Point2<Real> clamp(const Point2<Real> &t) const
    {
        const Real a = half_extent();
        return Point2<Real>(std::clamp(t.x(), -a, a), std::clamp(t.y(), -a, a));
    }
};

template <typename Real>
struct AntennaLayout
{
    Positions<Real> positions;

    AntennaLayout() = default;
    explicit AntennaLayout(Positions<Real> p) : positions(std::move(p)) {}

    Eigen::Index size() const { return positions.cols(); }
    Point2<Real> operator[](Eigen::Index m) const { return positions.col(m); }

    Real min_pairwise_distance() const
    {
        Real best = std::numeric_limits<Real>::infinity();
        for (Eigen::Index m = 0; m < size(); ++m)
            for (Eigen::Index l = m + 1; l < size(); ++l)
                best = std::min(best, (positions.col(m) - positions.col(l)).norm());
        return best;
    }

    bool inside(const Region<Real> &region, Real tol = Real(0)) const
    {
        for (Eigen::Index m = 0; m < size(); ++m)
            if (!region.contains(positions.col(m), tol))
                return false;
        return true;
    }

    bool feasible(const Region<Real> &region, Real min_distance, Real tol = Real(1e-12)) const
    {
        return inside(region, tol) && (size() < 2 || min_pairwise_distance() >= min_distance - tol);
    }
};

// Propagation paths from the base station to one user.
template <typename Real>
struct PathSet
{
    RVector<Real> elevation; // theta, radians
    RVector<Real> azimuth;   // phi, radians
    CVector<Real> gains;     // f_{k,p}

    Eigen::Index count() const { return gains.size(); }

    void validate() const
    {
        if (count() < 1)
            throw ConfigError("a path set needs at least one path");
        if (elevation.size() != count() || azimuth.size() != count())
            throw ConfigError("path set angle and gain arrays differ in length");
    }
};

template <typename Real>
struct ChannelRealization
{
    std::vector<PathSet<Real>> users;
    Real noise_variance = Real(0); // watts
    Real wavelength = Real(0.01);  // meters
    std::uint64_t seed = 0;

    Eigen::Index num_users() const { return static_cast<Eigen::Index>(users.size()); }

    void validate() const
    {
        if (users.empty())
            throw ConfigError("channel has no users");
        if (!(noise_variance > Real(0)))
            throw ConfigError("noise variance must be positive");
        if (!(wavelength > Real(0)))
            throw ConfigError("wavelength must be positive");
        for (const auto &u : users)
            u.validate();
    }
};

} // namespace fasar

#endif // FASAR_TYPES_HPP
