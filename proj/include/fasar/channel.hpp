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

// Geometric multipath channel between a fluid-antenna base station and
// single-antenna users. Channels are always rebuilt from (layout, paths);
// nothing here caches state, so every function is safe to call concurrently.

#ifndef FASAR_CHANNEL_HPP
#define FASAR_CHANNEL_HPP

#include <cmath>
#include <concepts>
#include <numbers>
#include <random>

#include "fasar/types.hpp"

namespace fasar
{

// dBm -> W: 10^((dBm - 30) / 10)
template <std::floating_point Real>
Real dbm_to_watts(Real dbm)
{
    return std::pow(Real(10), (dbm - Real(30)) / Real(10));
}

template <std::floating_point Real>
Real to_db(Real linear)
{
    return Real(10) * std::log10(linear);
}

template <std::floating_point Real>
Real from_db(Real db)
{
    return std::pow(Real(10), db / Real(10));
}

// Path length difference between the origin and t for a path leaving at (theta, phi).
template <typename Real>
Real propagation_delta(const Point2<Real> &t, Real theta, Real phi)
{
    return t.x() * std::sin(theta) * std::cos(phi) + t.y() * std::cos(theta);
}

// Unit direction (sin theta cos phi, cos theta) such that delta = u^T t.
template <typename Real>
Point2<Real> path_direction(Real theta, Real phi)
{
    return Point2<Real>(std::sin(theta) * std::cos(phi), std::cos(theta));
}

template <typename Real>
CVector<Real> field_response_vector(const Point2<Real> &t, const PathSet<Real> &paths, Real wavelength)
{
    const Real kappa = Real(2) * std::numbers::pi_v<Real> / wavelength;
    CVector<Real> g(paths.count());
    for (Eigen::Index p = 0; p < paths.count(); ++p)
        g[p] = std::polar(Real(1), kappa * propagation_delta(t, paths.elevation[p], paths.azimuth[p]));
    return g;
}

// h_k(t), element m = g_k(t_m)^H f_k.
template <typename Real>
CVector<Real> channel_vector(const AntennaLayout<Real> &layout, const PathSet<Real> &paths, Real wavelength)
{
    CVector<Real> h(layout.size());
    for (Eigen::Index m = 0; m < layout.size(); ++m)
        h[m] = field_response_vector(layout[m], paths, wavelength).dot(paths.gains);
    return h;
}

// M x K matrix whose k-th column is h_k(t).
template <typename Real>
CMatrix<Real> channel_matrix(const AntennaLayout<Real> &layout, const ChannelRealization<Real> &channel)
{
    CMatrix<Real> H(layout.size(), channel.num_users());
    for (Eigen::Index k = 0; k < channel.num_users(); ++k)
        H.col(k) = channel_vector(layout, channel.users[k], channel.wavelength);
    return H;
}

// SINR of user k given the channel matrix H (columns h_k) and precoder P.
template <typename Real>
Real sinr(const CMatrix<Real> &H, const Precoder<Real> &P, Real noise_variance, Eigen::Index k)
{
    const auto row = (H.col(k).adjoint() * P).eval();
    const Real desired = std::norm(row(0, k));
    const Real interference = row.cwiseAbs2().sum() - desired;
    return desired / (interference + noise_variance);
}

template <typename Real>
Real sinr(const Precoder<Real> &P, const ChannelRealization<Real> &channel, const AntennaLayout<Real> &layout,
          Eigen::Index k)
{
    if (P.cols() != channel.num_users() || P.rows() != layout.size())
        throw ConfigError("precoder dimensions do not match the layout and user count");
    return sinr(channel_matrix(layout, channel), P, channel.noise_variance, k);
}

// min_k SINR_k / gamma_k
template <typename Real>
Real min_weighted_sinr(const CMatrix<Real> &H, const Precoder<Real> &P, Real noise_variance,
                       const RVector<Real> &weights)
{
    Real best = std::numeric_limits<Real>::infinity();
    for (Eigen::Index k = 0; k < H.cols(); ++k)
        best = std::min(best, sinr(H, P, noise_variance, k) / weights[k]);
    return best;
}

// Angles i.i.d. uniform on [0, pi]; gains CN(0, 1). Deterministic for a fixed seed.
template <typename Real>
ChannelRealization<Real> sample_channel(std::uint64_t seed, Eigen::Index num_antennas, Eigen::Index num_users,
                                        Eigen::Index num_paths, Real noise_variance, Real wavelength = Real(0.01))
{
    if (num_antennas < 1 || num_users < 1 || num_paths < 1)
        throw ConfigError("sample_channel needs M >= 1, K >= 1 and L >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> angle(Real(0), std::numbers::pi_v<Real>);
    std::normal_distribution<Real> gauss(Real(0), std::sqrt(Real(0.5)));

    ChannelRealization<Real> channel;
    channel.noise_variance = noise_variance;
    channel.wavelength = wavelength;
    channel.seed = seed;
    channel.users.resize(static_cast<std::size_t>(num_users));
    for (auto &user : channel.users)
    {
        user.elevation.resize(num_paths);
        user.azimuth.resize(num_paths);
        user.gains.resize(num_paths);
        for (Eigen::Index p = 0; p < num_paths; ++p)
            user.elevation[p] = angle(rng);
        for (Eigen::Index p = 0; p < num_paths; ++p)
            user.azimuth[p] = angle(rng);
        for (Eigen::Index p = 0; p < num_paths; ++p)
        {
            const Real re = gauss(rng);
            const Real im = gauss(rng);
            user.gains[p] = std::complex<Real>(re, im);
        }
    }
    channel.validate();
    return channel;
}

// Uniform linear array along x, spacing `spacing` meters, centered at the origin.
template <typename Real>
AntennaLayout<Real> centered_ula(Eigen::Index num_antennas, Real spacing, const Region<Real> &region)
{
    if (num_antennas < 1)
        throw ConfigError("need at least one antenna");
    const Real span = Real(num_antennas - 1) * spacing;
    if (span > Real(2) * region.half_extent() * (Real(1) + Real(1e-12)))
        throw ConfigError("uniform linear array does not fit inside the region");
    Positions<Real> pos = Positions<Real>::Zero(2, num_antennas);
    for (Eigen::Index m = 0; m < num_antennas; ++m)
        pos(0, m) = -span / Real(2) + Real(m) * spacing;
    return AntennaLayout<Real>(std::move(pos));
}

} // namespace fasar

#endif // FASAR_CHANNEL_HPP
