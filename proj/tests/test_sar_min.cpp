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

#include <numbers>

#include "fasar/sar_min.hpp"
#include "test_util.hpp"

using namespace fasar;
using namespace fasar::testing;

namespace
{

const double kNoise = dbm_to_watts(-105.0);
const double kLambda = 0.01;

ChannelRealizationd make_channel(std::uint64_t seed, Eigen::Index M = 4, Eigen::Index K = 4, Eigen::Index L = 15)
{
    return sample_channel<double>(seed, M, K, L, kNoise, kLambda);
}

SarModeld scalar_model(double r) { return SarModeld(CMatrixd::Constant(1, 1, r), 1.6); }

// sum_k p_k^H R p_k + mu ||H^H P - Z||^2 evaluated directly.
double penalty(const CMatrixd &H, const Precoderd &P, const CMatrixd &Z, const CMatrixd &R, double mu)
{
    double sar = 0.0;
    for (Eigen::Index k = 0; k < P.cols(); ++k)
        sar += (P.col(k).adjoint() * R * P.col(k))(0, 0).real();
    return sar + mu * (H.adjoint() * P - Z).squaredNorm();
}

// Per-user projection objective sum_j |z_kj - c_j|^2.
double user_distance(const CVectord &z, const CVectord &c) { return (z - c).squaredNorm(); }

// min over a zeta grid of the per-user objective at z(zeta) among feasible grid points,
// refined by repeated zooming around the incumbent.
double zeta_grid_oracle(const CVectord &c, Eigen::Index k, double g, double noise)
{
    auto z_of = [&](double zeta) {
        CVectord z(c.size());
        for (Eigen::Index j = 0; j < c.size(); ++j)
            z[j] = (j == k) ? c[j] / (1.0 - zeta) : c[j] / (1.0 + zeta * g);
        return z;
    };
    auto feasible = [&](const CVectord &z) {
        double interference = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j)
            if (j != k)
                interference += std::norm(z[j]);
        return std::norm(z[k]) >= g * (interference + noise);
    };
    double lo = 0.0;
    double hi = 1.0 - 1e-6;
    double best = std::numeric_limits<double>::infinity();
    double best_arg = -1.0;
    for (int round = 0; round < 8; ++round)
    {
        const int n = 2000;
        const double h = (hi - lo) / n;
        double arg = -1.0;
        for (int i = 0; i <= n; ++i)
        {
            const double zeta = lo + h * i;
            const CVectord z = z_of(zeta);
            if (!feasible(z))
                continue;
            const double v = user_distance(z, c);
            if (v < best)
            {
                best = v;
                arg = zeta;
            }
        }
        if (arg < 0.0)
            arg = best_arg; // no improvement this round: zoom around the incumbent anyway
        if (arg < 0.0)
            break;
        best_arg = arg;
        lo = std::max(0.0, arg - 2 * h);
        hi = std::min(1.0 - 1e-12, arg + 2 * h);
    }
    return best;
}

struct PositionInstance
{
    ChannelRealizationd channel;
    AntennaLayoutd layout;
    Precoderd P;
    AuxiliaryVars aux;
};

// Random precoder and auxiliaries of comparable magnitude to the channel entries.
PositionInstance position_instance(std::uint64_t seed, Eigen::Index M = 4, Eigen::Index K = 4, Eigen::Index L = 15)
{
    PositionInstance inst;
    inst.channel = make_channel(seed, M, K, L);
    const Regiond region(1.0, kLambda);
    inst.layout = random_layout(M, region, 0.5 * kLambda, seed + 1000);
    inst.P = random_complex(M, K, seed + 2000);
    inst.aux.z = random_complex(K, K, seed + 3000) * 3.0;
    inst.aux.zeta = RVectord::Zero(K);
    return inst;
}

double q_at(const PositionInstance &inst, Eigen::Index m, const Point2d &t)
{
    AntennaLayoutd moved = inst.layout;
    moved.positions.col(m) = t;
    return position_objective(moved, inst.channel, inst.P, inst.aux);
}

SolverConfig fast_config()
{
    SolverConfig cfg;
    cfg.record_inner_trace = true;
    return cfg;
}

} // namespace

// ---- precoder --------------------------------------------------------------

TEST(SolvePrecoder, ScalarFormula)
{
    for (double r : {0.5, 1.6, 4.0})
        for (double mu : {1e-3, 1.0, 50.0})
        {
            const std::complex<double> h(0.7, -1.3), z(2.0, 0.4);
            CMatrixd H(1, 1), Z(1, 1);
            H(0, 0) = h;
            Z(0, 0) = z;
            const Precoderd P = solve_precoder(H, AuxiliaryVars{Z, RVectord::Zero(1)}, scalar_model(r), mu);
            const std::complex<double> expected = mu * z * h / (r + mu * std::norm(h));
            EXPECT_NEAR(std::abs(P(0, 0) - expected), 0.0, 1e-14 * std::abs(expected));
        }
}

TEST(SolvePrecoder, ZeroAuxiliaryGivesZero)
{
    const CMatrixd H = random_complex(4, 3, 7);
    const auto model = default_sar_model<double>(4, 1.6);
    const Precoderd P = solve_precoder(H, AuxiliaryVars{CMatrixd::Zero(3, 3), RVectord::Zero(3)}, model, 0.1);
    EXPECT_EQ(P.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolvePrecoder, StationaryPointOfPenalty)
{
    const auto model = default_sar_model<double>(4, 1.6);
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const CMatrixd H = random_complex(4, 4, seed);
        const CMatrixd Z = random_complex(4, 4, seed + 100);
        const double mu = 0.01 * static_cast<double>(seed);
        const Precoderd P = solve_precoder(H, AuxiliaryVars{Z, RVectord::Zero(4)}, model, mu);
        const double f0 = penalty(H, P, Z, model.matrix(), mu);
        // every direction is a descent-free direction: the objective is a convex quadratic
        for (std::uint64_t d = 0; d < 5; ++d)
        {
            const CMatrixd D = random_complex(4, 4, seed * 31 + d);
            const double eps = 1e-4;
            const double fp = penalty(H, P + eps * D, Z, model.matrix(), mu);
            const double fm = penalty(H, P - eps * D, Z, model.matrix(), mu);
            EXPECT_GE(fp, f0 - 1e-12 * f0);
            EXPECT_GE(fm, f0 - 1e-12 * f0);
            EXPECT_NEAR((fp - fm) / (2 * eps), 0.0, 1e-6 * std::max(1.0, f0));
        }
    }
}

TEST(SolvePrecoder, RejectsBadInput)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const CMatrixd H = random_complex(4, 2, 1);
    EXPECT_THROW(solve_precoder(H, AuxiliaryVars{CMatrixd::Zero(2, 2), RVectord::Zero(2)}, model, 0.0), ConfigError);
    EXPECT_THROW(solve_precoder(H, AuxiliaryVars{CMatrixd::Zero(3, 3), RVectord::Zero(3)}, model, 1.0), ConfigError);
}

// ---- auxiliary update ------------------------------------------------------

TEST(SolveAuxiliary, FeasibleInputIsKept)
{
    const CMatrixd H = random_complex(4, 3, 5);
    const Precoderd P = H * 10.0; // strong desired terms
    const CMatrixd C = H.adjoint() * P;
    const AuxiliaryVars aux = solve_auxiliary(H, P, SinrTargets::uniform(3, 1e-3), 1.0);
    EXPECT_LE((aux.z - C).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(aux.zeta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveAuxiliary, SingleUserProjectsOntoCircle)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const CMatrixd H = random_complex(3, 1, seed);
        const Precoderd P = random_complex(3, 1, seed + 50) * 1e-3;
        const double g = 10.0, noise = 1.0;
        const AuxiliaryVars aux = solve_auxiliary(H, P, SinrTargets::uniform(1, g), noise);
        const std::complex<double> c = (H.adjoint() * P)(0, 0);
        const std::complex<double> expected = std::polar(std::sqrt(g * noise), std::arg(c));
        EXPECT_NEAR(std::abs(aux.z(0, 0) - expected), 0.0, 1e-8 * std::abs(expected));
        EXPECT_GT(aux.zeta[0], 0.0);
    }
}

TEST(SolveAuxiliary, MatchesZetaGridOracle)
{
    for (std::uint64_t seed = 1; seed <= 25; ++seed)
    {
        const CMatrixd H = random_complex(4, 4, seed);
        const Precoderd P = random_complex(4, 4, seed + 500);
        const double noise = 0.5;
        const SinrTargets targets = SinrTargets::uniform(4, 2.0 + static_cast<double>(seed % 5));
        const AuxiliaryVars aux = solve_auxiliary(H, P, targets, noise);
        const CMatrixd C = H.adjoint() * P;
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            const CVectord c = C.row(k).transpose();
            const CVectord z = aux.z.row(k).transpose();
            const double ours = user_distance(z, c);
            const double oracle = zeta_grid_oracle(c, k, targets.thresholds()[k], noise);
            EXPECT_NEAR(ours, oracle, 1e-6 * std::max(oracle, 1e-300)) << "seed " << seed << " user " << k;
        }
    }
}

TEST(SolveAuxiliary, ActiveConstraintHoldsWithEquality)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const CMatrixd H = random_complex(4, 4, seed);
        const Precoderd P = random_complex(4, 4, seed + 900) * 0.1;
        const double noise = 1.0;
        const SinrTargets targets = SinrTargets::uniform(4, 5.0);
        const AuxiliaryVars aux = solve_auxiliary(H, P, targets, noise);
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            if (aux.zeta[k] == 0.0)
                continue;
            double interference = 0.0;
            for (Eigen::Index j = 0; j < 4; ++j)
                if (j != k)
                    interference += std::norm(aux.z(k, j));
            const double lhs = std::norm(aux.z(k, k));
            const double rhs = 5.0 * (interference + noise);
            EXPECT_GE(lhs, rhs * (1.0 - 1e-12));
            EXPECT_NEAR(lhs, rhs, 1e-8 * rhs);
        }
    }
}

TEST(SolveAuxiliary, DualResidualDecreasesToNegativeAtZero)
{
    CVectord c(3);
    c << std::complex<double>(0.1, 0.0), std::complex<double>(1.0, 0.0), std::complex<double>(0.0, 1.0);
    const double y0 = dual_residual(c, 0, 4.0, 1.0, 0.0);
    EXPECT_NEAR(y0, 0.01 - 4.0 * 2.0 - 4.0, 1e-15);
    double previous = y0;
    for (double zeta = 0.05; zeta < 1.0; zeta += 0.05)
    {
        const double y = dual_residual(c, 0, 4.0, 1.0, zeta);
        EXPECT_GT(y, previous);
        previous = y;
    }
}

TEST(SolveAuxiliary, ZeroDesiredTermThrows)
{
    CMatrixd H = CMatrixd::Zero(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;
    Precoderd P = Precoderd::Zero(2, 2);
    P(0, 0) = 1.0; // user 1 gets nothing
    EXPECT_THROW(solve_auxiliary(H, P, SinrTargets::uniform(2, 1.0), 1.0), DegenerateUserError);
}

// ---- position step ---------------------------------------------------------

TEST(PositionObjective, MatchesBruteForce)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const PositionInstance inst = position_instance(seed);
        double ref = 0.0;
        for (Eigen::Index k = 0; k < 4; ++k)
            for (Eigen::Index j = 0; j < 4; ++j)
            {
                std::complex<double> acc = 0.0;
                for (Eigen::Index m = 0; m < 4; ++m)
                {
                    std::complex<double> h = 0.0;
                    const auto &u = inst.channel.users[static_cast<std::size_t>(k)];
                    for (Eigen::Index p = 0; p < u.count(); ++p)
                    {
                        const double delta = inst.layout[m].x() * std::sin(u.elevation[p]) * std::cos(u.azimuth[p]) +
                                             inst.layout[m].y() * std::cos(u.elevation[p]);
                        h += std::conj(std::polar(1.0, 2 * std::numbers::pi * delta / kLambda)) * u.gains[p];
                    }
                    acc += std::conj(h) * inst.P(m, j);
                }
                ref += std::norm(acc - inst.aux.z(k, j));
            }
        EXPECT_NEAR(position_objective(inst.layout, inst.channel, inst.P, inst.aux), ref, 1e-11 * ref);
    }
}

TEST(PositionGradient, MatchesCentralDifferences)
{
    const double step = 1e-6 * kLambda;
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
    {
        const PositionInstance inst = position_instance(seed);
        for (Eigen::Index m = 0; m < 4; ++m)
        {
            const Point2d g = position_gradient(m, inst.layout, inst.channel, inst.P, inst.aux);
            const Point2d t = inst.layout[m];
            Point2d fd;
            fd.x() = (q_at(inst, m, t + Point2d(step, 0)) - q_at(inst, m, t - Point2d(step, 0))) / (2 * step);
            fd.y() = (q_at(inst, m, t + Point2d(0, step)) - q_at(inst, m, t - Point2d(0, step))) / (2 * step);
            EXPECT_LE((g - fd).norm(), 1e-5 * g.norm()) << "seed " << seed << " antenna " << m;
        }
    }
}

TEST(PositionGradient, SinglePathSymbolic)
{
    // M = K = L = 1: q(t) = |a(t) p - z|^2 with a(t) = conj(f) e^{j kappa u.t}.
    ChannelRealizationd ch = make_channel(3, 1, 1, 1);
    const auto &u = ch.users[0];
    const Point2d dir = path_direction(u.elevation[0], u.azimuth[0]);
    const double kappa = 2 * std::numbers::pi / kLambda;
    AntennaLayoutd layout(Positions<double>(Point2d(0.003, -0.002)));
    Precoderd P(1, 1);
    P(0, 0) = {0.4, 0.9};
    AuxiliaryVars aux{CMatrixd::Constant(1, 1, std::complex<double>(-1.0, 0.5)), RVectord::Zero(1)};

    const double phase = kappa * dir.dot(layout[0]);
    const std::complex<double> a = std::conj(u.gains[0]) * std::polar(1.0, phase); // conj(h)
    const std::complex<double> e = a * P(0, 0) - aux.z(0, 0);
    // d a / dt = j kappa a u
    const double scalar = 2.0 * (std::conj(e) * std::complex<double>(0.0, kappa) * a * P(0, 0)).real();
    const Point2d expected = scalar * dir;
    const Point2d g = position_gradient(0, layout, ch, P, aux);
    EXPECT_NEAR((g - expected).norm(), 0.0, 1e-12 * expected.norm());
}

TEST(PositionMajorizer, ScalarFormula)
{
    ChannelRealizationd ch = make_channel(4, 1, 1, 1);
    const AntennaLayoutd layout(Positions<double>(Point2d(0.0, 0.0)));
    Precoderd P(1, 1);
    P(0, 0) = {0.3, -0.4};
    AuxiliaryVars aux{CMatrixd::Constant(1, 1, std::complex<double>(1.2, 0.0)), RVectord::Zero(1)};
    const double s = std::abs(ch.users[0].gains[0]);
    const double pm = 0.5;
    const double expected =
        8 * std::numbers::pi * std::numbers::pi / (kLambda * kLambda) * (pm * pm * s * s + 2 * s * pm * 1.2);
    EXPECT_NEAR(position_majorizer(0, layout, ch, P, aux), expected, 1e-12 * expected);
}

TEST(PositionMajorizer, ZeroPrecoderGivesZero)
{
    const PositionInstance inst = position_instance(5);
    const Precoderd P = Precoderd::Zero(4, 4);
    for (Eigen::Index m = 0; m < 4; ++m)
        EXPECT_EQ(position_majorizer(m, inst.layout, inst.channel, P, inst.aux), 0.0);
    AuxiliaryVars none{CMatrixd::Zero(4, 4), RVectord::Zero(4)};
    Precoderd single = Precoderd::Zero(4, 4);
    single(0, 0) = 1.0;
    // only antenna 0 carries power: every other antenna's tau vanishes
    EXPECT_EQ(position_majorizer(1, inst.layout, inst.channel, single, none), 0.0);
}

TEST(PositionMajorizer, DominatesFiniteDifferenceHessian)
{
    const double step = 1e-5 * kLambda;
    for (std::uint64_t seed = 1; seed <= 25; ++seed)
    {
        const PositionInstance inst = position_instance(seed);
        for (Eigen::Index m = 0; m < 4; ++m)
        {
            const double tau = position_majorizer(m, inst.layout, inst.channel, inst.P, inst.aux);
            const Point2d t = inst.layout[m];
            const Point2d ex(step, 0), ey(0, step);
            const double f0 = q_at(inst, m, t);
            Eigen::Matrix2d Hs;
            Hs(0, 0) = (q_at(inst, m, t + ex) - 2 * f0 + q_at(inst, m, t - ex)) / (step * step);
            Hs(1, 1) = (q_at(inst, m, t + ey) - 2 * f0 + q_at(inst, m, t - ey)) / (step * step);
            Hs(0, 1) = Hs(1, 0) = (q_at(inst, m, t + ex + ey) - q_at(inst, m, t + ex - ey) -
                                   q_at(inst, m, t - ex + ey) + q_at(inst, m, t - ex - ey)) /
                                  (4 * step * step);
            const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Hs).eigenvalues().maxCoeff();
            EXPECT_GE(tau, lmax) << "seed " << seed << " antenna " << m;
        }
    }
}

TEST(PositionSurrogate, MajorizesWithinOneWavelength)
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> radius(0.0, kLambda);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    int pairs = 0;
    for (std::uint64_t seed = 1; seed <= 25; ++seed)
    {
        const PositionInstance inst = position_instance(seed);
        for (Eigen::Index m = 0; m < 4; ++m, ++pairs)
        {
            const Point2d anchor = inst.layout[m];
            const double q0 = q_at(inst, m, anchor);
            const Point2d g = position_gradient(m, inst.layout, inst.channel, inst.P, inst.aux);
            const double tau = position_majorizer(m, inst.layout, inst.channel, inst.P, inst.aux);
            EXPECT_EQ(position_surrogate(anchor, anchor, q0, g, tau), q0);
            const Point2d t = anchor + radius(rng) * Point2d(std::cos(angle(rng)), std::sin(angle(rng)));
            EXPECT_LE(q_at(inst, m, t), position_surrogate(t, anchor, q0, g, tau) + 1e-9 * std::max(1.0, q0));
        }
    }
    EXPECT_EQ(pairs, 100);
}

TEST(PositionStep, ZeroGradientIsFixedPoint)
{
    const Regiond region(1.0, kLambda);
    const AntennaLayoutd layout = default_initial_layout(4, region);
    for (Eigen::Index m = 0; m < 4; ++m)
    {
        const PositionStep step = minimize_position_surrogate(m, layout, Point2d::Zero(), 10.0, region, 0.5 * kLambda);
        EXPECT_EQ(step.position, layout[m]);
        EXPECT_FALSE(step.used_qp);
    }
}

TEST(PositionStep, UnconstrainedStepIsGradientStep)
{
    const Regiond region(2.0, kLambda);
    const AntennaLayoutd layout = default_initial_layout(4, region);
    const Point2d g(0.0, -0.03);
    const PositionStep step = minimize_position_surrogate(0, layout, g, 10.0, region, 0.5 * kLambda);
    EXPECT_NEAR((step.position - (layout[0] - g / 10.0)).norm(), 0.0, 1e-15);
}

TEST(PositionStep, BoxProjection)
{
    const Regiond region(1.0, kLambda);
    AntennaLayoutd layout(Positions<double>(Point2d(0.0, 0.0)));
    const PositionStep step = minimize_position_surrogate(0, layout, Point2d(-1.0, 0.0), 1.0, region, 0.0);
    EXPECT_NEAR(step.position.x(), kLambda, 1e-15);
    EXPECT_NEAR(step.position.y(), 0.0, 1e-15);
    EXPECT_TRUE(step.used_qp);
}

TEST(PositionStep, MatchesGridQpOracle)
{
    const Regiond region(1.0, kLambda);
    const double D = 0.5 * kLambda;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const AntennaLayoutd layout = random_layout(4, region, D, seed);
        const Eigen::Index m = static_cast<Eigen::Index>(seed % 4);
        const double tau = 1.0;
        const Point2d g(gauss(rng) * 0.02, gauss(rng) * 0.02);
        const PositionStep step = minimize_position_surrogate(m, layout, g, tau, region, D);
        const Point2d anchor = layout[m];
        auto surrogate = [&](const Point2d &t) { return position_surrogate(t, anchor, 0.0, g, tau); };
        auto feasible = [&](const Point2d &t) {
            if (!region.contains(t, 1e-15))
                return false;
            for (Eigen::Index l = 0; l < 4; ++l)
            {
                if (l == m)
                    continue;
                const Point2d diff = anchor - layout[l];
                if (diff.dot(t - layout[l]) / diff.norm() < D - 1e-15)
                    return false;
            }
            return true;
        };
        ASSERT_FALSE(step.infeasible);
        EXPECT_TRUE(feasible(step.position) || !step.used_qp);
        const double a = region.half_extent();
        const int n = 400; // lambda / 200 spacing
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j)
            {
                const Point2d t(-a + 2 * a * i / n, -a + 2 * a * j / n);
                if (feasible(t))
                    best = std::min(best, surrogate(t));
            }
        const double ours = surrogate(step.position);
        EXPECT_LE(ours, best + 1e-12);
        // grid resolution bound: |g + tau d| * h + tau h^2
        const double h = 2 * a / n;
        EXPECT_GE(ours, best - (g.norm() + tau * 2 * a) * h * 2) << "seed " << seed;
    }
}

TEST(PositionStep, UpdateKeepsConstraints)
{
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        PositionInstance inst = position_instance(seed);
        for (Eigen::Index m = 0; m < 4; ++m)
        {
            const PositionStep step =
                update_position(m, inst.layout, inst.channel, inst.P, inst.aux, region, 0.5 * kLambda);
            inst.layout.positions.col(m) = step.position;
            EXPECT_TRUE(inst.layout.feasible(region, 0.5 * kLambda, 1e-9));
        }
    }
}

// ---- fixed-layout optimum --------------------------------------------------

TEST(FixedLayoutPrecoder, SingleUserClosedForm)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Eigen::LLT<CMatrixd> llt(model.matrix());
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const CMatrixd H = random_complex(4, 1, seed);
        const double g = 1e3;
        const auto P = optimal_fixed_layout_precoder(H, model, SinrTargets::uniform(1, g), 1.0);
        ASSERT_TRUE(P.has_value());
        const double quad = (H.col(0).adjoint() * llt.solve(H.col(0)))(0, 0).real();
        const double expected = g / quad;
        EXPECT_NEAR(sar_value(*P, model), expected, 1e-10 * expected);
    }
}

TEST(FixedLayoutPrecoder, MeetsTargetsWithEquality)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const auto ch = make_channel(seed);
        const CMatrixd H = channel_matrix(default_initial_layout(4, region), ch);
        const SinrTargets targets = SinrTargets::uniform(4, from_db(135.0));
        const auto P = optimal_fixed_layout_precoder(H, model, targets, ch.noise_variance);
        ASSERT_TRUE(P.has_value());
        for (Eigen::Index k = 0; k < 4; ++k)
            EXPECT_NEAR(sinr(H, *P, ch.noise_variance, k) / targets.beta0, 1.0, 1e-9);
    }
}

TEST(FixedLayoutPrecoder, SingleUserClosedFormAtVeryHighSinr)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const Eigen::LLT<CMatrixd> llt(model.matrix());
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
    {
        const auto ch = make_channel(seed, 4, 1);
        const CMatrixd H = channel_matrix(default_initial_layout(4, region), ch);
        const double g = from_db(158.0);
        const auto P = optimal_fixed_layout_precoder(H, model, SinrTargets::uniform(1, g), kNoise);
        ASSERT_TRUE(P.has_value());
        const double expected = g * kNoise / (H.col(0).adjoint() * llt.solve(H.col(0)))(0, 0).real();
        EXPECT_NEAR(sar_value(*P, model), expected, 1e-8 * expected);
    }
}

TEST(FixedLayoutPrecoder, SingularSarMatrix)
{
    // clipped synthetic matrices have a null space; the optimum must still be found and
    // must beat zero-forcing directions scaled to the same targets
    const SarModeld model(synthesize_sar_matrix<double>(6, 1), 1.6, true);
    ASSERT_LT(model.eigenvalues().minCoeff(), 1e-12);
    const Regiond region(1.5, kLambda);
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        for (double db : {100.0, 120.0, 135.0})
        {
            const auto ch = make_channel(seed, 6, 4);
            const CMatrixd H = channel_matrix(default_initial_layout(6, region), ch);
            const SinrTargets targets = SinrTargets::uniform(4, from_db(db));
            const auto P = optimal_fixed_layout_precoder(H, model, targets, kNoise);
            ASSERT_TRUE(P.has_value()) << seed << " " << db;
            for (Eigen::Index k = 0; k < 4; ++k)
                EXPECT_NEAR(sinr(H, *P, kNoise, k) / targets.beta0, 1.0, 1e-6);
            Precoderd zf = H * (H.adjoint() * H).inverse();
            ASSERT_TRUE(restore_sinr_feasibility(H, zf, targets, kNoise));
            EXPECT_LE(sar_value(*P, model), sar_value(zf, model) * (1.0 + 1e-9));
        }
}

TEST(FixedLayoutPrecoder, SarOverBetaNondecreasing)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const auto ch = make_channel(seed);
        const CMatrixd H = channel_matrix(default_initial_layout(4, region), ch);
        double previous = 0.0;
        for (double db = 110.0; db <= 150.0; db += 5.0)
        {
            const double beta = from_db(db);
            const auto P = optimal_fixed_layout_precoder(H, model, SinrTargets::uniform(4, beta), ch.noise_variance);
            if (!P)
                break;
            const double ratio = sar_value(*P, model) / beta;
            EXPECT_GE(ratio, previous * (1.0 - 1e-9));
            previous = ratio;
        }
    }
}

TEST(FixedLayoutGradient, MatchesFiniteDifferences)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const double step = 1e-6 * kLambda;
    for (std::uint64_t seed = 1; seed <= 8; ++seed)
    {
        const auto ch = make_channel(seed);
        const SinrTargets targets = SinrTargets::uniform(4, from_db(130.0));
        const AntennaLayoutd layout = default_initial_layout(4, region);
        const auto opt = solve_fixed_layout(channel_matrix(layout, ch), model, targets, ch.noise_variance);
        ASSERT_TRUE(opt.has_value());
        auto sar_at = [&](Eigen::Index m, const Point2d &t) {
            AntennaLayoutd moved = layout;
            moved.positions.col(m) = t;
            const auto Q = optimal_fixed_layout_precoder(channel_matrix(moved, ch), model, targets, ch.noise_variance);
            return sar_value(*Q, model);
        };
        for (Eigen::Index m = 0; m < 4; ++m)
        {
            const Point2d g = fixed_layout_sar_gradient(m, layout, ch, *opt);
            const Point2d t = layout[m];
            const Point2d fd((sar_at(m, t + Point2d(step, 0)) - sar_at(m, t - Point2d(step, 0))) / (2 * step),
                             (sar_at(m, t + Point2d(0, step)) - sar_at(m, t - Point2d(0, step))) / (2 * step));
            EXPECT_LE((g - fd).norm(), 1e-4 * g.norm()) << "seed " << seed << " antenna " << m;
        }
    }
}

TEST(FixedLayoutPrecoder, KktStationarityAtModerateSinr)
{
    // R p_k + sum_{i != k} nu_i h_i h_i^H p_k - nu_k / gbar_k h_k h_k^H p_k = 0
    const auto model = default_sar_model<double>(4, 1.6);
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const CMatrixd H = random_complex(4, 4, seed);
        const SinrTargets targets = SinrTargets::uniform(4, 3.0);
        const auto opt = solve_fixed_layout(H, model, targets, 1.0);
        ASSERT_TRUE(opt.has_value());
        const CMatrixd &P = opt->precoder;
        const RVectord &nu = opt->multipliers;
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            CVectord r = model.matrix() * P.col(k);
            const double scale = r.norm();
            for (Eigen::Index i = 0; i < 4; ++i)
            {
                const double c = i == k ? -nu[k] / targets.thresholds()[k] : nu[i];
                r += c * H.col(i) * (H.col(i).adjoint() * P.col(k));
            }
            EXPECT_LE(r.norm(), 1e-9 * scale);
            // weighted couplings agree with their definition when nothing cancels
            for (Eigen::Index j = 0; j < 4; ++j)
            {
                const std::complex<double> c = (H.col(k).adjoint() * P.col(j))(0, 0);
                const std::complex<double> w = j == k ? nu[k] * c / targets.thresholds()[k] : -nu[k] * c;
                EXPECT_NEAR(std::abs(opt->weighted_coupling(k, j) - w), 0.0, 1e-9 * std::max(1.0, std::abs(w)));
            }
        }
    }
}

TEST(RestoreFeasibility, MeetsEveryTarget)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const CMatrixd H = random_complex(4, 3, seed);
        Precoderd P = H * (H.adjoint() * H).inverse(); // zero-forcing directions
        const SinrTargets targets = SinrTargets::uniform(3, 100.0);
        ASSERT_TRUE(restore_sinr_feasibility(H, P, targets, 0.1));
        for (Eigen::Index k = 0; k < 3; ++k)
            EXPECT_NEAR(sinr(H, P, 0.1, k), 100.0, 1e-8);
    }
}

// ---- full solve ------------------------------------------------------------

TEST(SolveSarMin, SingleUserClosedForm)
{
    const Regiond region(1.0, kLambda);
    for (bool positions : {false, true})
        for (std::uint64_t seed = 1; seed <= 5; ++seed)
        {
            const auto ch = make_channel(seed, 1, 1, 15);
            const double r = 1.3;
            const SinrTargets targets = SinrTargets::uniform(1, from_db(130.0));
            SolverConfig cfg = fast_config();
            cfg.optimize_positions = positions;
            const SolveReport rep = solve_sar_min(ch, targets, scalar_model(r), cfg, region);
            const CVectord h = channel_vector(rep.layout, ch.users[0], kLambda);
            const double expected = r * targets.beta0 * ch.noise_variance / h.squaredNorm();
            EXPECT_NEAR(rep.sar, expected, 1e-6 * expected);
            EXPECT_TRUE(rep.feasibility.ok());
        }
}

TEST(SolveSarMin, InnerTraceMonotoneAndFeasibleExit)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
    {
        const auto ch = make_channel(seed);
        const SolveReport rep =
            solve_sar_min(ch, SinrTargets::uniform(4, from_db(135.0)), model, fast_config(), region);
        EXPECT_TRUE(rep.converged) << rep.status;
        EXPECT_LT(rep.xi / rep.xi_scale, 1e-7);
        EXPECT_TRUE(rep.feasibility.ok());
        EXPECT_GE(rep.feasibility.min_distance, 0.5 * kLambda - 1e-9);
        for (std::size_t seg = 0; seg < rep.inner_offsets.size(); ++seg)
        {
            const auto begin = static_cast<std::size_t>(rep.inner_offsets[seg]);
            const auto end = seg + 1 < rep.inner_offsets.size() ? static_cast<std::size_t>(rep.inner_offsets[seg + 1])
                                                                 : rep.inner_trace.size();
            for (std::size_t i = begin + 1; i < end; ++i)
                EXPECT_LE(rep.inner_trace[i], rep.inner_trace[i - 1] + 1e-9 * std::abs(rep.inner_trace[i - 1]));
        }
    }
}

TEST(SolveSarMin, NeverWorseThanStartLayout)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 4; seed <= 6; ++seed)
    {
        const auto ch = make_channel(seed);
        const SinrTargets targets = SinrTargets::uniform(4, from_db(135.0));
        const SolveReport rep = solve_sar_min(ch, targets, model, fast_config(), region);
        const auto P0 = optimal_fixed_layout_precoder(channel_matrix(default_initial_layout(4, region), ch), model,
                                                      targets, ch.noise_variance);
        ASSERT_TRUE(P0.has_value());
        EXPECT_LE(rep.sar, sar_value(*P0, model) * (1.0 + 1e-9));
    }
}

TEST(SolveSarMin, VanishingTargetsGiveVanishingSar)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const auto ch = make_channel(2);
    SolverConfig cfg = fast_config();
    cfg.optimize_positions = false;
    double previous = std::numeric_limits<double>::infinity();
    for (double db : {120.0, 90.0, 60.0, 30.0})
    {
        const SolveReport rep = solve_sar_min(ch, SinrTargets::uniform(4, from_db(db)), model, cfg, region);
        EXPECT_LT(rep.sar, previous);
        previous = rep.sar;
    }
    EXPECT_LT(previous, 1e-9);
}

TEST(SolveSarMin, RejectsInfeasibleStart)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const auto ch = make_channel(1);
    Positions<double> pos = Positions<double>::Zero(2, 4); // all antennas coincide
    EXPECT_THROW(solve_sar_min(ch, SinrTargets::uniform(4, 1e10), model, SolverConfig{}, region,
                               AntennaLayoutd(pos)),
                 ConfigError);
    SolverConfig bad;
    bad.scaling = 1.5;
    EXPECT_THROW(solve_sar_min(ch, SinrTargets::uniform(4, 1e10), model, bad, region), ConfigError);
}
