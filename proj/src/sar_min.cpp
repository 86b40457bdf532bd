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

#include "fasar/sar_min.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <numbers>
#include <vector>

namespace fasar
{

namespace
{

using cd = std::complex<double>;

double wavenumber(double wavelength) { return 2.0 * std::numbers::pi / wavelength; }

// Path directions and conjugated gains of every user, precomputed once per solve.
struct PathGeometry
{
    std::vector<Eigen::Matrix2Xd> directions; // column p = (sin th cos ph, cos th)
    std::vector<CVectord> conj_gains;
    RVectord gain_l1; // S_k = sum_p |f_{k,p}|
    double kappa = 0.0;

    explicit PathGeometry(const ChannelRealizationd &channel)
        : gain_l1(channel.num_users()), kappa(wavenumber(channel.wavelength))
    {
        for (const auto &user : channel.users)
        {
            Eigen::Matrix2Xd dir(2, user.count());
            for (Eigen::Index p = 0; p < user.count(); ++p)
                dir.col(p) = path_direction(user.elevation[p], user.azimuth[p]);
            directions.push_back(std::move(dir));
            conj_gains.push_back(user.gains.conjugate());
        }
        for (Eigen::Index k = 0; k < channel.num_users(); ++k)
            gain_l1[k] = channel.users[k].gains.cwiseAbs().sum();
    }

    Eigen::Index num_users() const { return static_cast<Eigen::Index>(directions.size()); }

    // conj(h_{k,m}(t)) for all k.
    CVectord conj_column(const Point2d &t) const
    {
        CVectord out(num_users());
        for (Eigen::Index k = 0; k < num_users(); ++k)
        {
            cd acc(0.0, 0.0);
            const auto &dir = directions[k];
            for (Eigen::Index p = 0; p < dir.cols(); ++p)
                acc += conj_gains[k][p] * std::polar(1.0, kappa * dir.col(p).dot(t));
            out[k] = acc;
        }
        return out;
    }

    // d_k = d conj(h_{k,m}) / d t_m, one row per user.
    Eigen::Matrix<cd, Eigen::Dynamic, 2> conj_column_derivative(const Point2d &t) const
    {
        Eigen::Matrix<cd, Eigen::Dynamic, 2> out(num_users(), 2);
        const cd jk(0.0, kappa);
        for (Eigen::Index k = 0; k < num_users(); ++k)
        {
            cd dx(0.0, 0.0), dy(0.0, 0.0);
            const auto &dir = directions[k];
            for (Eigen::Index p = 0; p < dir.cols(); ++p)
            {
                const cd term = jk * conj_gains[k][p] * std::polar(1.0, kappa * dir.col(p).dot(t));
                dx += term * dir(0, p);
                dy += term * dir(1, p);
            }
            out(k, 0) = dx;
            out(k, 1) = dy;
        }
        return out;
    }
};

// E = H^H P - Z
CMatrixd coupling_residual(const CMatrixd &H, const Precoderd &P, const CMatrixd &Z)
{
    return H.adjoint() * P - Z;
}

Point2d gradient_from_residual(const PathGeometry &geo, const CMatrixd &E, const Precoderd &P, Eigen::Index m,
                               const Point2d &t)
{
    // w_k = sum_j conj(E_kj) p_{j,m}; grad = 2 Re sum_k w_k d_k
    const CVectord w = E.conjugate() * P.row(m).transpose();
    const auto d = geo.conj_column_derivative(t);
    Point2d g;
    g.x() = 2.0 * (w.array() * d.col(0).array()).sum().real();
    g.y() = 2.0 * (w.array() * d.col(1).array()).sum().real();
    return g;
}

double majorizer_from_geometry(const PathGeometry &geo, const Precoderd &P, const CMatrixd &Z, Eigen::Index m,
                               double wavelength)
{
    const Eigen::Index M = P.rows();
    const Eigen::Index K = P.cols();
    const double scale = 8.0 * std::numbers::pi * std::numbers::pi / (wavelength * wavelength);
    double tau = 0.0;
    for (Eigen::Index j = 0; j < K; ++j)
    {
        const double pm = std::abs(P(m, j));
        // sum_{l != m} |[W_j]_{m,l}| = |p_{j,m}| sum_{l != m} |p_{j,l}|
        double off = 0.0;
        for (Eigen::Index l = 0; l < M; ++l)
            if (l != m)
                off += std::abs(P(l, j));
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const double s = geo.gain_l1[k]; // sum_{p,p1} T(p,p1,k) = s^2
            tau += 2.0 * s * s * pm * off + pm * pm * s * s + 2.0 * s * pm * std::abs(Z(k, j));
        }
    }
    return scale * tau;
}

bool distances_ok(Eigen::Index m, const AntennaLayoutd &layout, const Point2d &t, double min_distance)
{
    for (Eigen::Index l = 0; l < layout.size(); ++l)
        if (l != m && (t - layout.positions.col(l)).norm() < min_distance)
            return false;
    return true;
}

} // namespace

void SolverConfig::validate() const
{
    if (!(mu0 > 0.0))
        throw ConfigError("penalty factor mu0 must be positive");
    if (!(scaling > 0.0 && scaling < 1.0))
        throw ConfigError("penalty scaling a must lie in (0, 1)");
    if (!(eps_inner > 0.0 && eps_outer > 0.0 && eps_position > 0.0))
        throw ConfigError("thresholds must be positive");
    if (max_inner < 1 || max_outer < 1 || max_sca < 1)
        throw ConfigError("iteration caps must be at least 1");
    if (!(min_distance_wl >= 0.0))
        throw ConfigError("minimum antenna distance must be non-negative");
}

// ---- precoder ------------------------------------------------------------

Precoderd solve_precoder(const CMatrixd &H, const AuxiliaryVars &aux, const SarModeld &model, double mu,
                         bool *regularized)
{
    if (!(mu > 0.0))
        throw ConfigError("penalty factor must be positive");
    const CMatrixd &R = model.matrix();
    if (R.rows() != H.rows() || aux.z.rows() != H.cols() || aux.z.cols() != H.cols())
        throw ConfigError("precoder update: dimension mismatch");

    CMatrixd A = R + R.adjoint() + 2.0 * mu * H * H.adjoint();
    const CMatrixd rhs = 2.0 * mu * H * aux.z; // column k = a_k^H

    Eigen::LLT<CMatrixd> llt(A);
    bool reg = false;
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15)
    {
        A += 1e-12 * CMatrixd::Identity(A.rows(), A.cols());
        llt.compute(A);
        reg = true;
        if (llt.info() != Eigen::Success)
            throw SolverError("precoder system matrix is singular; increase mu or regularize R");
    }
    if (regularized)
        *regularized = reg;
    return llt.solve(rhs);
}

Precoderd solve_precoder(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const AuxiliaryVars &aux,
                         const SarModeld &model, double mu)
{
    return solve_precoder(channel_matrix(layout, channel), aux, model, mu);
}

// ---- auxiliary variables -------------------------------------------------

double dual_residual(const CVectord &c, Eigen::Index k, double threshold, double noise_variance, double zeta)
{
    double interference = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j)
        if (j != k)
            interference += std::norm(c[j]);
    const double lift = 1.0 - zeta;
    const double shrink = 1.0 + zeta * threshold;
    return std::norm(c[k]) / (lift * lift) - threshold * interference / (shrink * shrink) -
           threshold * noise_variance;
}

AuxiliaryVars solve_auxiliary(const CMatrixd &H, const Precoderd &P, const SinrTargets &targets,
                              double noise_variance)
{
    const Eigen::Index K = H.cols();
    targets.validate(K);
    if (!(noise_variance > 0.0))
        throw ConfigError("noise variance must be positive");

    const CMatrixd C = H.adjoint() * P; // C(k, j) = h_k^H p_j
    const RVectord gbar = targets.thresholds();
    AuxiliaryVars aux{C, RVectord::Zero(K)};

    for (Eigen::Index k = 0; k < K; ++k)
    {
        const CVectord c = C.row(k).transpose();
        const double g = gbar[k];
        if (dual_residual(c, k, g, noise_variance, 0.0) >= 0.0)
            continue; // unconstrained projection is feasible

        if (std::norm(c[k]) == 0.0)
            throw DegenerateUserError(k);

        double lo = 0.0;
        double hi = 1.0 - 1e-9;
        if (dual_residual(c, k, g, noise_variance, hi) < 0.0)
            throw DegenerateUserError(k);
        const double ytol = 1e-10 * g * noise_variance;
        while (hi - lo > 1e-14)
        {
            const double mid = 0.5 * (lo + hi);
            const double y = dual_residual(c, k, g, noise_variance, mid);
            if (y >= 0.0)
            {
                hi = mid;
                if (y <= ytol)
                    break;
            }
            else
            {
                lo = mid;
            }
        }
        const double zeta = hi; // Y(hi) >= 0 keeps z feasible
        aux.zeta[k] = zeta;
        for (Eigen::Index j = 0; j < K; ++j)
            aux.z(k, j) = (j == k) ? c[j] / (1.0 - zeta) : c[j] / (1.0 + zeta * g);
    }
    return aux;
}

AuxiliaryVars solve_auxiliary(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const Precoderd &P,
                              const SinrTargets &targets)
{
    return solve_auxiliary(channel_matrix(layout, channel), P, targets, channel.noise_variance);
}

// ---- positions -----------------------------------------------------------

double position_objective(const CMatrixd &H, const Precoderd &P, const AuxiliaryVars &aux)
{
    return coupling_residual(H, P, aux.z).squaredNorm();
}

double position_objective(const AntennaLayoutd &layout, const ChannelRealizationd &channel, const Precoderd &P,
                          const AuxiliaryVars &aux)
{
    return position_objective(channel_matrix(layout, channel), P, aux);
}

Point2d position_gradient(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                          const Precoderd &P, const AuxiliaryVars &aux)
{
    const PathGeometry geo(channel);
    const CMatrixd E = coupling_residual(channel_matrix(layout, channel), P, aux.z);
    return gradient_from_residual(geo, E, P, m, layout[m]);
}

double position_majorizer(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                          const Precoderd &P, const AuxiliaryVars &aux)
{
    if (m < 0 || m >= layout.size())
        throw ConfigError("antenna index out of range");
    const PathGeometry geo(channel);
    return majorizer_from_geometry(geo, P, aux.z, m, channel.wavelength);
}

double position_surrogate(const Point2d &t, const Point2d &anchor, double objective_at_anchor,
                          const Point2d &gradient, double tau)
{
    const Point2d d = t - anchor;
    return objective_at_anchor + gradient.dot(d) + 0.5 * tau * d.squaredNorm();
}

PositionStep minimize_position_surrogate(Eigen::Index m, const AntennaLayoutd &layout, const Point2d &gradient,
                                         double tau, const Regiond &region, double min_distance)
{
    if (!(tau > 0.0))
        throw ConfigError("majorizer tau must be positive");
    const Point2d anchor = layout[m];
    const Point2d target = anchor - gradient / tau;

    PositionStep step;
    // rounding-level tolerance so that points sitting exactly at distance D stay put
    if (region.contains(target) && distances_ok(m, layout, target, min_distance * (1.0 - 1e-12)))
    {
        step.position = target;
        return step;
    }
    step.used_qp = true;

    // Half-planes G_i^T t >= b_i: 4 box sides plus one linearized distance per neighbour.
    const double a = region.half_extent();
    std::vector<Point2d> normals = {Point2d(1, 0), Point2d(-1, 0), Point2d(0, 1), Point2d(0, -1)};
    std::vector<double> offsets = {-a, -a, -a, -a};
    for (Eigen::Index l = 0; l < layout.size(); ++l)
    {
        if (l == m)
            continue;
        const Point2d diff = anchor - layout.positions.col(l);
        const double dist = diff.norm();
        if (dist == 0.0)
        {
            step.position = anchor;
            step.infeasible = true;
            return step;
        }
        const Point2d n = diff / dist;
        normals.push_back(n);
        offsets.push_back(n.dot(layout.positions.col(l)) + min_distance);
    }

    const std::size_t nc = normals.size();
    const double tol = 1e-12 * std::max(a, min_distance);
    auto feasible = [&](const Point2d &t) {
        for (std::size_t i = 0; i < nc; ++i)
            if (normals[i].dot(t) < offsets[i] - tol)
                return false;
        return true;
    };

    // Projection of `target` onto a 2-D polygon: the optimum has at most two
    // active constraints, so enumerating all active sets of size 1 and 2 is exact.
    double best = std::numeric_limits<double>::infinity();
    Point2d best_point = anchor;
    std::vector<std::size_t> best_active;
    auto consider = [&](const Point2d &t, std::vector<std::size_t> active) {
        if (!feasible(t))
            return;
        const double d = (t - target).squaredNorm();
        if (d < best)
        {
            best = d;
            best_point = t;
            best_active = std::move(active);
        }
    };
    for (std::size_t i = 0; i < nc; ++i)
    {
        const double viol = offsets[i] - normals[i].dot(target);
        consider(target + viol * normals[i] / normals[i].squaredNorm(), {i});
    }
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = i + 1; j < nc; ++j)
        {
            Eigen::Matrix2d G;
            G.row(0) = normals[i].transpose();
            G.row(1) = normals[j].transpose();
            const double det = G.determinant();
            if (std::abs(det) < 1e-12)
                continue;
            consider(G.inverse() * Eigen::Vector2d(offsets[i], offsets[j]), {i, j});
        }

    if (!std::isfinite(best))
    {
        step.position = anchor;
        step.infeasible = true;
        return step;
    }

    // Stationarity tau (t - target) = sum_i lambda_i G_i with lambda >= 0.
    {
        Eigen::MatrixXd Ga(2, static_cast<Eigen::Index>(best_active.size()));
        for (std::size_t i = 0; i < best_active.size(); ++i)
            Ga.col(static_cast<Eigen::Index>(i)) = normals[best_active[i]];
        const Eigen::Vector2d lhs = tau * (best_point - target);
        const Eigen::VectorXd lambda = Ga.colPivHouseholderQr().solve(lhs);
        const double stat = (Ga * lambda - lhs).norm();
        const double dual = std::max(0.0, -lambda.minCoeff());
        step.kkt_residual = std::max(stat, dual) / std::max(1.0, tau * a);
    }

    step.position = region.clamp(best_point);
    if (!distances_ok(m, layout, step.position, min_distance - 1e-9))
    {
        step.position = anchor;
        step.infeasible = true;
    }
    return step;
}

PositionStep update_position(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                             const Precoderd &P, const AuxiliaryVars &aux, const Regiond &region,
                             double min_distance)
{
    const double tau = position_majorizer(m, layout, channel, P, aux);
    if (!(tau > 0.0))
        return PositionStep{layout[m], false, false, 0.0};
    const Point2d g = position_gradient(m, layout, channel, P, aux);
    return minimize_position_surrogate(m, layout, g, tau, region, min_distance);
}

// ---- loops ---------------------------------------------------------------

double penalized_objective(const SolverState &state, const SarModeld &model, double mu)
{
    return sar_value(state.precoder, model) + mu * position_objective(state.channels, state.precoder, state.aux);
}

CVectord matched_filter(const CVectord &h, double threshold, double noise_variance, bool scaled_power)
{
    const double n = h.norm();
    if (!(n > 0.0))
        return CVectord::Zero(h.size());
    // scaled: the interference-free minimum power gbar sigma^2 / ||h||^2
    const double amplitude = scaled_power ? std::sqrt(threshold * noise_variance) / n : 1.0;
    return h * (amplitude / n);
}

SolverState initial_state(const ChannelRealizationd &channel, const AntennaLayoutd &layout,
                          const SinrTargets &targets, bool scaled_power)
{
    SolverState state;
    state.layout = layout;
    state.channels = channel_matrix(layout, channel);
    state.precoder.resize(state.channels.rows(), state.channels.cols());
    const RVectord gbar = targets.thresholds();
    for (Eigen::Index k = 0; k < state.precoder.cols(); ++k)
        state.precoder.col(k) = matched_filter(state.channels.col(k), gbar[k], channel.noise_variance, scaled_power);
    state.aux = solve_auxiliary(state.channels, state.precoder, targets, channel.noise_variance);
    return state;
}

namespace
{

// Algorithm-2 style descent on antenna m. Returns the number of accepted steps.
int sca_antenna(Eigen::Index m, const PathGeometry &geo, const Regiond &region, double min_distance,
                const SolverConfig &config, SolverState &state, CMatrixd &E, InnerOutcome &outcome)
{
    const double tau0 = majorizer_from_geometry(geo, state.precoder, state.aux.z, m, region.wavelength);
    if (!(tau0 > 0.0))
        return 0; // objective locally constant in t_m

    int accepted = 0;
    for (int it = 0; it < config.max_sca; ++it)
    {
        const Point2d t0 = state.layout[m];
        const double q0 = E.squaredNorm();
        const Point2d g = gradient_from_residual(geo, E, state.precoder, m, t0);
        if (!(g.squaredNorm() > 0.0))
            break;

        const CVectord old_col = state.channels.row(m).adjoint(); // conj(h_{k,m})
        double tau = tau0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt)
        {
            const PositionStep step = minimize_position_surrogate(m, state.layout, g, tau, region, min_distance);
            if (step.infeasible)
            {
                ++outcome.position_fallbacks;
                return accepted;
            }
            const CVectord new_col = geo.conj_column(step.position);
            const CMatrixd E_new = E + (new_col - old_col) * state.precoder.row(m);
            const double q1 = E_new.squaredNorm();
            if (q1 <= q0 * (1.0 + 1e-14))
            {
                state.layout.positions.col(m) = step.position;
                state.channels.row(m) = new_col.adjoint();
                E = E_new;
                moved = true;
                ++accepted;
                if (q0 - q1 < config.eps_position)
                    return accepted;
                break;
            }
            // The printed curvature bound failed to majorize here; tighten it.
            tau *= 2.0;
            ++outcome.majorizer_backtracks;
        }
        if (!moved)
            break;
    }
    return accepted;
}

void check_monotone(double before, double after, double slack, const char *block)
{
    if (after > before + slack * std::max(1.0, std::abs(before)))
        throw InvariantViolation(std::string("penalized objective increased in the ") + block + " update: " +
                                 std::to_string(before) + " -> " + std::to_string(after));
}

} // namespace

InnerOutcome inner_loop(const ChannelRealizationd &channel, const Regiond &region, const SarModeld &model,
                        const SinrTargets &targets, const SolverConfig &config, double mu, SolverState &state,
                        std::vector<double> *trace)
{
    InnerOutcome outcome;
    const PathGeometry geo(channel);
    const double min_distance = config.min_distance_wl * region.wavelength;
    std::vector<bool> retried(static_cast<std::size_t>(channel.num_users()), false);

    double previous = penalized_objective(state, model, mu);
    for (int sweep = 0; sweep < config.max_inner; ++sweep)
    {
        const double start = previous;

        state.precoder = solve_precoder(state.channels, state.aux, model, mu);
        const double after_p = penalized_objective(state, model, mu);
        check_monotone(start, after_p, config.monotonic_slack, "precoder");

        double reference = after_p;
        for (;;)
        {
            try
            {
                state.aux = solve_auxiliary(state.channels, state.precoder, targets, channel.noise_variance);
                break;
            }
            catch (const DegenerateUserError &e)
            {
                const auto k = static_cast<std::size_t>(e.user());
                if (retried[k])
                    throw;
                retried[k] = true;
                outcome.degenerate_users.push_back(static_cast<int>(k));
                state.precoder.col(e.user()) =
                    matched_filter(state.channels.col(e.user()), targets.thresholds()[e.user()],
                                   channel.noise_variance, config.scaled_initial_power);
                reference = std::numeric_limits<double>::infinity(); // recovery may raise the objective
            }
        }
        const double after_z = penalized_objective(state, model, mu);
        if (std::isfinite(reference))
            check_monotone(reference, after_z, config.monotonic_slack, "auxiliary");

        double after_t = after_z;
        if (config.optimize_positions)
        {
            CMatrixd E = coupling_residual(state.channels, state.precoder, state.aux.z);
            for (Eigen::Index m = 0; m < state.layout.size(); ++m)
                sca_antenna(m, geo, region, min_distance, config, state, E, outcome);
            after_t = penalized_objective(state, model, mu);
            check_monotone(after_z, after_t, config.monotonic_slack, "position");
        }

        ++outcome.sweeps;
        if (trace)
            trace->push_back(after_t);
        previous = after_t;
        if (start - after_t < config.eps_inner)
            break;
    }
    outcome.objective = previous;
    return outcome;
}

std::optional<FixedLayoutOptimum> solve_fixed_layout(const CMatrixd &H, const SarModeld &model,
                                                     const SinrTargets &targets, double noise_variance)
{
    const Eigen::Index M = H.rows();
    const Eigen::Index K = H.cols();
    targets.validate(K);
    if (model.size() != M)
        throw ConfigError("SAR matrix does not match the channel dimension");

    CMatrixd Rs = 0.5 * (model.matrix() + model.matrix().adjoint());
    Eigen::LLT<CMatrixd> chol(Rs);
    if (chol.info() != Eigen::Success || chol.rcond() < 1e-12)
    {
        Rs.diagonal().array() += 1e-12 * std::max(1.0, model.eigenvalues().cwiseAbs().maxCoeff());
        chol.compute(Rs);
        if (chol.info() != Eigen::Success)
            return std::nullopt;
    }
    const CMatrixd Hw = chol.matrixL().solve(H); // whitened channels L^{-1} h_k
    const CMatrixd G = Hw.adjoint() * Hw;
    const RVectord gbar = targets.thresholds();

    // x = log(nu); residual r_k(x) = x_k - log((1 + gbar_k) B_kk(x)) with
    // B = (G + diag(e^{-x}))^{-1}. Plain iteration contracts at a rate close to 1 for
    // moderate and high SINR, so the residual is driven to zero by damped Newton.
    struct Evaluation
    {
        RVectord residual;
        Eigen::MatrixXd jacobian;
        CMatrixd B;
        bool ok = false;
    };
    auto evaluate = [&](const RVectord &x) {
        Evaluation ev;
        const RVectord nu_inv = (-x).array().exp();
        CMatrixd A = G;
        A.diagonal() += nu_inv.cast<cd>();
        Eigen::LLT<CMatrixd> llt(A);
        if (llt.info() != Eigen::Success)
            return ev;
        ev.B = llt.solve(CMatrixd::Identity(K, K));
        ev.B = 0.5 * (ev.B + ev.B.adjoint()).eval();
        ev.residual.resize(K);
        ev.jacobian = Eigen::MatrixXd::Identity(K, K);
        for (Eigen::Index k = 0; k < K; ++k)
        {
            const double b = ev.B(k, k).real();
            if (!(b > 0.0))
                return ev;
            ev.residual[k] = x[k] - std::log((1.0 + gbar[k]) * b);
            // d B_kk / d x_i = |B_ki|^2 / nu_i
            for (Eigen::Index i = 0; i < K; ++i)
                ev.jacobian(k, i) -= std::norm(ev.B(k, i)) * nu_inv[i] / b;
        }
        ev.ok = ev.residual.allFinite() && ev.jacobian.allFinite();
        return ev;
    };

    RVectord x(K);
    for (Eigen::Index k = 0; k < K; ++k)
        x[k] = std::log(gbar[k] / Hw.col(k).squaredNorm()); // exact for K = 1
    Evaluation ev = evaluate(x);
    if (!ev.ok)
        return std::nullopt;

    int it = 0;
    for (; it < 200; ++it)
    {
        const double norm0 = ev.residual.cwiseAbs().maxCoeff();
        if (norm0 < 1e-12)
            break;
        const RVectord step = ev.jacobian.partialPivLu().solve(-ev.residual);
        bool accepted = false;
        if (step.allFinite())
        {
            double scale = 1.0;
            for (int bt = 0; bt < 40 && !accepted; ++bt, scale *= 0.5)
            {
                const RVectord trial = x + scale * step;
                Evaluation next = evaluate(trial);
                if (next.ok && next.residual.cwiseAbs().maxCoeff() < norm0)
                {
                    x = trial;
                    ev = std::move(next);
                    accepted = true;
                }
            }
        }
        if (!accepted)
        {
            // fixed-point step x <- log((1 + gbar) B_kk)
            const RVectord trial = x - ev.residual;
            Evaluation next = evaluate(trial);
            if (!next.ok || next.residual.cwiseAbs().maxCoeff() >= norm0)
                break; // stalled at rounding level
            x = trial;
            ev = std::move(next);
        }
        if (x.maxCoeff() > 700.0)
            return std::nullopt; // multipliers diverging: targets infeasible
    }

    // Directions R^{-1} H B, computed two ways: mapped back from the whitened domain (accurate
    // at high SINR for well-conditioned R) and as (R + H diag(nu) H^H)^{-1} H diag(nu)
    // (accurate when R is singular or nearly so). Each is made SINR-exact and the lower SAR wins.
    const RVectord nu = x.array().exp();
    std::vector<CMatrixd> candidates;
    candidates.push_back(chol.matrixU().solve(Hw * ev.B));
    CMatrixd T = Rs;
    T.noalias() += H * nu.cast<cd>().asDiagonal() * H.adjoint();
    const Eigen::LLT<CMatrixd> tchol(T);
    if (tchol.info() == Eigen::Success)
        candidates.push_back(tchol.solve(H * nu.cast<cd>().asDiagonal()));

    CMatrixd V, P;
    double best = std::numeric_limits<double>::infinity();
    for (const auto &c : candidates)
    {
        Precoderd trial = c;
        if (!c.allFinite() || !restore_sinr_feasibility(H, trial, targets, noise_variance))
            continue;
        const double sar = sar_value(trial, model);
        if (sar < best)
        {
            best = sar;
            V = c;
            P = std::move(trial);
        }
    }
    if (!std::isfinite(best))
        return std::nullopt;

    FixedLayoutOptimum out;
    out.iterations = it;
    out.multipliers = nu;
    RVectord scale(K);
    for (Eigen::Index j = 0; j < K; ++j)
        scale[j] = P.col(j).norm() / V.col(j).norm();
    out.weighted_coupling = ev.B * scale.cast<cd>().asDiagonal();
    out.precoder = std::move(P);
    return out;
}

std::optional<Precoderd> optimal_fixed_layout_precoder(const CMatrixd &H, const SarModeld &model,
                                                       const SinrTargets &targets, double noise_variance)
{
    auto opt = solve_fixed_layout(H, model, targets, noise_variance);
    if (!opt)
        return std::nullopt;
    return std::move(opt->precoder);
}

bool restore_sinr_feasibility(const CMatrixd &H, Precoderd &P, const SinrTargets &targets, double noise_variance)
{
    const Eigen::Index K = P.cols();
    RVectord norms(K);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        norms[k] = P.col(k).norm();
        if (!(norms[k] > 0.0))
            return false;
    }
    const Precoderd U = P * norms.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd G = (H.adjoint() * U).cwiseAbs2(); // G(k, j) = |h_k^H u_j|^2
    const RVectord gbar = targets.thresholds();

    Eigen::MatrixXd A = -G;
    for (Eigen::Index k = 0; k < K; ++k)
        A(k, k) = G(k, k) / gbar[k];
    const Eigen::VectorXd power = A.partialPivLu().solve(Eigen::VectorXd::Constant(K, noise_variance));
    if (!power.allFinite() || (power.array() <= 0.0).any())
        return false;
    P = U * power.cwiseSqrt().asDiagonal();
    return true;
}

Point2d fixed_layout_sar_gradient(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                                  const FixedLayoutOptimum &optimum)
{
    // dL/dt_m = -sum_{k,j} 2 Re{ conj(W_kj) d_k p_{m,j} }, d_k = d conj(h_{k,m}) / dt_m
    const PathGeometry geo(channel);
    const auto d = geo.conj_column_derivative(layout[m]);
    const CVectord w = optimum.weighted_coupling.conjugate() * optimum.precoder.row(m).transpose();
    Point2d g;
    g.x() = -2.0 * (w.array() * d.col(0).array()).sum().real();
    g.y() = -2.0 * (w.array() * d.col(1).array()).sum().real();
    return g;
}

std::optional<RefineOutcome> refine_layout(const ChannelRealizationd &channel, const SinrTargets &targets,
                                           const SarModeld &model, const Regiond &region, double min_distance,
                                           const AntennaLayoutd &layout, int max_sweeps, double relative_tolerance)
{
    auto evaluate = [&](const AntennaLayoutd &trial) -> std::optional<FixedLayoutOptimum> {
        return solve_fixed_layout(channel_matrix(trial, channel), model, targets, channel.noise_variance);
    };

    auto current = evaluate(layout);
    if (!current)
        return std::nullopt;
    RefineOutcome out{layout, current->precoder, sar_value(current->precoder, model), 0, 0};
    const Eigen::Index M = layout.size();

    for (int sweep = 0; sweep < max_sweeps; ++sweep)
    {
        const double start = out.sar;
        for (Eigen::Index m = 0; m < M; ++m)
        {
            const Point2d g = fixed_layout_sar_gradient(m, out.layout, channel, *current);
            if (!(g.squaredNorm() > 0.0) || !g.allFinite())
                continue;
            // Steps are capped at lambda / 50 so the descent tracks the gradient flow
            // into the basin of the start point instead of jumping between basins.
            const double tau_floor = g.norm() / (0.02 * region.wavelength);
            double t = tau_floor;
            for (int bt = 0; bt < 40; ++bt)
            {
                const PositionStep step = minimize_position_surrogate(m, out.layout, g, t, region, min_distance);
                if (step.infeasible)
                    break;
                const Point2d delta = step.position - out.layout[m];
                if (!(delta.squaredNorm() > 0.0))
                    break;
                AntennaLayoutd trial = out.layout;
                trial.positions.col(m) = step.position;
                auto next = evaluate(trial);
                const double sar = next ? sar_value(next->precoder, model) : 0.0;
                if (next && sar <= out.sar + 1e-4 * g.dot(delta))
                {
                    out.layout = std::move(trial);
                    out.sar = sar;
                    current = std::move(next);
                    ++out.accepted_steps;
                    break;
                }
                t *= 2.0;
            }
        }
        ++out.sweeps;
        if (start - out.sar <= relative_tolerance * start)
            break;
    }
    out.precoder = current->precoder;
    return out;
}

Feasibility check_feasibility(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const Precoderd &P,
                              const SinrTargets &targets, const Regiond &region, double min_distance,
                              double sinr_tolerance)
{
    Feasibility f;
    const CMatrixd H = channel_matrix(layout, channel);
    const RVectord gbar = targets.thresholds();
    f.sinr_slack.resize(P.cols());
    for (Eigen::Index k = 0; k < P.cols(); ++k)
        f.sinr_slack[k] = sinr(H, P, channel.noise_variance, k) / gbar[k] - 1.0;
    f.sinr_ok = (f.sinr_slack.array() >= -sinr_tolerance).all();
    f.min_distance = layout.size() > 1 ? layout.min_pairwise_distance() : std::numeric_limits<double>::infinity();
    f.distance_ok = f.min_distance >= min_distance - 1e-9;
    f.inside_region = layout.inside(region);
    return f;
}

AntennaLayoutd default_initial_layout(Eigen::Index num_antennas, const Regiond &region)
{
    return centered_ula(num_antennas, 0.5 * region.wavelength, region);
}

SolveReport solve_sar_min(const ChannelRealizationd &channel, const SinrTargets &targets, const SarModeld &model,
                          const SolverConfig &config, const Regiond &region,
                          const std::optional<AntennaLayoutd> &initial_layout)
{
    const auto clock_start = std::chrono::steady_clock::now();
    config.validate();
    channel.validate();
    targets.validate(channel.num_users());
    if (std::abs(region.wavelength - channel.wavelength) > 1e-12 * channel.wavelength)
        throw ConfigError("region and channel disagree on the wavelength");

    const AntennaLayoutd layout = initial_layout ? *initial_layout : default_initial_layout(model.size(), region);
    if (layout.size() != model.size())
        throw ConfigError("layout size does not match the SAR matrix");
    const double min_distance = config.min_distance_wl * region.wavelength;
    if (!layout.feasible(region, min_distance))
        throw ConfigError("initial layout violates the region or minimum-distance constraint");

    SolveReport report;
    report.beta0 = targets.beta0;
    report.xi_scale = config.relative_thresholds ? channel.noise_variance * targets.thresholds().maxCoeff() : 1.0;
    SolverConfig scaled = config;
    scaled.eps_inner *= report.xi_scale;
    scaled.eps_position *= report.xi_scale;
    scaled.eps_outer *= report.xi_scale;
    report.synthetic_sar = model.synthetic();

    SolverState state = initial_state(channel, layout, targets, config.scaled_initial_power);
    double mu = config.mu0;
    std::vector<double> xi_history;
    report.status = "max_outer";

    try
    {
        for (int outer = 1; outer <= config.max_outer; ++outer)
        {
            report.inner_offsets.push_back(static_cast<int>(report.inner_trace.size()));
            const InnerOutcome inner = inner_loop(channel, region, model, targets, scaled, mu, state,
                                                  config.record_inner_trace ? &report.inner_trace : nullptr);
            report.inner_iterations += inner.sweeps;
            report.position_fallbacks += inner.position_fallbacks;
            report.majorizer_backtracks += inner.majorizer_backtracks;
            report.degenerate_users.insert(report.degenerate_users.end(), inner.degenerate_users.begin(),
                                           inner.degenerate_users.end());

            const double xi = position_objective(state.channels, state.precoder, state.aux);
            xi_history.push_back(xi);
            report.outer.push_back(
                OuterRecord{outer, mu, xi, inner.objective, sar_value(state.precoder, model), inner.sweeps});
            report.outer_iterations = outer;
            report.xi = xi;
            report.mu = mu;

            if (xi < scaled.eps_outer)
            {
                report.converged = true;
                report.status = "converged";
                break;
            }
            const auto n = xi_history.size();
            if (n > static_cast<std::size_t>(config.plateau_window) &&
                xi > (1.0 - config.plateau_relative) * xi_history[n - 1 - static_cast<std::size_t>(config.plateau_window)])
            {
                report.plateau = true;
                report.status = "plateau";
                break;
            }
            mu /= config.scaling;
        }
    }
    catch (const DegenerateUserError &e)
    {
        report.status = std::string("degenerate: ") + e.what();
        report.converged = false;
    }

    report.layout = state.layout;
    report.precoder = state.precoder;
    report.penalty_sar = sar_value(state.precoder, model);
    if (config.polish)
    {
        if (auto exact = optimal_fixed_layout_precoder(state.channels, model, targets, channel.noise_variance))
        {
            report.precoder = *exact;
            report.polished = true;
        }
        else
        {
            restore_sinr_feasibility(state.channels, report.precoder, targets, channel.noise_variance);
        }
    }
    report.sar = sar_value(report.precoder, model);
    report.restoration_ratio = report.penalty_sar > 0.0 ? report.sar / report.penalty_sar : 1.0;

    if (report.polished && config.keep_better_initial)
    {
        const CMatrixd H0 = channel_matrix(layout, channel);
        if (auto start = optimal_fixed_layout_precoder(H0, model, targets, channel.noise_variance))
        {
            const double sar0 = sar_value(*start, model);
            if (sar0 < report.sar)
            {
                report.layout = layout;
                report.precoder = *start;
                report.sar = sar0;
                report.kept_initial_layout = true;
            }
        }
    }
    if (report.polished && config.refine_layout && config.optimize_positions)
    {
        if (auto refined = refine_layout(channel, targets, model, region, min_distance, report.layout,
                                         config.refine_max_sweeps))
        {
            report.refine_sweeps = refined->sweeps;
            if (refined->sar <= report.sar)
            {
                report.layout = refined->layout;
                report.precoder = refined->precoder;
                report.sar = refined->sar;
            }
        }
    }
    report.feasibility = check_feasibility(channel, report.layout, report.precoder, targets, region, min_distance);
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return report;
}

} // namespace fasar
