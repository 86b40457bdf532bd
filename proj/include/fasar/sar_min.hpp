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

// QoS-constrained SAR minimization over precoder and antenna positions:
//
//   min_{P, t}  sum_k p_k^H R p_k
//   s.t.        SINR_k(P, t) >= gbar_k,  t in S,  ||t_m - t_l|| >= D.
//
// The bilinear terms h_k^H p_j are replaced by auxiliary z_{k,j} and the
// equality is moved into a quadratic penalty mu * sum |h_k^H p_j - z_{k,j}|^2.
// The inner layer alternates P (closed form), z (per-user dual bisection) and
// t (per-antenna successive convex approximation); the outer layer grows mu
// until the coupling residual xi drops below eps_outer.

#ifndef FASAR_SAR_MIN_HPP
#define FASAR_SAR_MIN_HPP

#include <optional>
#include <string>
#include <vector>

#include "fasar/channel.hpp"
#include "fasar/exposure.hpp"

namespace fasar
{

using CVectord = CVector<double>;
using CMatrixd = CMatrix<double>;
using RVectord = RVector<double>;
using Point2d = Point2<double>;
using Precoderd = Precoder<double>;
using Regiond = Region<double>;
using AntennaLayoutd = AntennaLayout<double>;
using PathSetd = PathSet<double>;
using ChannelRealizationd = ChannelRealization<double>;
using SarModeld = SarModel<double>;

// Per-user SINR thresholds gbar_k = beta0 * gamma_k.
struct SinrTargets
{
    double beta0 = 1.0;
    RVectord weights; // gamma_k

    static SinrTargets uniform(Eigen::Index num_users, double beta0)
    {
        return SinrTargets{beta0, RVectord::Ones(num_users)};
    }

    RVectord thresholds() const { return beta0 * weights; }

    void validate(Eigen::Index num_users) const
    {
        if (weights.size() != num_users)
            throw ConfigError("SINR weight count does not match the user count");
        if (!(beta0 > 0.0) || (weights.array() <= 0.0).any())
            throw ConfigError("SINR targets must be positive");
    }
};

// z(k, j) stands in for h_k^H p_j; zeta holds the per-user multipliers of the last update.
struct AuxiliaryVars
{
    CMatrixd z;
    RVectord zeta;
};

struct PenaltyState
{
    double mu = 1e-3;
    double a = 0.9;
    double xi = 0.0;
};

struct SolverConfig
{
    double mu0 = 1e-3;         // initial penalty factor
    double scaling = 0.9;      // a in mu <- mu / a
    double eps_inner = 1e-4;   // inner-loop objective decrease threshold
    double eps_outer = 1e-7;   // stopping threshold on xi
    double eps_position = 1e-4; // per-antenna SCA decrease threshold
    int max_inner = 200;
    int max_outer = 500;
    int max_sca = 30;
    int plateau_window = 20;
    double plateau_relative = 0.01;
    double min_distance_wl = 0.5; // D in wavelengths
    double monotonic_slack = 1e-9;
    bool optimize_positions = true;
    // Apply eps_position, eps_inner and eps_outer to quantities divided by the target
    // received power s = sigma^2 max_k gbar_k (watts) instead of the raw values.
    bool relative_thresholds = true;
    bool scaled_initial_power = true; // matched filter at single-user minimum power, not unit norm
    bool polish = true;              // re-solve P exactly at the final layout
    bool refine_layout = false;      // then descend the exact SAR over positions
    int refine_max_sweeps = 300;
    bool keep_better_initial = true; // never return a layout worse than the initial one
    bool record_inner_trace = true;

    void validate() const;
};

struct OuterRecord
{
    int iteration = 0;
    double mu = 0.0;
    double xi = 0.0;
    double objective = 0.0; // SAR + mu * xi at the end of the inner loop
    double sar = 0.0;
    int inner_sweeps = 0;
};

struct Feasibility
{
    RVectord sinr_slack; // SINR_k / gbar_k - 1
    double min_distance = 0.0;
    bool inside_region = false;
    bool sinr_ok = false;
    bool distance_ok = false;

    bool ok() const { return sinr_ok && distance_ok && inside_region; }
};

struct SolveReport
{
    Precoderd precoder;
    AntennaLayoutd layout;
    double sar = 0.0;
    double beta0 = 0.0;
    double xi = 0.0; // stopping indicator at exit, before polishing
    double xi_scale = 1.0; // s used by relative thresholds (1 when absolute)
    double mu = 0.0;
    double penalty_sar = 0.0;       // SAR of the penalty iterate before polishing
    double restoration_ratio = 1.0; // sar / penalty_sar
    bool polished = false;
    int refine_sweeps = 0;
    bool kept_initial_layout = false;
    std::vector<OuterRecord> outer;
    std::vector<double> inner_trace;
    std::vector<int> inner_offsets; // start of each outer iteration's segment in inner_trace
    Feasibility feasibility;
    double wall_time_s = 0.0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    int position_fallbacks = 0; // antenna steps kept because the linearized set was empty
    int majorizer_backtracks = 0;
    std::vector<int> degenerate_users;
    bool converged = false;
    bool plateau = false;
    bool synthetic_sar = false;
    std::string status;
};

// Mutable iterate of the inner layer.
struct SolverState
{
    Precoderd precoder;
    AuxiliaryVars aux;
    AntennaLayoutd layout;
    CMatrixd channels; // M x K, column k = h_k(t)
};

// ---- block updates -------------------------------------------------------

// p_k = (R + R^H + 2 mu sum_i h_i h_i^H)^{-1} a_k^H, a_k = 2 mu sum_i z*_{i,k} h_i^H.
// Adds 1e-12 I only when the system matrix is numerically singular.
Precoderd solve_precoder(const CMatrixd &H, const AuxiliaryVars &aux, const SarModeld &model, double mu,
                         bool *regularized = nullptr);
Precoderd solve_precoder(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const AuxiliaryVars &aux,
                         const SarModeld &model, double mu);

// Per-user projection onto the SINR set via the Lagrange dual. Throws
// DegenerateUserError when h_k^H p_k = 0 and the constraint is violated.
AuxiliaryVars solve_auxiliary(const CMatrixd &H, const Precoderd &P, const SinrTargets &targets,
                              double noise_variance);
AuxiliaryVars solve_auxiliary(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const Precoderd &P,
                              const SinrTargets &targets);

// Y(zeta) for user k given c_j = h_k^H p_j (row k of H^H P).
double dual_residual(const CVectord &c, Eigen::Index k, double threshold, double noise_variance, double zeta);

// sum_{k,j} |h_k^H(t) p_j - z_{k,j}|^2; equals the stopping indicator xi.
double position_objective(const CMatrixd &H, const Precoderd &P, const AuxiliaryVars &aux);
double position_objective(const AntennaLayoutd &layout, const ChannelRealizationd &channel, const Precoderd &P,
                          const AuxiliaryVars &aux);

// Gradient of the position objective with respect to t_m (others fixed).
Point2d position_gradient(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                          const Precoderd &P, const AuxiliaryVars &aux);

// Curvature bound tau_m built from W_j = p_j p_j^H, pbar_{k,j} = p_j z*_{k,j} and
// T(p, p1, k) = |f_{k,p}||f_{k,p1}|.
double position_majorizer(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                          const Precoderd &P, const AuxiliaryVars &aux);

// Quadratic surrogate q(t_n) + g^T (t - t_n) + tau/2 |t - t_n|^2.
double position_surrogate(const Point2d &t, const Point2d &anchor, double objective_at_anchor,
                          const Point2d &gradient, double tau);

struct PositionStep
{
    Point2d position;
    bool used_qp = false;
    bool infeasible = false; // linearized set empty; previous position kept
    double kkt_residual = 0.0;
};

// Minimizes tau/2 |t|^2 + (g - tau t_n)^T t over the box S and the linearized
// distance constraints (t_n - t_l)^T (t - t_l) / ||t_n - t_l|| >= D.
PositionStep minimize_position_surrogate(Eigen::Index m, const AntennaLayoutd &layout, const Point2d &gradient,
                                         double tau, const Regiond &region, double min_distance);

// One SCA step for antenna m with the printed tau_m.
PositionStep update_position(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                             const Precoderd &P, const AuxiliaryVars &aux, const Regiond &region,
                             double min_distance);

// ---- loops ---------------------------------------------------------------

struct InnerOutcome
{
    int sweeps = 0;
    double objective = 0.0;
    int position_fallbacks = 0;
    int majorizer_backtracks = 0;
    std::vector<int> degenerate_users;
};

// One outer iteration's alternating loop P -> z -> t at fixed mu.
InnerOutcome inner_loop(const ChannelRealizationd &channel, const Regiond &region, const SarModeld &model,
                        const SinrTargets &targets, const SolverConfig &config, double mu, SolverState &state,
                        std::vector<double> *trace = nullptr);

double penalized_objective(const SolverState &state, const SarModeld &model, double mu);

// p_k = a_k h_k / ||h_k|| with a_k = 1, or a_k = sqrt(gbar_k sigma^2) / ||h_k|| when
// `scaled_power` (the single-user minimum power, which scales with the targets).
CVectord matched_filter(const CVectord &h, double threshold, double noise_variance, bool scaled_power);

// Matched-filter precoder followed by one auxiliary update.
SolverState initial_state(const ChannelRealizationd &channel, const AntennaLayoutd &layout,
                          const SinrTargets &targets, bool scaled_power = true);

// Exact minimum-SAR precoder for a fixed layout:
//   min sum_k p_k^H R p_k  s.t.  SINR_k >= gbar_k.
// With G = H^H R^{-1} H and N = diag(nu), the optimal directions are
// p_k ~ R^{-1} H B e_k where B = (G + N^{-1})^{-1}, and the multipliers solve
//   nu_k = (1 + gbar_k) B_kk.
// Working with the K x K matrix B keeps the solve well conditioned at the high SINR
// levels of interest, where nu ~ 1e11 and the M x M form sigma^2 I + sum nu h h^H is
// numerically singular. Powers come from the SINR-equality system.
struct FixedLayoutOptimum
{
    Precoderd precoder;
    // nu_k of the Lagrangian
    //   sum_k p_k^H R p_k - sum_k nu_k (|h_k^H p_k|^2 / gbar_k - sum_{j != k} |h_k^H p_j|^2 - sigma^2)
    RVectord multipliers;
    // W(k, j) = nu_k h_k^H p_j / gbar_k on the diagonal and -nu_k h_k^H p_j off it,
    // which equals B_kj a_j for the direction scales a_j; evaluated in that form.
    CMatrixd weighted_coupling;
    int iterations = 0;
};

// Returns nullopt when the multipliers diverge (targets infeasible for this layout).
std::optional<FixedLayoutOptimum> solve_fixed_layout(const CMatrixd &H, const SarModeld &model,
                                                     const SinrTargets &targets, double noise_variance);

std::optional<Precoderd> optimal_fixed_layout_precoder(const CMatrixd &H, const SarModeld &model,
                                                       const SinrTargets &targets, double noise_variance);

// Gradient of the exact fixed-layout minimum SAR with respect to t_m, from the
// envelope theorem applied to the Lagrangian above.
Point2d fixed_layout_sar_gradient(Eigen::Index m, const AntennaLayoutd &layout, const ChannelRealizationd &channel,
                                  const FixedLayoutOptimum &optimum);

struct RefineOutcome
{
    AntennaLayoutd layout;
    Precoderd precoder;
    double sar = 0.0;
    int sweeps = 0;
    int accepted_steps = 0;
};

// Block-coordinate projected descent of the exact fixed-layout minimum SAR over
// antenna positions, started from `layout`. Steps reuse the per-antenna
// box/linearized-distance projection of the position update.
std::optional<RefineOutcome> refine_layout(const ChannelRealizationd &channel, const SinrTargets &targets,
                                           const SarModeld &model, const Regiond &region, double min_distance,
                                           const AntennaLayoutd &layout, int max_sweeps = 300,
                                           double relative_tolerance = 1e-10);

// Rescales per-user powers with directions fixed so that every SINR constraint is
// met with equality. Returns false (P untouched) when no positive power vector exists.
bool restore_sinr_feasibility(const CMatrixd &H, Precoderd &P, const SinrTargets &targets, double noise_variance);

Feasibility check_feasibility(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const Precoderd &P,
                              const SinrTargets &targets, const Regiond &region, double min_distance,
                              double sinr_tolerance = 1e-5);

// Full two-layer solve. `initial_layout` defaults to the centered lambda/2 ULA.
SolveReport solve_sar_min(const ChannelRealizationd &channel, const SinrTargets &targets, const SarModeld &model,
                          const SolverConfig &config, const Regiond &region,
                          const std::optional<AntennaLayoutd> &initial_layout = std::nullopt);

AntennaLayoutd default_initial_layout(Eigen::Index num_antennas, const Regiond &region);

} // namespace fasar

#endif // FASAR_SAR_MIN_HPP
