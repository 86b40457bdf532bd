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

// Max-min weighted SINR under a SAR budget, solved by bisection on the common
// SINR level beta0: a probe is accepted when the minimum SAR needed to reach
// beta0 * gamma_k for every user stays within Q0.
//
// The search runs on beta0 in dB. SINR levels of interest span roughly 100 to
// 160 dB (no large-scale fading), so a fixed accuracy is only meaningful on a
// logarithmic scale.

#ifndef FASAR_SINR_BALANCE_HPP
#define FASAR_SINR_BALANCE_HPP

#include <functional>
#include <optional>
#include <vector>

#include "fasar/sar_min.hpp"

namespace fasar
{

struct BalanceConfig
{
    double accuracy_db = 1e-4;           // epsilon_1
    std::optional<double> lower_db;      // beta_l; derived from the initial layout when empty
    std::optional<double> upper_db;      // beta_u; default_upper_bracket when empty
    RVectord weights;                    // gamma_k; all ones when empty
    int max_expansions = 3;              // doublings of beta_u if the top stays feasible
    SolverConfig solver;

    void validate(Eigen::Index num_users) const;
};

struct Probe
{
    double beta0_db = 0.0;
    double sar = 0.0;
    bool converged = false;
    bool within_budget = false;
};

struct BalanceReport
{
    double beta_db = 0.0; // beta* = final lower bracket end
    double lower_db = 0.0;
    double upper_db = 0.0;
    double initial_lower_db = 0.0;
    double initial_upper_db = 0.0;
    double budget = 0.0;
    double achieved_db = 0.0; // min_k SINR_k / gamma_k of the returned solution
    std::vector<Probe> ladder;
    SolveReport solution; // P3 solution at beta*, also the max-min solution
    int expansions = 0;
    int bisection_steps = 0;
    bool non_monotone = false;     // a feasible probe sits above an infeasible one
    bool nonconverged_probe = false;
    bool top_exit = false;         // still feasible at beta_u after all expansions
    bool solution_found = false;
    double wall_time_s = 0.0;
};

// Minimum-SAR oracle: returns the P3 solution for a given linear beta0.
using SarOracle = std::function<SolveReport(double beta0)>;

// Whether a P3 probe counts as within budget. Non-converged or infeasible
// probes count as over budget.
bool probe_within_budget(const SolveReport &report, double budget);

// Algorithm-1 bisection on [lower_db, upper_db] with the given oracle.
BalanceReport bisect_sinr_level(const SarOracle &oracle, double budget, double lower_db, double upper_db,
                                double accuracy_db, int max_expansions);

// beta_u = 4 max_k (Q0 / lambda_min^+) ||h_k||^2 / (sigma^2 gamma_k) at `layout` (linear).
double default_upper_bracket(const ChannelRealizationd &channel, const SarModeld &model, const RVectord &weights,
                             const AntennaLayoutd &layout);

// A level whose exact fixed-layout SAR at `layout` is below the budget; since the
// minimum SAR over beta grows at least linearly, beta_u * Q0 / SAR(beta_u) qualifies.
double default_lower_bracket(const ChannelRealizationd &channel, const SarModeld &model, const RVectord &weights,
                             const AntennaLayoutd &layout, double upper);

// FAS max-min solve: the oracle is solve_sar_min from `initial_layout`.
BalanceReport solve_sinr_balance(const ChannelRealizationd &channel, const SarModeld &model,
                                 const BalanceConfig &config, const Regiond &region,
                                 const std::optional<AntennaLayoutd> &initial_layout = std::nullopt);

} // namespace fasar

#endif // FASAR_SINR_BALANCE_HPP
