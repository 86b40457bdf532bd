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

// Comparison schemes: a power-constrained design without SAR awareness, its
// backed-off variant, exhaustive grid position selection (APS), a fixed
// lambda/2 linear array (FPA), and the multi-start fluid antenna pipeline used
// for the region and budget sweeps.

#ifndef FASAR_BASELINES_HPP
#define FASAR_BASELINES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fasar/sinr_balance.hpp"

namespace fasar
{

enum class Objective
{
    sar_min, // minimize SAR at fixed SINR targets
    balance  // maximize the minimum weighted SINR under the SAR budget
};

std::string to_string(Objective objective);
Objective objective_from_string(const std::string &name);

struct BaselineConfig
{
    double power_budget = 2.0;      // P_t in watts
    double grid_spacing_wl = 0.5;   // APS grid spacing in wavelengths
    std::size_t aps_cap = 20000;    // combinations evaluated before subsampling kicks in
    std::uint64_t seed = 0;         // APS subsampling
    int fas_starts = 8;             // best APS layouts used as fluid antenna starts
    bool fas_include_ula = true;    // also start from the linear array

    void validate() const;
};

// What to solve. `balance.solver` configures every inner minimum-SAR solve;
// `beta0` and `balance.weights` define the targets of the sar-min objective.
struct Problem
{
    Objective objective = Objective::sar_min;
    double beta0 = 1.0; // linear
    BalanceConfig balance;

    SinrTargets targets(Eigen::Index num_users) const;
};

struct ApsSearch
{
    std::size_t grid_points = 0;
    double total_combinations = 0.0; // C(n_g, M), may exceed 2^64
    std::size_t evaluated = 0;
    std::size_t spacing_violations = 0; // combinations closer than D (spacing < D only)
    std::size_t exact_solves = 0;
    double coverage = 1.0; // evaluated / total
    bool subsampled = false;
    double reference_beta = 0.0; // linear level the balance screening ran at
    std::vector<int> winner;     // grid indices of the best layout
    // Layouts ranked by screening value (SAR, or SAR/beta for balance), best first.
    std::vector<AntennaLayoutd> ranked;
    std::vector<double> ranked_values;
};

struct BaselineReport
{
    std::string scheme;
    Objective objective = Objective::sar_min;
    double value = 0.0;       // SAR (sar-min) or beta* in dB (balance)
    double sar = 0.0;         // SAR of the returned precoder
    double achieved_db = 0.0; // min_k SINR_k / gamma_k of the returned precoder, dB
    Precoderd precoder;
    AntennaLayoutd layout;
    std::optional<SolveReport> solve;
    std::optional<BalanceReport> balance;
    std::optional<ApsSearch> aps;
    double backoff_factor = 1.0;  // alpha
    double unscaled_sar = 0.0;    // SAR before backoff
    int starts = 0;               // fluid antenna starts tried
    int best_start = -1;          // index into the start list (ULA last when included)
};

// Identity quadratic form with budget P_t: the "SAR" becomes total transmit power.
SarModeld power_model(Eigen::Index num_antennas, double power_budget);

// Max-min SINR under sum_k ||p_k||^2 <= P_t, positions optimized from the ULA.
BaselineReport solve_without_sar(const ChannelRealizationd &channel, const Eigen::Index num_antennas,
                                 const BaselineConfig &config, const BalanceConfig &balance, const Regiond &region);

// alpha = min(1, Q0 / SAR(Pbar)) applied to a power-constrained solution.
double backoff_factor(double budget, double sar);
BaselineReport adaptive_backoff(const BaselineReport &without_sar, const ChannelRealizationd &channel,
                                const SarModeld &model, const RVectord &weights = RVectord());
BaselineReport adaptive_backoff(const ChannelRealizationd &channel, const SarModeld &model,
                                const BaselineConfig &config, const BalanceConfig &balance, const Regiond &region);

// Centered lambda/2 ULA with the position step disabled. Throws ConfigError when
// the array does not fit in the region.
BaselineReport solve_fpa(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const Regiond &region);

// Candidate positions -A + i * spacing on both axes, row-major.
std::vector<Point2d> aps_grid(const Regiond &region, double spacing);

// Binomial coefficient as a double (exact below 2^53).
double combinations(std::size_t n, std::size_t k);

// Layout combinations in lexicographic order: all of them when C(n, M) <= cap,
// otherwise `cap` distinct ones drawn uniformly with `seed`.
std::vector<std::vector<int>> aps_combinations(std::size_t grid_points, std::size_t num_antennas, std::size_t cap,
                                               std::uint64_t seed, bool *subsampled = nullptr);

// Exact fixed-layout minimum SAR (nullopt when the targets are unreachable).
std::optional<double> fixed_layout_sar(const CMatrixd &H, const SarModeld &model, const SinrTargets &targets,
                                       double noise_variance);

// Largest beta (linear, within accuracy_db) whose exact fixed-layout SAR is within
// the budget. Iterates beta <- Q0 beta / SAR(beta), which alternates around the
// answer because SAR(beta) / beta is nondecreasing; falls back to bisection.
// Returns 0 when no positive level is reachable.
double fixed_layout_balance(const CMatrixd &H, const SarModeld &model, const RVectord &weights,
                            double noise_variance, double start_beta, double accuracy_db, int *solves = nullptr);

// Grid search with exact fixed-layout screening, then the winner re-solved by the
// two-layer solver with the position step skipped.
BaselineReport solve_aps(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const BaselineConfig &config, const Regiond &region);

// Fluid antenna scheme: two-layer solves with exact-SAR layout refinement from
// the best APS layouts (and the ULA), keeping the best. For balance the starts
// are compared at the APS optimum level and the winner seeds the bisection.
// `aps` may be passed to reuse an existing grid search.
BaselineReport solve_fas(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const BaselineConfig &config, const Regiond &region,
                         const std::optional<BaselineReport> &aps = std::nullopt);

// The two-layer algorithm alone from the ULA (no refinement, no multi-start).
BaselineReport solve_fas_from_ula(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                                  const Regiond &region);

} // namespace fasar

#endif // FASAR_BASELINES_HPP
