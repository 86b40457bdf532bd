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

#include "fasar/sinr_balance.hpp"

#include <chrono>
#include <cmath>

namespace fasar
{

void BalanceConfig::validate(Eigen::Index num_users) const
{
    if (!(accuracy_db > 0.0))
        throw ConfigError("bisection accuracy must be positive");
    if (lower_db && upper_db && !(*lower_db < *upper_db))
        throw ConfigError("bisection bracket must satisfy beta_l < beta_u");
    if (weights.size() != 0 && weights.size() != num_users)
        throw ConfigError("SINR weight count does not match the user count");
    if (weights.size() != 0 && (weights.array() <= 0.0).any())
        throw ConfigError("SINR weights must be positive");
    if (max_expansions < 0)
        throw ConfigError("max_expansions must be non-negative");
    solver.validate();
}

bool probe_within_budget(const SolveReport &report, double budget)
{
    return report.converged && report.feasibility.ok() && report.sar <= budget;
}

namespace
{

double achieved_level_db(const SolveReport &report)
{
    if (report.feasibility.sinr_slack.size() == 0)
        return -std::numeric_limits<double>::infinity();
    return to_db(report.beta0 * (1.0 + report.feasibility.sinr_slack.minCoeff()));
}

} // namespace

BalanceReport bisect_sinr_level(const SarOracle &oracle, double budget, double lower_db, double upper_db,
                                double accuracy_db, int max_expansions)
{
    if (!(lower_db < upper_db))
        throw ConfigError("bisection bracket must satisfy beta_l < beta_u");
    if (!(accuracy_db > 0.0))
        throw ConfigError("bisection accuracy must be positive");

    const auto clock_start = std::chrono::steady_clock::now();
    BalanceReport report;
    report.budget = budget;
    report.initial_lower_db = lower_db;
    report.initial_upper_db = upper_db;

    double best_db = -std::numeric_limits<double>::infinity();
    auto probe = [&](double level_db) {
        SolveReport s = oracle(from_db(level_db));
        const bool ok = probe_within_budget(s, budget);
        report.ladder.push_back(Probe{level_db, s.sar, s.converged, ok});
        if (!s.converged)
            report.nonconverged_probe = true;
        if (ok && level_db > best_db)
        {
            best_db = level_db;
            report.solution = std::move(s);
            report.solution_found = true;
        }
        return ok;
    };

    double lo = lower_db;
    double hi = upper_db;
    for (;;)
    {
        bool top_refuted = false;
        while (hi - lo > accuracy_db)
        {
            const double mid = 0.5 * (lo + hi);
            if (probe(mid))
                lo = mid;
            else
            {
                hi = mid;
                top_refuted = true;
            }
            ++report.bisection_steps;
        }
        if (top_refuted || !probe(hi))
            break;
        // beta_u itself is attainable: the bracket was too tight.
        lo = hi;
        if (report.expansions == max_expansions)
        {
            report.top_exit = true;
            break;
        }
        hi = lo + to_db(2.0);
        ++report.expansions;
    }

    if (!report.solution_found)
        probe(lo);

    for (const auto &a : report.ladder)
        for (const auto &b : report.ladder)
            if (a.within_budget && !b.within_budget && a.beta0_db > b.beta0_db)
                report.non_monotone = true;

    report.lower_db = lo;
    report.upper_db = hi;
    report.beta_db = lo;
    report.achieved_db = achieved_level_db(report.solution);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return report;
}

double default_upper_bracket(const ChannelRealizationd &channel, const SarModeld &model, const RVectord &weights,
                             const AntennaLayoutd &layout)
{
    const double lmin = model.min_positive_eigenvalue();
    if (!std::isfinite(lmin))
        throw ConfigError("SAR matrix has no positive eigenvalue");
    const CMatrixd H = channel_matrix(layout, channel);
    double best = 0.0;
    for (Eigen::Index k = 0; k < H.cols(); ++k)
        best = std::max(best, (model.budget() / lmin) * H.col(k).squaredNorm() /
                                  (channel.noise_variance * weights[k]));
    return 4.0 * best;
}

double default_lower_bracket(const ChannelRealizationd &channel, const SarModeld &model, const RVectord &weights,
                             const AntennaLayoutd &layout, double upper)
{
    const CMatrixd H = channel_matrix(layout, channel);
    const auto exact = optimal_fixed_layout_precoder(H, model, SinrTargets{upper, weights}, channel.noise_variance);
    if (!exact)
        return upper * 1e-6;
    const double sar = sar_value(*exact, model);
    if (!(sar > 0.0))
        return upper * 1e-6;
    return 0.5 * std::min(upper, upper * model.budget() / sar);
}

BalanceReport solve_sinr_balance(const ChannelRealizationd &channel, const SarModeld &model,
                                 const BalanceConfig &config, const Regiond &region,
                                 const std::optional<AntennaLayoutd> &initial_layout)
{
    channel.validate();
    config.validate(channel.num_users());
    const RVectord weights = config.weights.size() ? config.weights : RVectord::Ones(channel.num_users());
    const AntennaLayoutd layout = initial_layout ? *initial_layout : default_initial_layout(model.size(), region);

    const double upper_lin = config.upper_db ? from_db(*config.upper_db)
                                             : default_upper_bracket(channel, model, weights, layout);
    const double upper_db = to_db(upper_lin);
    const double lower_db = config.lower_db ? *config.lower_db
                                            : to_db(default_lower_bracket(channel, model, weights, layout, upper_lin));

    const SarOracle oracle = [&](double beta0) {
        return solve_sar_min(channel, SinrTargets{beta0, weights}, model, config.solver, region, layout);
    };
    return bisect_sinr_level(oracle, model.budget(), lower_db, upper_db, config.accuracy_db, config.max_expansions);
}

} // namespace fasar
