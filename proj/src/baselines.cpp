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

#include "fasar/baselines.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace fasar
{

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

RVectord weights_or_ones(const RVectord &weights, Eigen::Index num_users)
{
    return weights.size() ? weights : RVectord::Ones(num_users);
}

double achieved_db(const ChannelRealizationd &channel, const AntennaLayoutd &layout, const Precoderd &P,
                   const RVectord &weights)
{
    const double v = min_weighted_sinr(channel_matrix(layout, channel), P, channel.noise_variance, weights);
    return v > 0.0 ? to_db(v) : -inf;
}

BaselineReport from_solve(std::string scheme, SolveReport solve)
{
    BaselineReport out;
    out.scheme = std::move(scheme);
    out.objective = Objective::sar_min;
    out.value = solve.sar;
    out.sar = solve.sar;
    out.precoder = solve.precoder;
    out.layout = solve.layout;
    if (solve.feasibility.sinr_slack.size())
        out.achieved_db = to_db(solve.beta0 * (1.0 + solve.feasibility.sinr_slack.minCoeff()));
    out.solve = std::move(solve);
    return out;
}

BaselineReport from_balance(std::string scheme, BalanceReport balance)
{
    BaselineReport out;
    out.scheme = std::move(scheme);
    out.objective = Objective::balance;
    out.value = balance.beta_db;
    out.sar = balance.solution.sar;
    out.achieved_db = balance.achieved_db;
    out.precoder = balance.solution.precoder;
    out.layout = balance.solution.layout;
    out.balance = std::move(balance);
    return out;
}

AntennaLayoutd layout_from(const std::vector<Point2d> &grid, const std::vector<int> &indices)
{
    Positions<double> pos(2, static_cast<Eigen::Index>(indices.size()));
    for (std::size_t m = 0; m < indices.size(); ++m)
        pos.col(static_cast<Eigen::Index>(m)) = grid[static_cast<std::size_t>(indices[m])];
    return AntennaLayoutd(std::move(pos));
}

// Ranks candidates by (value, combination order) and keeps the first `keep`.
std::vector<std::size_t> rank_candidates(const std::vector<double> &values, std::size_t keep)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (order.size() > keep)
        order.resize(keep);
    return order;
}

} // namespace

std::string to_string(Objective objective)
{
    return objective == Objective::sar_min ? "sar-min" : "balance";
}

Objective objective_from_string(const std::string &name)
{
    if (name == "sar-min")
        return Objective::sar_min;
    if (name == "balance" || name == "sinr-balance")
        return Objective::balance;
    throw ConfigError("unknown objective '" + name + "'");
}

void BaselineConfig::validate() const
{
    if (!(power_budget > 0.0))
        throw ConfigError("power budget must be positive");
    if (!(grid_spacing_wl > 0.0))
        throw ConfigError("APS grid spacing must be positive");
    if (aps_cap < 1)
        throw ConfigError("APS cap must be at least 1");
    if (fas_starts < 0)
        throw ConfigError("fas_starts must be non-negative");
}

SinrTargets Problem::targets(Eigen::Index num_users) const
{
    return SinrTargets{beta0, weights_or_ones(balance.weights, num_users)};
}

SarModeld power_model(Eigen::Index num_antennas, double power_budget)
{
    return SarModeld(CMatrixd::Identity(num_antennas, num_antennas), power_budget, false);
}

BaselineReport solve_without_sar(const ChannelRealizationd &channel, const Eigen::Index num_antennas,
                                 const BaselineConfig &config, const BalanceConfig &balance, const Regiond &region)
{
    config.validate();
    return from_balance("no-sar", solve_sinr_balance(channel, power_model(num_antennas, config.power_budget),
                                                     balance, region));
}

double backoff_factor(double budget, double sar)
{
    if (!(sar > 0.0))
        return 1.0;
    return std::min(1.0, budget / sar);
}

BaselineReport adaptive_backoff(const BaselineReport &without_sar, const ChannelRealizationd &channel,
                                const SarModeld &model, const RVectord &weights)
{
    BaselineReport out;
    out.scheme = "backoff";
    out.objective = Objective::balance;
    out.layout = without_sar.layout;
    out.unscaled_sar = sar_value(without_sar.precoder, model);
    out.backoff_factor = backoff_factor(model.budget(), out.unscaled_sar);
    out.precoder = out.backoff_factor * without_sar.precoder;
    out.sar = sar_value(out.precoder, model);
    out.achieved_db =
        achieved_db(channel, out.layout, out.precoder, weights_or_ones(weights, channel.num_users()));
    out.value = out.achieved_db;
    return out;
}

BaselineReport adaptive_backoff(const ChannelRealizationd &channel, const SarModeld &model,
                                const BaselineConfig &config, const BalanceConfig &balance, const Regiond &region)
{
    const BaselineReport bar = solve_without_sar(channel, model.size(), config, balance, region);
    return adaptive_backoff(bar, channel, model, balance.weights);
}

BaselineReport solve_fpa(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const Regiond &region)
{
    const AntennaLayoutd ula = centered_ula(model.size(), 0.5 * region.wavelength, region);
    if (problem.objective == Objective::sar_min)
    {
        SolverConfig solver = problem.balance.solver;
        solver.optimize_positions = false;
        return from_solve("fpa", solve_sar_min(channel, problem.targets(channel.num_users()), model, solver, region,
                                               ula));
    }
    BalanceConfig balance = problem.balance;
    balance.solver.optimize_positions = false;
    return from_balance("fpa", solve_sinr_balance(channel, model, balance, region, ula));
}

std::vector<Point2d> aps_grid(const Regiond &region, double spacing)
{
    if (!(spacing > 0.0))
        throw ConfigError("APS grid spacing must be positive");
    const double a = region.half_extent();
    const auto n = static_cast<int>(std::floor(2.0 * a / spacing * (1.0 + 1e-12))) + 1;
    std::vector<Point2d> grid;
    grid.reserve(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            grid.emplace_back(std::min(a, -a + spacing * i), std::min(a, -a + spacing * j));
    return grid;
}

double combinations(std::size_t n, std::size_t k)
{
    if (k > n)
        return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i)
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

std::vector<std::vector<int>> aps_combinations(std::size_t grid_points, std::size_t num_antennas, std::size_t cap,
                                               std::uint64_t seed, bool *subsampled)
{
    if (num_antennas < 1 || num_antennas > grid_points)
        throw ConfigError("the APS grid has fewer points than antennas");
    const double total = combinations(grid_points, num_antennas);
    const auto n = static_cast<int>(grid_points);
    const auto M = static_cast<int>(num_antennas);
    std::vector<std::vector<int>> out;

    if (total <= static_cast<double>(cap))
    {
        if (subsampled)
            *subsampled = false;
        out.reserve(static_cast<std::size_t>(total));
        std::vector<int> c(num_antennas);
        std::iota(c.begin(), c.end(), 0);
        for (;;)
        {
            out.push_back(c);
            int i = M - 1;
            while (i >= 0 && c[static_cast<std::size_t>(i)] == n - M + i)
                --i;
            if (i < 0)
                break;
            ++c[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < M; ++j)
                c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
        }
        return out;
    }

    if (subsampled)
        *subsampled = true;
    // Floyd's algorithm gives a uniform M-subset per draw; duplicates are rejected.
    std::mt19937_64 rng(seed);
    std::set<std::vector<int>> chosen;
    while (chosen.size() < cap)
    {
        std::set<int> subset;
        for (int j = n - M; j < n; ++j)
        {
            const int t = std::uniform_int_distribution<int>(0, j)(rng);
            if (!subset.insert(t).second)
                subset.insert(j);
        }
        chosen.emplace(subset.begin(), subset.end());
    }
    out.assign(chosen.begin(), chosen.end());
    return out;
}

std::optional<double> fixed_layout_sar(const CMatrixd &H, const SarModeld &model, const SinrTargets &targets,
                                       double noise_variance)
{
    const auto P = optimal_fixed_layout_precoder(H, model, targets, noise_variance);
    if (!P)
        return std::nullopt;
    return sar_value(*P, model);
}

double fixed_layout_balance(const CMatrixd &H, const SarModeld &model, const RVectord &weights,
                            double noise_variance, double start_beta, double accuracy_db, int *solves)
{
    if (!(start_beta > 0.0) || !(accuracy_db > 0.0))
        throw ConfigError("fixed-layout balance needs a positive start level and accuracy");
    const double budget = model.budget();
    const double nudge = std::pow(10.0, accuracy_db / 20.0); // half the accuracy, in dB
    auto sar_at = [&](double beta) {
        if (solves)
            ++*solves;
        const auto s = fixed_layout_sar(H, model, SinrTargets{beta, weights}, noise_variance);
        return s ? *s : inf;
    };

    double lo = 0.0;
    double hi = inf;
    double beta = start_beta;
    for (int it = 0; it < 200; ++it)
    {
        const double s = sar_at(beta);
        if (s <= budget)
            lo = std::max(lo, beta);
        else
            hi = std::min(hi, beta);
        if (lo > 0.0 && hi < inf && to_db(hi / lo) <= accuracy_db)
            break;

        double next;
        if (!std::isfinite(s))
            next = lo > 0.0 ? std::sqrt(lo * beta) : beta / 10.0;
        else if (s <= budget)
            next = (s > 0.0 ? budget * beta / s : 10.0 * beta) * nudge;
        else
            next = budget * beta / s / nudge;
        if (lo > 0.0 && hi < inf && !(next > lo && next < hi))
            next = std::sqrt(lo * hi);
        if (lo == 0.0 && next < 1e-300)
            break;
        beta = next;
    }
    return lo;
}

BaselineReport solve_aps(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const BaselineConfig &config, const Regiond &region)
{
    config.validate();
    channel.validate();
    const Eigen::Index M = model.size();
    const double min_distance = problem.balance.solver.min_distance_wl * region.wavelength;
    const double spacing = config.grid_spacing_wl * region.wavelength;
    const RVectord weights = weights_or_ones(problem.balance.weights, channel.num_users());

    ApsSearch search;
    const std::vector<Point2d> grid = aps_grid(region, spacing);
    search.grid_points = grid.size();
    search.total_combinations = combinations(grid.size(), static_cast<std::size_t>(M));
    const auto combos =
        aps_combinations(grid.size(), static_cast<std::size_t>(M), config.aps_cap, config.seed, &search.subsampled);
    search.evaluated = combos.size();
    search.coverage = static_cast<double>(combos.size()) / search.total_combinations;

    // Channel matrices of spacing-feasible layouts; infeasible ones are left empty.
    std::vector<CMatrixd> H(combos.size());
    for (std::size_t c = 0; c < combos.size(); ++c)
    {
        const AntennaLayoutd layout = layout_from(grid, combos[c]);
        if (M > 1 && layout.min_pairwise_distance() < min_distance - 1e-12)
        {
            ++search.spacing_violations;
            continue;
        }
        H[c] = channel_matrix(layout, channel);
    }

    auto screen = [&](const SinrTargets &targets) {
        std::vector<double> values(combos.size(), inf);
        for (std::size_t c = 0; c < combos.size(); ++c)
            if (H[c].size())
            {
                ++search.exact_solves;
                if (auto s = fixed_layout_sar(H[c], model, targets, channel.noise_variance))
                    values[c] = *s;
            }
        return values;
    };

    const auto keep = static_cast<std::size_t>(std::max(1, config.fas_starts));
    std::size_t winner = 0;
    std::vector<double> values;
    if (problem.objective == Objective::sar_min)
    {
        values = screen(problem.targets(channel.num_users()));
        winner = rank_candidates(values, 1).front();
        if (!std::isfinite(values[winner]))
            throw SolverError("no APS layout reaches the SINR targets");
    }
    else
    {
        // Screen at a reference level, then visit layouts by SAR(beta_ref) / beta_ref.
        // Since SAR(beta) / beta is nondecreasing, a layout whose ratio times the best
        // level found so far exceeds Q0 cannot beat it once that level is >= beta_ref.
        const double accuracy = problem.balance.accuracy_db;
        const double budget = model.budget();
        int solves = 0;
        double reference;
        try
        {
            const CMatrixd Hu = channel_matrix(centered_ula(M, 0.5 * region.wavelength, region), channel);
            reference = fixed_layout_balance(Hu, model, weights, channel.noise_variance,
                                             default_upper_bracket(channel, model, weights,
                                                                   centered_ula(M, 0.5 * region.wavelength, region)),
                                             accuracy, &solves);
        }
        catch (const ConfigError &)
        {
            reference = 0.0;
        }
        if (!(reference > 0.0))
        {
            const AntennaLayoutd first = layout_from(grid, combos.front());
            reference = fixed_layout_balance(H.front().size() ? H.front() : channel_matrix(first, channel), model,
                                             weights, channel.noise_variance,
                                             default_upper_bracket(channel, model, weights, first), accuracy,
                                             &solves);
        }
        if (!(reference > 0.0))
            throw SolverError("APS could not find a positive SINR level");

        double best = 0.0;
        bool found = false;
        for (int pass = 0; pass < 2; ++pass)
        {
            values = screen(SinrTargets{reference, weights});
            for (auto &v : values)
                v /= reference;
            const auto order = rank_candidates(values, values.size());
            bool rescreen = false;
            for (const std::size_t c : order)
            {
                const double r = values[c];
                if (!std::isfinite(r))
                    break;
                if (best >= reference && r * best > budget)
                    break;
                const double level =
                    fixed_layout_balance(H[c], model, weights, channel.noise_variance, budget / r, accuracy, &solves);
                if (level > best)
                {
                    best = level;
                    winner = c;
                    found = true;
                }
                if (best < reference && pass == 0)
                {
                    rescreen = true;
                    break;
                }
            }
            if (!rescreen)
                break;
            reference = best;
        }
        search.exact_solves += static_cast<std::size_t>(solves);
        if (!found)
            throw SolverError("APS could not find a positive SINR level");
        search.reference_beta = reference;
    }

    search.winner = combos[winner];
    std::vector<std::size_t> ranked = rank_candidates(values, keep + 1);
    search.ranked.push_back(layout_from(grid, combos[winner]));
    search.ranked_values.push_back(values[winner]);
    for (const std::size_t c : ranked)
        if (c != winner && search.ranked.size() < keep && std::isfinite(values[c]))
        {
            search.ranked.push_back(layout_from(grid, combos[c]));
            search.ranked_values.push_back(values[c]);
        }

    Problem fixed = problem;
    fixed.balance.solver.optimize_positions = false;
    BaselineReport out;
    if (problem.objective == Objective::sar_min)
    {
        out = from_solve("aps", solve_sar_min(channel, fixed.targets(channel.num_users()), model, fixed.balance.solver,
                                              region, search.ranked.front()));
    }
    else
    {
        out = from_balance("aps", solve_sinr_balance(channel, model, fixed.balance, region, search.ranked.front()));
    }
    out.aps = std::move(search);
    return out;
}

BaselineReport solve_fas(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                         const BaselineConfig &config, const Regiond &region,
                         const std::optional<BaselineReport> &aps)
{
    config.validate();
    const BaselineReport grid = aps ? *aps : solve_aps(channel, model, problem, config, region);
    if (!grid.aps)
        throw ConfigError("solve_fas needs an APS report");

    std::vector<AntennaLayoutd> starts;
    for (std::size_t i = 0; i < grid.aps->ranked.size() && static_cast<int>(i) < config.fas_starts; ++i)
        starts.push_back(grid.aps->ranked[i]);
    if (config.fas_include_ula)
    {
        try
        {
            starts.push_back(centered_ula(model.size(), 0.5 * region.wavelength, region));
        }
        catch (const ConfigError &)
        {
        }
    }
    if (starts.empty())
        throw ConfigError("fluid antenna scheme has no starting layout");

    SolverConfig solver = problem.balance.solver;
    solver.optimize_positions = true;
    solver.refine_layout = true;

    // For balance the starts compete at the APS optimum level.
    SinrTargets targets = problem.targets(channel.num_users());
    if (problem.objective == Objective::balance)
        targets.beta0 = from_db(grid.value);

    std::optional<SolveReport> best;
    int best_index = -1;
    for (std::size_t i = 0; i < starts.size(); ++i)
    {
        SolveReport r = solve_sar_min(channel, targets, model, solver, region, starts[i]);
        const bool usable = r.feasibility.ok() && r.polished;
        if (usable && (!best || r.sar < best->sar))
        {
            best = std::move(r);
            best_index = static_cast<int>(i);
        }
    }
    if (!best)
        throw SolverError("no fluid antenna start produced a feasible solution");

    BaselineReport out;
    if (problem.objective == Objective::sar_min)
    {
        out = from_solve("fas", std::move(*best));
    }
    else
    {
        BalanceConfig balance = problem.balance;
        balance.solver = solver;
        out = from_balance("fas", solve_sinr_balance(channel, model, balance, region, best->layout));
    }
    out.starts = static_cast<int>(starts.size());
    out.best_start = best_index;
    return out;
}

BaselineReport solve_fas_from_ula(const ChannelRealizationd &channel, const SarModeld &model, const Problem &problem,
                                  const Regiond &region)
{
    BaselineReport out;
    if (problem.objective == Objective::sar_min)
        out = from_solve("fas-ula", solve_sar_min(channel, problem.targets(channel.num_users()), model,
                                                  problem.balance.solver, region));
    else
        out = from_balance("fas-ula", solve_sinr_balance(channel, model, problem.balance, region));
    out.starts = 1;
    out.best_start = 0;
    return out;
}

} // namespace fasar
