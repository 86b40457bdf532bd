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

#include <cmath>

#include "fasar/sinr_balance.hpp"
#include "test_util.hpp"

using namespace fasar;

namespace
{

const double kNoise = dbm_to_watts(-105.0);
const double kLambda = 0.01;

// A report that passes every feasibility check and costs `sar`.
SolveReport feasible_report(double beta0, double sar)
{
    SolveReport r;
    r.beta0 = beta0;
    r.sar = sar;
    r.converged = true;
    r.feasibility.sinr_slack = RVectord::Zero(2);
    r.feasibility.sinr_ok = true;
    r.feasibility.distance_ok = true;
    r.feasibility.inside_region = true;
    return r;
}

// SAR grows linearly with the level: the max-min level is budget / slope.
SarOracle linear_oracle(double slope)
{
    return [slope](double beta0) { return feasible_report(beta0, slope * beta0); };
}

BalanceConfig fixed_layout_config()
{
    BalanceConfig cfg;
    cfg.solver.optimize_positions = false;
    cfg.solver.record_inner_trace = false;
    return cfg;
}

} // namespace

TEST(Bisection, StepCountAndAccuracy)
{
    const double slope = 2e-13;
    const double budget = 1.6;
    const double truth_db = to_db(budget / slope);
    for (double eps : {1e-1, 1e-2, 1e-4})
    {
        const double lo = 100.0, hi = 150.0;
        const BalanceReport r = bisect_sinr_level(linear_oracle(slope), budget, lo, hi, eps, 3);
        EXPECT_EQ(r.bisection_steps, static_cast<int>(std::ceil(std::log2((hi - lo) / eps))));
        EXPECT_LE(r.upper_db - r.lower_db, eps);
        EXPECT_LE(r.lower_db, truth_db);
        EXPECT_GE(r.upper_db, truth_db);
        EXPECT_NEAR(r.beta_db, truth_db, eps);
        EXPECT_TRUE(r.solution_found);
        EXPECT_FALSE(r.non_monotone);
        EXPECT_FALSE(r.top_exit);
        EXPECT_EQ(r.expansions, 0);
    }
}

TEST(Bisection, LadderRespectsBracketInvariant)
{
    const BalanceReport r = bisect_sinr_level(linear_oracle(1e-12), 1.0, 90.0, 140.0, 1e-3, 3);
    // every accepted probe lies below every rejected one
    double max_ok = -1e300, min_bad = 1e300;
    for (const auto &p : r.ladder)
    {
        if (p.within_budget)
            max_ok = std::max(max_ok, p.beta0_db);
        else
            min_bad = std::min(min_bad, p.beta0_db);
        EXPECT_EQ(p.within_budget, p.sar <= 1.0);
    }
    EXPECT_LT(max_ok, min_bad);
    EXPECT_EQ(max_ok, r.lower_db);
    EXPECT_EQ(min_bad, r.upper_db);
}

TEST(Bisection, ExpandsWhenTopIsFeasible)
{
    const double truth_db = to_db(1.0 / 1e-12); // 120 dB
    const BalanceReport r = bisect_sinr_level(linear_oracle(1e-12), 1.0, 110.0, 116.0, 1e-3, 3);
    EXPECT_EQ(r.expansions, 2); // 116 -> 119.01 -> 122.04
    EXPECT_FALSE(r.top_exit);
    EXPECT_NEAR(r.beta_db, truth_db, 1e-3);
}

TEST(Bisection, TopExitWhenAlwaysFeasible)
{
    const BalanceReport r =
        bisect_sinr_level([](double b) { return feasible_report(b, 0.0); }, 1.0, 10.0, 20.0, 1e-2, 2);
    EXPECT_TRUE(r.top_exit);
    EXPECT_EQ(r.expansions, 2);
    EXPECT_NEAR(r.beta_db, 20.0 + 2 * to_db(2.0), 1e-12);
}

TEST(Bisection, NothingFeasible)
{
    const BalanceReport r =
        bisect_sinr_level([](double b) { return feasible_report(b, 10.0); }, 1.0, 10.0, 20.0, 1e-2, 2);
    EXPECT_FALSE(r.solution_found);
    EXPECT_NEAR(r.beta_db, 10.0, 0.0);
}

TEST(Bisection, NonConvergedProbesCountAsOverBudget)
{
    const SarOracle oracle = [](double b) {
        SolveReport s = feasible_report(b, 1e-13 * b);
        s.converged = to_db(b) < 125.0; // fails above 125 dB although cheap
        return s;
    };
    const BalanceReport r = bisect_sinr_level(oracle, 1.0, 100.0, 140.0, 1e-3, 0);
    EXPECT_TRUE(r.nonconverged_probe);
    EXPECT_NEAR(r.beta_db, 125.0, 1e-3);
}

TEST(Bisection, RejectsBadBracket)
{
    EXPECT_THROW(bisect_sinr_level(linear_oracle(1.0), 1.0, 20.0, 10.0, 1e-3, 0), ConfigError);
    EXPECT_THROW(bisect_sinr_level(linear_oracle(1.0), 1.0, 10.0, 20.0, 0.0, 0), ConfigError);
}

TEST(Brackets, UpperScalarFormula)
{
    const auto ch = sample_channel<double>(3, 1, 1, 15, kNoise, kLambda);
    const SarModeld model(CMatrixd::Constant(1, 1, 2.5), 1.6);
    const Regiond region(1.0, kLambda);
    const AntennaLayoutd layout = default_initial_layout(1, region);
    const double h2 = channel_vector(layout, ch.users[0], kLambda).squaredNorm();
    const double expected = 4.0 * (1.6 / 2.5) * h2 / kNoise;
    EXPECT_NEAR(default_upper_bracket(ch, model, RVectord::Ones(1), layout), expected, 1e-12 * expected);
}

TEST(Brackets, EnclosesTheOptimumAtTheStartLayout)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const AntennaLayoutd layout = default_initial_layout(4, region);
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        const auto ch = sample_channel<double>(seed, 4, 4, 15, kNoise, kLambda);
        const RVectord w = RVectord::Ones(4);
        const double upper = default_upper_bracket(ch, model, w, layout);
        const double lower = default_lower_bracket(ch, model, w, layout, upper);
        const CMatrixd H = channel_matrix(layout, ch);
        const auto top = optimal_fixed_layout_precoder(H, model, SinrTargets{upper, w}, kNoise);
        if (top)
            EXPECT_GT(sar_value(*top, model), model.budget());
        const auto bottom = optimal_fixed_layout_precoder(H, model, SinrTargets{lower, w}, kNoise);
        ASSERT_TRUE(bottom.has_value());
        EXPECT_LE(sar_value(*bottom, model), model.budget());
    }
}

TEST(SolveSinrBalance, FixedLayoutMatchesExactLevel)
{
    // with positions frozen the oracle is exact and the answer is the level at which the
    // fixed-layout minimum SAR meets the budget
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
    {
        const auto ch = sample_channel<double>(seed, 4, 4, 15, kNoise, kLambda);
        const BalanceConfig cfg = fixed_layout_config();
        const BalanceReport r = solve_sinr_balance(ch, model, cfg, region);
        ASSERT_TRUE(r.solution_found);
        EXPECT_FALSE(r.non_monotone);
        EXPECT_FALSE(r.top_exit);
        EXPECT_LE(r.solution.sar, model.budget() + 1e-9);
        EXPECT_GE(r.achieved_db, r.beta_db - 1e-5);
        const CMatrixd H = channel_matrix(default_initial_layout(4, region), ch);
        const auto at = [&](double db) {
            return sar_value(*optimal_fixed_layout_precoder(H, model, SinrTargets::uniform(4, from_db(db)), kNoise),
                             model);
        };
        EXPECT_LE(at(r.lower_db), model.budget());
        EXPECT_GT(at(r.upper_db), model.budget());
    }
}

TEST(SolveSinrBalance, RoundTripThroughSarMin)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
    {
        const auto ch = sample_channel<double>(seed, 4, 4, 15, kNoise, kLambda);
        BalanceConfig cfg;
        cfg.solver.record_inner_trace = false;
        const double beta0_db = 135.0;
        const SolveReport p3 = solve_sar_min(ch, SinrTargets::uniform(4, from_db(beta0_db)), model, cfg.solver, region);
        ASSERT_TRUE(p3.converged);
        const BalanceReport r = solve_sinr_balance(ch, model.with_budget(p3.sar), cfg, region);
        EXPECT_LE(std::abs(r.beta_db - beta0_db), 2 * cfg.accuracy_db) << "seed " << seed;
    }
}

TEST(SolveSinrBalance, LevelGrowsWithBudgetButAtMostLinearly)
{
    const auto model = default_sar_model<double>(4, 1.6);
    const Regiond region(1.0, kLambda);
    const BalanceConfig cfg = fixed_layout_config();
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
    {
        const auto ch = sample_channel<double>(seed, 4, 4, 15, kNoise, kLambda);
        const double high = solve_sinr_balance(ch, model, cfg, region).beta_db;
        const double low = solve_sinr_balance(ch, model.with_budget(0.4), cfg, region).beta_db;
        const double tiny = solve_sinr_balance(ch, model.with_budget(1.6e-6), cfg, region).beta_db;
        EXPECT_GT(high, low);
        // SAR / beta is nondecreasing, so a 4x budget buys at most 6.02 dB
        EXPECT_LE(high - low, to_db(4.0) + 2 * cfg.accuracy_db);
        EXPECT_GE(high - tiny, 60.0 - 2 * cfg.accuracy_db);
    }
}

TEST(BalanceConfig, Validation)
{
    BalanceConfig cfg;
    cfg.accuracy_db = 0.0;
    EXPECT_THROW(cfg.validate(4), ConfigError);
    cfg = BalanceConfig{};
    cfg.lower_db = 130.0;
    cfg.upper_db = 120.0;
    EXPECT_THROW(cfg.validate(4), ConfigError);
    cfg = BalanceConfig{};
    cfg.weights = RVectord::Ones(3);
    EXPECT_THROW(cfg.validate(4), ConfigError);
    cfg.weights = RVectord::Ones(4);
    cfg.weights[2] = -1.0;
    EXPECT_THROW(cfg.validate(4), ConfigError);
}
