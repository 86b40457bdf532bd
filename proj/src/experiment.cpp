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

#include "fasar/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "fasar/io.hpp"

namespace fasar
{

namespace
{

const std::vector<std::string> &scheme_names()
{
    static const std::vector<std::string> names = {"fas", "fas-ula", "aps", "fpa", "no-sar", "backoff"};
    return names;
}

std::string format_number(const char *fmt, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void fill_metrics(TrialResult &out, const BaselineReport &r, const ChannelRealizationd &channel,
                  const SarModeld &model, const Problem &problem, const Regiond &region)
{
    out.value = r.value;
    out.sar = r.sar;
    out.achieved_db = r.achieved_db;
    out.budget = model.budget();
    out.layout = r.layout;
    out.min_distance = r.layout.size() > 1 ? r.layout.min_pairwise_distance() : 0.0;
    out.inside_region = r.layout.inside(region, 1e-12);

    const RVectord weights =
        problem.balance.weights.size() ? problem.balance.weights : RVectord::Ones(channel.num_users());
    const double level = problem.objective == Objective::sar_min ? problem.beta0 : from_db(r.value);
    out.min_sinr_ratio =
        min_weighted_sinr(channel_matrix(r.layout, channel), r.precoder, channel.noise_variance, weights) / level;

    if (r.solve)
    {
        out.converged = r.solve->converged;
        out.outer_iterations = r.solve->outer_iterations;
    }
    else if (r.balance)
    {
        out.converged = r.balance->solution.converged;
        out.outer_iterations = r.balance->solution.outer_iterations;
        if (!r.balance->solution_found)
            throw SolverError("no probe of the bisection stayed within budget");
    }
    else
    {
        out.converged = true;
    }
}

} // namespace

std::string to_string(SweepVariable variable)
{
    switch (variable)
    {
    case SweepVariable::budget:
        return "Q0";
    case SweepVariable::beta0:
        return "beta0_db";
    case SweepVariable::region:
        return "A";
    case SweepVariable::paths:
        return "L";
    case SweepVariable::scheme:
        return "scheme";
    }
    return "?";
}

SweepVariable sweep_variable_from_string(const std::string &name)
{
    if (name == "Q0" || name == "budget")
        return SweepVariable::budget;
    if (name == "beta0" || name == "beta0_db")
        return SweepVariable::beta0;
    if (name == "A" || name == "region")
        return SweepVariable::region;
    if (name == "L" || name == "paths")
        return SweepVariable::paths;
    if (name == "scheme")
        return SweepVariable::scheme;
    throw ConfigError("unknown sweep variable '" + name + "'");
}

bool known_scheme(const std::string &name)
{
    for (const auto &s : scheme_names())
        if (s == name)
            return true;
    return false;
}

std::size_t ExperimentPlan::num_points() const
{
    return sweep == SweepVariable::scheme ? scheme_values.size() : values.size();
}

void ExperimentPlan::validate() const
{
    if (trials < 1)
        throw ConfigError("trials must be at least 1");
    if (num_points() == 0)
        throw ConfigError("the sweep value list is empty");
    const auto &list = sweep == SweepVariable::scheme ? scheme_values : schemes;
    if (list.empty())
        throw ConfigError("the scheme list is empty");
    for (const auto &s : list)
    {
        if (!known_scheme(s))
            throw ConfigError("unknown scheme '" + s + "'");
        if ((s == "no-sar" || s == "backoff") && objective != Objective::balance)
            throw ConfigError("scheme '" + s + "' only applies to the balance objective");
    }
    if (scenario.antennas < 1 || scenario.users < 1 || scenario.paths < 1)
        throw ConfigError("scenario needs M, K, L >= 1");
    for (std::size_t p = 0; p < num_points(); ++p)
    {
        const Scenario s = scenario_at(*this, p);
        if (!(s.half_width > 0.0) || !(s.budget > 0.0) || !(s.wavelength > 0.0) || s.paths < 1)
            throw ConfigError("sweep value " + sweep_value_label(*this, p) + " gives an invalid scenario");
    }
    balance.validate(scenario.users);
    baseline.validate();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(master);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

Scenario scenario_at(const ExperimentPlan &plan, std::size_t point)
{
    Scenario s = plan.scenario;
    if (plan.sweep == SweepVariable::scheme)
        return s;
    const double v = plan.values.at(point);
    switch (plan.sweep)
    {
    case SweepVariable::budget:
        s.budget = v;
        break;
    case SweepVariable::beta0:
        s.beta0_db = v;
        break;
    case SweepVariable::region:
        s.half_width = v;
        break;
    case SweepVariable::paths:
        s.paths = static_cast<int>(std::lround(v));
        break;
    case SweepVariable::scheme:
        break;
    }
    return s;
}

std::string sweep_value_label(const ExperimentPlan &plan, std::size_t point)
{
    if (plan.sweep == SweepVariable::scheme)
        return plan.scheme_values.at(point);
    return format_number("%.10g", plan.values.at(point));
}

SarModeld build_sar_model(const std::string &name, int antennas, double budget)
{
    if (name == "paper4")
    {
        if (antennas != 4)
            throw ConfigError("the published SAR matrix is 4x4; use synthetic:<seed> for M != 4");
        return SarModeld(paper_sar_matrix<double>(), budget, false);
    }
    if (name == "default")
        return default_sar_model<double>(antennas, budget);
    if (name.rfind("synthetic", 0) == 0)
    {
        std::uint64_t seed = 0;
        if (name.size() > 10 && name[9] == ':')
            seed = std::stoull(name.substr(10));
        return SarModeld(synthesize_sar_matrix<double>(antennas, seed), budget, true);
    }
    if (name.rfind("file:", 0) == 0)
    {
        const SarModeld loaded = sar_model_from_json(read_json_file(name.substr(5)));
        if (loaded.size() != antennas)
            throw ConfigError("SAR matrix file size does not match the antenna count");
        return loaded.with_budget(budget);
    }
    throw ConfigError("unknown SAR model '" + name + "'");
}

std::vector<TrialResult> run_trial(const ExperimentPlan &plan, std::size_t point, int trial)
{
    const Scenario sc = scenario_at(plan, point);
    const std::uint64_t channel_seed = derive_seed(plan.master_seed, plan.common_channels ? 0 : point + 1,
                                                   static_cast<std::uint64_t>(trial), 1);
    std::vector<std::string> schemes =
        plan.sweep == SweepVariable::scheme ? std::vector<std::string>{plan.scheme_values.at(point)} : plan.schemes;

    std::vector<TrialResult> results;
    for (const auto &s : schemes)
    {
        TrialResult r;
        r.point = point;
        r.trial = trial;
        r.scheme = s;
        r.channel_seed = channel_seed;
        results.push_back(std::move(r));
    }

    try
    {
        const Regiond region(sc.half_width, sc.wavelength);
        const ChannelRealizationd channel =
            sample_channel<double>(channel_seed, sc.antennas, sc.users, sc.paths, dbm_to_watts(sc.noise_dbm),
                                   sc.wavelength);
        const SarModeld model = build_sar_model(sc.sar, sc.antennas, sc.budget);
        Problem problem;
        problem.objective = plan.objective;
        problem.beta0 = from_db(sc.beta0_db);
        problem.balance = plan.balance;
        problem.balance.solver.record_inner_trace = false;
        BaselineConfig baseline = plan.baseline;
        baseline.seed = derive_seed(plan.master_seed, point + 1, static_cast<std::uint64_t>(trial), 2);

        std::optional<BaselineReport> aps;
        std::optional<BaselineReport> no_sar;
        for (auto &r : results)
        {
            const auto start = std::chrono::steady_clock::now();
            try
            {
                BaselineReport out;
                if (r.scheme == "aps" || r.scheme == "fas")
                {
                    if (!aps)
                        aps = solve_aps(channel, model, problem, baseline, region);
                }
                if (r.scheme == "no-sar" || r.scheme == "backoff")
                {
                    if (!no_sar)
                        no_sar = solve_without_sar(channel, model.size(), baseline, problem.balance, region);
                }

                if (r.scheme == "fas")
                    out = solve_fas(channel, model, problem, baseline, region, aps);
                else if (r.scheme == "fas-ula")
                    out = solve_fas_from_ula(channel, model, problem, region);
                else if (r.scheme == "aps")
                    out = *aps;
                else if (r.scheme == "fpa")
                    out = solve_fpa(channel, model, problem, region);
                else if (r.scheme == "no-sar")
                    out = *no_sar;
                else if (r.scheme == "backoff")
                    out = adaptive_backoff(*no_sar, channel, model, problem.balance.weights);

                // no-sar is budgeted by transmit power, not SAR.
                const SarModeld &reference = r.scheme == "no-sar" ? power_model(model.size(), baseline.power_budget)
                                                                   : model;
                fill_metrics(r, out, channel, reference, problem, region);
                if (r.scheme == "no-sar")
                    r.sar = sar_value(out.precoder, model);
                r.ok = std::isfinite(r.value);
                if (!r.ok)
                    r.error = "non-finite result";
            }
            catch (const std::exception &e)
            {
                r.ok = false;
                r.error = e.what();
            }
            r.wall_time_s = elapsed_since(start);
        }
    }
    catch (const std::exception &e)
    {
        for (auto &r : results)
        {
            r.ok = false;
            r.error = e.what();
        }
    }
    return results;
}

std::vector<Aggregate> aggregate(const ExperimentPlan &plan, const std::vector<TrialResult> &trials)
{
    std::vector<Aggregate> out;
    for (std::size_t p = 0; p < plan.num_points(); ++p)
    {
        const std::vector<std::string> schemes =
            plan.sweep == SweepVariable::scheme ? std::vector<std::string>{plan.scheme_values[p]} : plan.schemes;
        for (const auto &s : schemes)
        {
            Aggregate a;
            a.point = p;
            a.sweep_value = sweep_value_label(plan, p);
            a.scheme = s;
            double sum = 0.0;
            std::vector<double> v;
            for (const auto &t : trials)
                if (t.point == p && t.scheme == s)
                {
                    if (t.ok)
                    {
                        v.push_back(t.value);
                        sum += t.value;
                    }
                    else
                    {
                        ++a.failures;
                    }
                }
            a.trials = static_cast<int>(v.size());
            if (!v.empty())
            {
                a.mean = sum / static_cast<double>(v.size());
                if (v.size() > 1)
                {
                    double ss = 0.0;
                    for (double x : v)
                        ss += (x - a.mean) * (x - a.mean);
                    a.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
                }
            }
            else
            {
                a.mean = std::numeric_limits<double>::quiet_NaN();
                a.stderr_ = std::numeric_limits<double>::quiet_NaN();
            }
            out.push_back(std::move(a));
        }
    }
    return out;
}

int resolve_threads(int requested)
{
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1)
        n = 1;
    if (const char *env = std::getenv("FAS_THREADS"))
    {
        const int cap = std::atoi(env);
        if (cap >= 1)
            n = std::min(n, cap);
    }
    return n;
}

RunRecord run_sweep(const ExperimentPlan &plan)
{
    plan.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t jobs = plan.num_points() * static_cast<std::size_t>(plan.trials);
    std::vector<std::vector<TrialResult>> slots(jobs);

    const int threads = std::max(1, std::min<int>(resolve_threads(plan.threads), static_cast<int>(jobs)));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t j = next++; j < jobs; j = next++)
        {
            const std::size_t point = j / static_cast<std::size_t>(plan.trials);
            const int trial = static_cast<int>(j % static_cast<std::size_t>(plan.trials));
            slots[j] = run_trial(plan, point, trial);
        }
    };
    if (threads == 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }

    RunRecord record;
    record.plan = plan;
    record.threads_used = threads;
    for (auto &slot : slots)
        for (auto &t : slot)
            record.trials.push_back(std::move(t));
    record.aggregates = aggregate(plan, record.trials);
    record.wall_time_s = elapsed_since(start);
    return record;
}

std::string format_csv(const RunRecord &record)
{
    std::ostringstream out;
    out << to_string(record.plan.sweep) << ",scheme,mean,stderr,trials\n";
    for (const auto &a : record.aggregates)
        out << a.sweep_value << ',' << a.scheme << ',' << format_number("%.12g", a.mean) << ','
            << format_number("%.12g", a.stderr_) << ',' << a.trials << '\n';
    return out.str();
}

void write_outputs(const RunRecord &record)
{
    if (!record.plan.csv_path.empty())
        write_text_file(record.plan.csv_path, format_csv(record));
    if (!record.plan.json_path.empty())
        write_json_file(record.plan.json_path, json(record));
}

ConvergenceTrace convergence_trace(std::uint64_t channel_seed, const std::vector<double> &beta0_db,
                                   const Scenario &scenario, const SolverConfig &solver)
{
    const Regiond region(scenario.half_width, scenario.wavelength);
    const ChannelRealizationd channel =
        sample_channel<double>(channel_seed, scenario.antennas, scenario.users, scenario.paths,
                               dbm_to_watts(scenario.noise_dbm), scenario.wavelength);
    const SarModeld model = build_sar_model(scenario.sar, scenario.antennas, scenario.budget);
    SolverConfig config = solver;
    config.record_inner_trace = false;

    ConvergenceTrace trace;
    for (const double b : beta0_db)
    {
        const SolveReport r =
            solve_sar_min(channel, SinrTargets::uniform(channel.num_users(), from_db(b)), model, config, region);
        TraceSummary s;
        s.beta0_db = b;
        s.iterations = r.outer_iterations;
        s.converged = r.converged;
        s.halving_trend = true;
        for (const auto &o : r.outer)
            trace.rows.push_back(TraceRow{b, o.iteration, o.xi, o.xi / r.xi_scale, o.mu});
        for (std::size_t i = 10; 2 * i <= r.outer.size(); ++i)
            if (r.outer[2 * i - 1].xi > r.outer[i - 1].xi)
                s.halving_trend = false;
        s.final_xi_scaled = r.xi / r.xi_scale;
        trace.summaries.push_back(s);
    }
    return trace;
}

std::string format_trace_csv(const ConvergenceTrace &trace)
{
    std::ostringstream out;
    out << "beta0_db,iteration,xi,xi_scaled,mu\n";
    for (const auto &r : trace.rows)
        out << format_number("%.10g", r.beta0_db) << ',' << r.iteration << ',' << format_number("%.12g", r.xi) << ','
            << format_number("%.12g", r.xi_scaled) << ',' << format_number("%.12g", r.mu) << '\n';
    return out.str();
}

} // namespace fasar
