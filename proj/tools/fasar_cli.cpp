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

// fasar command line: single solves, baselines, sweeps and convergence traces.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fasar/io.hpp"

using namespace fasar;

namespace
{

struct CommonOptions
{
    std::string channel = "1"; // seed or JSON file
    std::string sar = "paper4";
    int antennas = 4;
    int users = 4;
    int paths = 15;
    double half_width = 1.0;
    double noise_dbm = -105.0;
    double wavelength = 0.01;
    double q0 = 1.6;
    std::string beta0 = "135dB";
    std::string out;
    bool fixed_positions = false;
    bool refine = false;
    double accuracy_db = 1e-4;
};

void add_common(CLI::App *app, CommonOptions &o)
{
    app->add_option("--channel", o.channel, "channel seed or JSON file")->capture_default_str();
    app->add_option("--sar", o.sar, "paper4 | synthetic[:seed] | file:<path>")->capture_default_str();
    app->add_option("--antennas,-M", o.antennas, "number of fluid antennas")->capture_default_str();
    app->add_option("--users,-K", o.users, "number of users")->capture_default_str();
    app->add_option("--paths,-L", o.paths, "paths per user")->capture_default_str();
    app->add_option("--half-width,-A", o.half_width, "region half width in wavelengths")->capture_default_str();
    app->add_option("--noise-dbm", o.noise_dbm, "noise power in dBm")->capture_default_str();
    app->add_option("--wavelength", o.wavelength, "wavelength in meters")->capture_default_str();
    app->add_option("--q0", o.q0, "SAR budget in W/kg")->capture_default_str();
    app->add_option("--out,-o", o.out, "write the JSON report here instead of stdout");
    app->add_flag("--fixed-positions", o.fixed_positions, "skip the antenna position step");
    app->add_flag("--refine", o.refine, "descend the exact SAR over positions after the penalty solve");
    app->add_option("--accuracy-db", o.accuracy_db, "bisection accuracy in dB")->capture_default_str();
}

// "135dB" is read in dB, a bare number as a linear ratio.
double parse_level(const std::string &text)
{
    std::string t = text;
    bool db = false;
    if (t.size() > 2 && (t.substr(t.size() - 2) == "dB" || t.substr(t.size() - 2) == "db"))
    {
        db = true;
        t.resize(t.size() - 2);
    }
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size())
        throw ConfigError("cannot parse SINR level '" + text + "'");
    return db ? from_db(v) : v;
}

std::vector<double> parse_levels_db(const std::string &list)
{
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(to_db(parse_level(item)));
    return out;
}

ChannelRealizationd load_channel(const CommonOptions &o)
{
    if (!o.channel.empty() && o.channel.find_first_not_of("0123456789") == std::string::npos)
        return sample_channel<double>(std::stoull(o.channel), o.antennas, o.users, o.paths,
                                      dbm_to_watts(o.noise_dbm), o.wavelength);
    return read_json_file(o.channel).get<ChannelRealizationd>();
}

void emit(const std::string &path, const json &j)
{
    if (path.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_json_file(path, j);
}

Problem make_problem(const CommonOptions &o, Objective objective, int users)
{
    Problem p;
    p.objective = objective;
    p.beta0 = parse_level(o.beta0);
    p.balance.accuracy_db = o.accuracy_db;
    p.balance.weights = RVectord::Ones(users);
    p.balance.solver.optimize_positions = !o.fixed_positions;
    p.balance.solver.refine_layout = o.refine;
    return p;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"SAR-aware precoding and fluid antenna positioning"};
    app.require_subcommand(1);

    // solve
    CommonOptions solve_opts;
    auto *solve = app.add_subcommand("solve", "run the proposed solver");
    solve->require_subcommand(1);
    auto *sar_min = solve->add_subcommand("sar-min", "minimize SAR under SINR targets");
    add_common(sar_min, solve_opts);
    sar_min->add_option("--beta0", solve_opts.beta0, "SINR threshold, e.g. 135dB or a linear ratio")
        ->capture_default_str();
    auto *balance = solve->add_subcommand("sinr-balance", "maximize the minimum weighted SINR under a SAR budget");
    add_common(balance, solve_opts);

    // baseline
    CommonOptions base_opts;
    std::string base_kind;
    std::string base_objective = "balance";
    BaselineConfig base_cfg;
    auto *baseline = app.add_subcommand("baseline", "run a comparison scheme");
    baseline->add_option("kind", base_kind, "backoff | aps | fpa | no-sar | fas | fas-ula")->required();
    add_common(baseline, base_opts);
    baseline->add_option("--beta0", base_opts.beta0, "SINR threshold for --objective sar-min")->capture_default_str();
    baseline->add_option("--objective", base_objective, "sar-min | balance")->capture_default_str();
    baseline->add_option("--power", base_cfg.power_budget, "power budget P_t in watts")->capture_default_str();
    baseline->add_option("--aps-cap", base_cfg.aps_cap, "APS combination cap")->capture_default_str();
    baseline->add_option("--aps-seed", base_cfg.seed, "APS subsampling seed")->capture_default_str();

    // sweep
    std::string plan_path;
    std::string csv_override;
    std::string json_override;
    int threads = 0;
    auto *sweep = app.add_subcommand("sweep", "run a Monte Carlo sweep from a JSON plan");
    sweep->add_option("--plan", plan_path, "plan file")->required();
    sweep->add_option("--csv", csv_override, "CSV output (overrides the plan)");
    sweep->add_option("--json", json_override, "JSON record output (overrides the plan)");
    sweep->add_option("--threads", threads, "worker threads (FAS_THREADS caps this)");

    // trace
    std::uint64_t trace_seed = 1;
    std::string trace_levels = "125dB,135dB,145dB";
    std::string trace_out;
    auto *trace = app.add_subcommand("trace", "stopping indicator per outer iteration");
    trace->add_option("--seed", trace_seed, "channel seed")->capture_default_str();
    trace->add_option("--beta0", trace_levels, "comma-separated SINR thresholds (dB suffix or linear)")
        ->capture_default_str();
    trace->add_option("--out,-o", trace_out, "CSV output (stdout when empty)");

    // channel
    CommonOptions chan_opts;
    auto *channel_cmd = app.add_subcommand("channel", "sample a channel realization and write it as JSON");
    add_common(channel_cmd, chan_opts);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (sar_min->parsed() || balance->parsed())
        {
            const CommonOptions &o = solve_opts;
            const ChannelRealizationd channel = load_channel(o);
            const Regiond region(o.half_width, channel.wavelength);
            const SarModeld model = build_sar_model(o.sar, o.antennas, o.q0);
            const Problem p = make_problem(o, sar_min->parsed() ? Objective::sar_min : Objective::balance,
                                           static_cast<int>(channel.num_users()));
            if (sar_min->parsed())
            {
                const SolveReport r = solve_sar_min(channel, p.targets(channel.num_users()), model,
                                                    p.balance.solver, region);
                std::fprintf(stderr, "status=%s SAR=%.9g outer=%d feasible=%d\n", r.status.c_str(), r.sar,
                             r.outer_iterations, int(r.feasibility.ok()));
                emit(o.out, json{{"channel", channel}, {"sar_model", model}, {"report", r}});
            }
            else
            {
                const BalanceReport r = solve_sinr_balance(channel, model, p.balance, region);
                std::fprintf(stderr, "beta*=%.6f dB SAR=%.9g probes=%zu non_monotone=%d\n", r.beta_db,
                             r.solution.sar, r.ladder.size(), int(r.non_monotone));
                emit(o.out, json{{"channel", channel}, {"sar_model", model}, {"report", r}});
            }
        }
        else if (baseline->parsed())
        {
            const CommonOptions &o = base_opts;
            const ChannelRealizationd channel = load_channel(o);
            const Regiond region(o.half_width, channel.wavelength);
            const SarModeld model = build_sar_model(o.sar, o.antennas, o.q0);
            const Problem p =
                make_problem(o, objective_from_string(base_objective), static_cast<int>(channel.num_users()));
            BaselineReport r;
            if (base_kind == "backoff")
                r = adaptive_backoff(channel, model, base_cfg, p.balance, region);
            else if (base_kind == "no-sar")
                r = solve_without_sar(channel, model.size(), base_cfg, p.balance, region);
            else if (base_kind == "aps")
                r = solve_aps(channel, model, p, base_cfg, region);
            else if (base_kind == "fpa")
                r = solve_fpa(channel, model, p, region);
            else if (base_kind == "fas")
                r = solve_fas(channel, model, p, base_cfg, region);
            else if (base_kind == "fas-ula")
                r = solve_fas_from_ula(channel, model, p, region);
            else
                throw ConfigError("unknown baseline '" + base_kind + "'");
            std::fprintf(stderr, "%s %s value=%.9g SAR=%.9g achieved=%.6f dB\n", r.scheme.c_str(),
                         to_string(r.objective).c_str(), r.value, r.sar, r.achieved_db);
            emit(o.out, json{{"channel", channel}, {"sar_model", model}, {"report", r}});
        }
        else if (sweep->parsed())
        {
            ExperimentPlan plan = read_json_file(plan_path).get<ExperimentPlan>();
            if (!csv_override.empty())
                plan.csv_path = csv_override;
            if (!json_override.empty())
                plan.json_path = json_override;
            if (threads > 0)
                plan.threads = threads;
            const RunRecord record = run_sweep(plan);
            write_outputs(record);
            if (plan.csv_path.empty())
                std::cout << format_csv(record);
            std::fprintf(stderr, "%zu trial results, %d threads, %.1f s\n", record.trials.size(),
                         record.threads_used, record.wall_time_s);
        }
        else if (trace->parsed())
        {
            const ConvergenceTrace t = convergence_trace(trace_seed, parse_levels_db(trace_levels));
            for (const auto &s : t.summaries)
                std::fprintf(stderr, "beta0=%.3f dB iterations=%d converged=%d xi=%.3g trend=%d\n", s.beta0_db,
                             s.iterations, int(s.converged), s.final_xi_scaled, int(s.halving_trend));
            if (trace_out.empty())
                std::cout << format_trace_csv(t);
            else
                write_text_file(trace_out, format_trace_csv(t));
        }
        else if (channel_cmd->parsed())
        {
            emit(chan_opts.out, json(load_channel(chan_opts)));
        }
    }
    catch (const ConfigError &e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
