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

#include "fasar/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fasar
{

namespace
{

json number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

double number(const json &j)
{
    if (j.is_string())
    {
        const auto s = j.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        if (s == "nan")
            return std::numeric_limits<double>::quiet_NaN();
        throw ConfigError("expected a number, got '" + s + "'");
    }
    if (j.is_null())
        return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

json complex_json(std::complex<double> z)
{
    return json::array({number(z.real()), number(z.imag())});
}

std::complex<double> complex_from(const json &j)
{
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("complex values are [re, im] pairs");
    return {number(j[0]), number(j[1])};
}

json real_vector_json(const RVectord &v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(number(v[i]));
    return out;
}

RVectord real_vector_from(const json &j)
{
    RVectord v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = number(j[i]);
    return v;
}

json complex_vector_json(const CVectord &v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(complex_json(v[i]));
    return out;
}

CVectord complex_vector_from(const json &j)
{
    CVectord v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = complex_from(j[i]);
    return v;
}

// Row-major list of rows.
json complex_matrix_json(const CMatrixd &m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(complex_json(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

CMatrixd complex_matrix_from(const json &j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    CMatrixd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols)
            throw ConfigError("matrix rows differ in length");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = complex_from(j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    }
    return m;
}

template <typename T>
void read_if(const json &j, const char *key, T &out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

void read_number_if(const json &j, const char *key, double &out)
{
    if (j.contains(key))
        out = number(j.at(key));
}

json feasibility_json(const Feasibility &f)
{
    return json{{"sinr_slack", real_vector_json(f.sinr_slack)},
                {"min_distance", number(f.min_distance)},
                {"inside_region", f.inside_region},
                {"sinr_ok", f.sinr_ok},
                {"distance_ok", f.distance_ok}};
}

} // namespace

// ---- channel, model, layout ------------------------------------------------

void to_json(json &j, const ChannelRealizationd &channel)
{
    json users = json::array();
    for (const auto &u : channel.users)
        users.push_back(json{{"elevation", real_vector_json(u.elevation)},
                             {"azimuth", real_vector_json(u.azimuth)},
                             {"gains", complex_vector_json(u.gains)}});
    j = json{{"seed", channel.seed},
             {"wavelength", number(channel.wavelength)},
             {"noise_variance", number(channel.noise_variance)},
             {"users", std::move(users)}};
}

void from_json(const json &j, ChannelRealizationd &channel)
{
    channel = ChannelRealizationd{};
    read_if(j, "seed", channel.seed);
    channel.wavelength = number(j.at("wavelength"));
    channel.noise_variance = number(j.at("noise_variance"));
    for (const auto &u : j.at("users"))
    {
        PathSetd paths;
        paths.elevation = real_vector_from(u.at("elevation"));
        paths.azimuth = real_vector_from(u.at("azimuth"));
        paths.gains = complex_vector_from(u.at("gains"));
        channel.users.push_back(std::move(paths));
    }
    channel.validate();
}

void to_json(json &j, const SarModeld &model)
{
    j = json{{"matrix", complex_matrix_json(model.matrix())},
             {"budget", number(model.budget())},
             {"synthetic", model.synthetic()}};
}

SarModeld sar_model_from_json(const json &j)
{
    return SarModeld(complex_matrix_from(j.at("matrix")), number(j.at("budget")),
                     j.value("synthetic", false));
}

void to_json(json &j, const AntennaLayoutd &layout)
{
    j = json::array();
    for (Eigen::Index m = 0; m < layout.size(); ++m)
        j.push_back(json::array({number(layout.positions(0, m)), number(layout.positions(1, m))}));
}

void from_json(const json &j, AntennaLayoutd &layout)
{
    Positions<double> pos(2, static_cast<Eigen::Index>(j.size()));
    for (std::size_t m = 0; m < j.size(); ++m)
    {
        pos(0, static_cast<Eigen::Index>(m)) = number(j[m].at(0));
        pos(1, static_cast<Eigen::Index>(m)) = number(j[m].at(1));
    }
    layout = AntennaLayoutd(std::move(pos));
}

// ---- configuration -----------------------------------------------------------

void to_json(json &j, const SolverConfig &c)
{
    j = json{{"mu0", c.mu0},
             {"scaling", c.scaling},
             {"eps_inner", c.eps_inner},
             {"eps_outer", c.eps_outer},
             {"eps_position", c.eps_position},
             {"max_inner", c.max_inner},
             {"max_outer", c.max_outer},
             {"max_sca", c.max_sca},
             {"plateau_window", c.plateau_window},
             {"plateau_relative", c.plateau_relative},
             {"min_distance_wl", c.min_distance_wl},
             {"monotonic_slack", c.monotonic_slack},
             {"optimize_positions", c.optimize_positions},
             {"relative_thresholds", c.relative_thresholds},
             {"scaled_initial_power", c.scaled_initial_power},
             {"polish", c.polish},
             {"refine_layout", c.refine_layout},
             {"refine_max_sweeps", c.refine_max_sweeps},
             {"keep_better_initial", c.keep_better_initial},
             {"record_inner_trace", c.record_inner_trace}};
}

void from_json(const json &j, SolverConfig &c)
{
    read_if(j, "mu0", c.mu0);
    read_if(j, "scaling", c.scaling);
    read_if(j, "eps_inner", c.eps_inner);
    read_if(j, "eps_outer", c.eps_outer);
    read_if(j, "eps_position", c.eps_position);
    read_if(j, "max_inner", c.max_inner);
    read_if(j, "max_outer", c.max_outer);
    read_if(j, "max_sca", c.max_sca);
    read_if(j, "plateau_window", c.plateau_window);
    read_if(j, "plateau_relative", c.plateau_relative);
    read_if(j, "min_distance_wl", c.min_distance_wl);
    read_if(j, "monotonic_slack", c.monotonic_slack);
    read_if(j, "optimize_positions", c.optimize_positions);
    read_if(j, "relative_thresholds", c.relative_thresholds);
    read_if(j, "scaled_initial_power", c.scaled_initial_power);
    read_if(j, "polish", c.polish);
    read_if(j, "refine_layout", c.refine_layout);
    read_if(j, "refine_max_sweeps", c.refine_max_sweeps);
    read_if(j, "keep_better_initial", c.keep_better_initial);
    read_if(j, "record_inner_trace", c.record_inner_trace);
}

void to_json(json &j, const BalanceConfig &c)
{
    j = json{{"accuracy_db", c.accuracy_db},
             {"weights", real_vector_json(c.weights)},
             {"max_expansions", c.max_expansions},
             {"solver", c.solver}};
    if (c.lower_db)
        j["lower_db"] = *c.lower_db;
    if (c.upper_db)
        j["upper_db"] = *c.upper_db;
}

void from_json(const json &j, BalanceConfig &c)
{
    read_if(j, "accuracy_db", c.accuracy_db);
    if (j.contains("weights"))
        c.weights = real_vector_from(j.at("weights"));
    read_if(j, "max_expansions", c.max_expansions);
    if (j.contains("solver"))
        j.at("solver").get_to(c.solver);
    if (j.contains("lower_db"))
        c.lower_db = j.at("lower_db").get<double>();
    if (j.contains("upper_db"))
        c.upper_db = j.at("upper_db").get<double>();
}

void to_json(json &j, const BaselineConfig &c)
{
    j = json{{"power_budget", c.power_budget},
             {"grid_spacing_wl", c.grid_spacing_wl},
             {"aps_cap", c.aps_cap},
             {"seed", c.seed},
             {"fas_starts", c.fas_starts},
             {"fas_include_ula", c.fas_include_ula}};
}

void from_json(const json &j, BaselineConfig &c)
{
    read_if(j, "power_budget", c.power_budget);
    read_if(j, "grid_spacing_wl", c.grid_spacing_wl);
    read_if(j, "aps_cap", c.aps_cap);
    read_if(j, "seed", c.seed);
    read_if(j, "fas_starts", c.fas_starts);
    read_if(j, "fas_include_ula", c.fas_include_ula);
}

// ---- reports -----------------------------------------------------------------

json solve_report_json(const SolveReport &r, bool with_traces)
{
    json outer = json::array();
    for (const auto &o : r.outer)
        outer.push_back(json{{"iteration", o.iteration},
                             {"mu", number(o.mu)},
                             {"xi", number(o.xi)},
                             {"objective", number(o.objective)},
                             {"sar", number(o.sar)},
                             {"inner_sweeps", o.inner_sweeps}});
    json j{{"status", r.status},
           {"converged", r.converged},
           {"plateau", r.plateau},
           {"sar", number(r.sar)},
           {"beta0", number(r.beta0)},
           {"beta0_db", number(to_db(r.beta0))},
           {"xi", number(r.xi)},
           {"xi_scale", number(r.xi_scale)},
           {"mu", number(r.mu)},
           {"penalty_sar", number(r.penalty_sar)},
           {"restoration_ratio", number(r.restoration_ratio)},
           {"polished", r.polished},
           {"refine_sweeps", r.refine_sweeps},
           {"kept_initial_layout", r.kept_initial_layout},
           {"precoder", complex_matrix_json(r.precoder)},
           {"layout", r.layout},
           {"feasibility", feasibility_json(r.feasibility)},
           {"outer_iterations", r.outer_iterations},
           {"inner_iterations", r.inner_iterations},
           {"position_fallbacks", r.position_fallbacks},
           {"majorizer_backtracks", r.majorizer_backtracks},
           {"degenerate_users", r.degenerate_users},
           {"synthetic_sar", r.synthetic_sar},
           {"wall_time_s", r.wall_time_s}};
    if (with_traces)
    {
        j["outer"] = std::move(outer);
        json inner = json::array();
        for (double v : r.inner_trace)
            inner.push_back(number(v));
        j["inner_trace"] = std::move(inner);
        j["inner_offsets"] = r.inner_offsets;
    }
    return j;
}

void to_json(json &j, const SolveReport &report)
{
    j = solve_report_json(report, true);
}

void to_json(json &j, const BalanceReport &r)
{
    json ladder = json::array();
    for (const auto &p : r.ladder)
        ladder.push_back(json{{"beta0_db", number(p.beta0_db)},
                              {"sar", number(p.sar)},
                              {"converged", p.converged},
                              {"within_budget", p.within_budget}});
    j = json{{"beta_db", number(r.beta_db)},
             {"lower_db", number(r.lower_db)},
             {"upper_db", number(r.upper_db)},
             {"initial_lower_db", number(r.initial_lower_db)},
             {"initial_upper_db", number(r.initial_upper_db)},
             {"budget", number(r.budget)},
             {"achieved_db", number(r.achieved_db)},
             {"ladder", std::move(ladder)},
             {"expansions", r.expansions},
             {"bisection_steps", r.bisection_steps},
             {"non_monotone", r.non_monotone},
             {"nonconverged_probe", r.nonconverged_probe},
             {"top_exit", r.top_exit},
             {"solution_found", r.solution_found},
             {"wall_time_s", r.wall_time_s},
             {"solution", solve_report_json(r.solution, false)}};
}

void to_json(json &j, const BaselineReport &r)
{
    j = json{{"scheme", r.scheme},
             {"objective", to_string(r.objective)},
             {"value", number(r.value)},
             {"sar", number(r.sar)},
             {"achieved_db", number(r.achieved_db)},
             {"precoder", complex_matrix_json(r.precoder)},
             {"layout", r.layout}};
    if (r.solve)
        j["solve"] = solve_report_json(*r.solve, true);
    if (r.balance)
        j["balance"] = *r.balance;
    if (r.aps)
    {
        const ApsSearch &a = *r.aps;
        j["aps"] = json{{"grid_points", a.grid_points},
                        {"total_combinations", number(a.total_combinations)},
                        {"evaluated", a.evaluated},
                        {"spacing_violations", a.spacing_violations},
                        {"exact_solves", a.exact_solves},
                        {"coverage", number(a.coverage)},
                        {"subsampled", a.subsampled},
                        {"reference_beta_db", a.reference_beta > 0 ? number(to_db(a.reference_beta)) : json()},
                        {"winner", a.winner}};
    }
    if (r.scheme == "backoff")
    {
        j["backoff_factor"] = number(r.backoff_factor);
        j["unscaled_sar"] = number(r.unscaled_sar);
    }
    if (r.starts > 0)
    {
        j["starts"] = r.starts;
        j["best_start"] = r.best_start;
    }
}

// ---- experiments ---------------------------------------------------------------

void to_json(json &j, const Scenario &s)
{
    j = json{{"antennas", s.antennas},   {"users", s.users},
             {"paths", s.paths},         {"half_width", s.half_width},
             {"budget", s.budget},       {"beta0_db", s.beta0_db},
             {"noise_dbm", s.noise_dbm}, {"wavelength", s.wavelength},
             {"sar", s.sar}};
}

void from_json(const json &j, Scenario &s)
{
    read_if(j, "antennas", s.antennas);
    read_if(j, "users", s.users);
    read_if(j, "paths", s.paths);
    read_if(j, "half_width", s.half_width);
    read_if(j, "budget", s.budget);
    read_if(j, "beta0_db", s.beta0_db);
    read_if(j, "noise_dbm", s.noise_dbm);
    read_if(j, "wavelength", s.wavelength);
    read_if(j, "sar", s.sar);
}

void to_json(json &j, const ExperimentPlan &p)
{
    j = json{{"name", p.name},
             {"objective", to_string(p.objective)},
             {"sweep", to_string(p.sweep)},
             {"schemes", p.schemes},
             {"trials", p.trials},
             {"master_seed", p.master_seed},
             {"common_channels", p.common_channels},
             {"threads", p.threads},
             {"scenario", p.scenario},
             {"balance", p.balance},
             {"baseline", p.baseline},
             {"csv", p.csv_path},
             {"json", p.json_path}};
    if (p.sweep == SweepVariable::scheme)
        j["values"] = p.scheme_values;
    else
        j["values"] = p.values;
}

void from_json(const json &j, ExperimentPlan &p)
{
    p = ExperimentPlan{};
    read_if(j, "name", p.name);
    if (j.contains("objective"))
        p.objective = objective_from_string(j.at("objective").get<std::string>());
    if (j.contains("sweep"))
        p.sweep = sweep_variable_from_string(j.at("sweep").get<std::string>());
    if (j.contains("values"))
    {
        if (p.sweep == SweepVariable::scheme)
            p.scheme_values = j.at("values").get<std::vector<std::string>>();
        else
            p.values = j.at("values").get<std::vector<double>>();
    }
    read_if(j, "schemes", p.schemes);
    read_if(j, "trials", p.trials);
    read_if(j, "master_seed", p.master_seed);
    read_if(j, "common_channels", p.common_channels);
    read_if(j, "threads", p.threads);
    if (j.contains("scenario"))
        j.at("scenario").get_to(p.scenario);
    if (j.contains("balance"))
        j.at("balance").get_to(p.balance);
    if (j.contains("solver"))
        j.at("solver").get_to(p.balance.solver);
    if (j.contains("baseline"))
        j.at("baseline").get_to(p.baseline);
    read_if(j, "csv", p.csv_path);
    read_if(j, "json", p.json_path);
}

void to_json(json &j, const TrialResult &t)
{
    j = json{{"point", t.point},
             {"trial", t.trial},
             {"scheme", t.scheme},
             {"channel_seed", t.channel_seed},
             {"ok", t.ok},
             {"error", t.error},
             {"value", number(t.value)},
             {"sar", number(t.sar)},
             {"achieved_db", number(t.achieved_db)},
             {"budget", number(t.budget)},
             {"min_distance", number(t.min_distance)},
             {"inside_region", t.inside_region},
             {"min_sinr_ratio", number(t.min_sinr_ratio)},
             {"converged", t.converged},
             {"outer_iterations", t.outer_iterations},
             {"wall_time_s", number(t.wall_time_s)},
             {"layout", t.layout}};
}

void from_json(const json &j, TrialResult &t)
{
    t = TrialResult{};
    read_if(j, "point", t.point);
    read_if(j, "trial", t.trial);
    read_if(j, "scheme", t.scheme);
    read_if(j, "channel_seed", t.channel_seed);
    read_if(j, "ok", t.ok);
    read_if(j, "error", t.error);
    read_number_if(j, "value", t.value);
    read_number_if(j, "sar", t.sar);
    read_number_if(j, "achieved_db", t.achieved_db);
    read_number_if(j, "budget", t.budget);
    read_number_if(j, "min_distance", t.min_distance);
    read_if(j, "inside_region", t.inside_region);
    read_number_if(j, "min_sinr_ratio", t.min_sinr_ratio);
    read_if(j, "converged", t.converged);
    read_if(j, "outer_iterations", t.outer_iterations);
    read_number_if(j, "wall_time_s", t.wall_time_s);
    if (j.contains("layout"))
        j.at("layout").get_to(t.layout);
}

void to_json(json &j, const Aggregate &a)
{
    j = json{{"point", a.point},       {"sweep_value", a.sweep_value}, {"scheme", a.scheme},
             {"mean", number(a.mean)}, {"stderr", number(a.stderr_)},  {"trials", a.trials},
             {"failures", a.failures}};
}

void from_json(const json &j, Aggregate &a)
{
    a = Aggregate{};
    read_if(j, "point", a.point);
    read_if(j, "sweep_value", a.sweep_value);
    read_if(j, "scheme", a.scheme);
    read_number_if(j, "mean", a.mean);
    read_number_if(j, "stderr", a.stderr_);
    read_if(j, "trials", a.trials);
    read_if(j, "failures", a.failures);
}

void to_json(json &j, const RunRecord &r)
{
    j = json{{"version", r.version},   {"plan", r.plan},
             {"trials", r.trials},     {"aggregates", r.aggregates},
             {"wall_time_s", r.wall_time_s}, {"threads_used", r.threads_used}};
}

void from_json(const json &j, RunRecord &r)
{
    r = RunRecord{};
    read_if(j, "version", r.version);
    j.at("plan").get_to(r.plan);
    j.at("trials").get_to(r.trials);
    j.at("aggregates").get_to(r.aggregates);
    read_if(j, "wall_time_s", r.wall_time_s);
    read_if(j, "threads_used", r.threads_used);
}

// ---- files ---------------------------------------------------------------------

json read_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open '" + path + "'");
    try
    {
        return json::parse(in);
    }
    catch (const json::parse_error &e)
    {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
}

void write_text_file(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write '" + path + "'");
    out << text;
}

void write_json_file(const std::string &path, const json &j)
{
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace fasar
