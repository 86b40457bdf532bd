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

// Seeded Monte Carlo sweeps over one scenario parameter.
//
// Every (point, trial) pair is an independent job with its own seeds, so the
// aggregates do not depend on how jobs are scheduled across threads.

#ifndef FASAR_EXPERIMENT_HPP
#define FASAR_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fasar/baselines.hpp"

namespace fasar
{

inline constexpr const char *version_tag = "fasar 0.1.0";

// One scenario. Sweeps override a single field per point.
struct Scenario
{
    int antennas = 4;          // M
    int users = 4;             // K
    int paths = 15;            // L
    double half_width = 1.0;   // A in wavelengths
    double budget = 1.6;       // Q0, W/kg
    double beta0_db = 135.0;   // SINR threshold for the sar-min objective
    double noise_dbm = -105.0;
    double wavelength = 0.01;  // meters
    std::string sar = "paper4"; // "paper4", "synthetic:<seed>" or "file:<path>"
};

enum class SweepVariable
{
    budget,    // Q0
    beta0,     // beta0 in dB
    region,    // A
    paths,     // L
    scheme     // values are scheme names
};

std::string to_string(SweepVariable variable);
SweepVariable sweep_variable_from_string(const std::string &name);

// Scheme names: fas, fas-ula, aps, fpa, no-sar, backoff.
bool known_scheme(const std::string &name);

struct ExperimentPlan
{
    std::string name = "sweep";
    Objective objective = Objective::balance;
    SweepVariable sweep = SweepVariable::budget;
    std::vector<double> values;            // numeric sweeps
    std::vector<std::string> scheme_values; // sweep == scheme
    std::vector<std::string> schemes = {"fas", "aps", "fpa"};
    int trials = 20;
    std::uint64_t master_seed = 1;
    // Same channel draw for a given trial at every sweep point (common random numbers).
    bool common_channels = true;
    int threads = 0; // 0: hardware concurrency; FAS_THREADS caps it
    Scenario scenario;
    BalanceConfig balance;   // accuracy, weights and the inner solver configuration
    BaselineConfig baseline;
    std::string csv_path;
    std::string json_path;

    std::size_t num_points() const;
    void validate() const;
};

struct TrialResult
{
    std::size_t point = 0;
    int trial = 0;
    std::string scheme;
    std::uint64_t channel_seed = 0;
    bool ok = false;
    std::string error;
    double value = 0.0;       // SAR or beta* in dB
    double sar = 0.0;
    double achieved_db = 0.0;
    double budget = 0.0;
    double min_distance = 0.0;
    bool inside_region = false;
    double min_sinr_ratio = 0.0; // min_k SINR_k / target_k (sar-min) or SINR_k / (beta* gamma_k)
    bool converged = false;
    int outer_iterations = 0;
    double wall_time_s = 0.0;
    AntennaLayoutd layout;
};

struct Aggregate
{
    std::size_t point = 0;
    std::string sweep_value;
    std::string scheme;
    double mean = 0.0;
    double stderr_ = 0.0;
    int trials = 0;   // successful trials entering the mean
    int failures = 0;
};

struct RunRecord
{
    std::string version = version_tag;
    ExperimentPlan plan;
    std::vector<TrialResult> trials; // ordered by (point, trial, scheme)
    std::vector<Aggregate> aggregates; // ordered by (point, scheme)
    double wall_time_s = 0.0;
    int threads_used = 1;
};

// SplitMix64 finalizer over the mixed inputs.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

// Scenario after applying the sweep value of `point`.
Scenario scenario_at(const ExperimentPlan &plan, std::size_t point);
std::string sweep_value_label(const ExperimentPlan &plan, std::size_t point);

SarModeld build_sar_model(const std::string &name, int antennas, double budget);

// Runs every scheme of one (point, trial) job; failures are recorded, not thrown.
std::vector<TrialResult> run_trial(const ExperimentPlan &plan, std::size_t point, int trial);

std::vector<Aggregate> aggregate(const ExperimentPlan &plan, const std::vector<TrialResult> &trials);

// Worker count: plan.threads (or hardware concurrency), capped by FAS_THREADS.
int resolve_threads(int requested);

RunRecord run_sweep(const ExperimentPlan &plan);

std::string format_csv(const RunRecord &record);
void write_outputs(const RunRecord &record);

// Stopping-indicator trajectories for one channel.
struct TraceRow
{
    double beta0_db = 0.0;
    int iteration = 0;
    double xi = 0.0;        // raw coupling residual
    double xi_scaled = 0.0; // xi / (sigma^2 max_k gbar_k), compared against eps_outer
    double mu = 0.0;
};

struct TraceSummary
{
    double beta0_db = 0.0;
    int iterations = 0;
    bool converged = false;
    bool halving_trend = false; // xi(2i) <= xi(i) for every i >= 10 with 2i in range
    double final_xi_scaled = 0.0;
};

struct ConvergenceTrace
{
    std::vector<TraceRow> rows;
    std::vector<TraceSummary> summaries;
};

ConvergenceTrace convergence_trace(std::uint64_t channel_seed, const std::vector<double> &beta0_db,
                                   const Scenario &scenario = Scenario(), const SolverConfig &solver = SolverConfig());

std::string format_trace_csv(const ConvergenceTrace &trace);

} // namespace fasar

#endif // FASAR_EXPERIMENT_HPP
