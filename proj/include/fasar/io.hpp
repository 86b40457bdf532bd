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

// JSON persistence. Complex numbers are [re, im] pairs, angles are radians,
// non-finite doubles are written as the strings "inf", "-inf" and "nan".

#ifndef FASAR_IO_HPP
#define FASAR_IO_HPP

#include <string>

#include "json.hpp"

#include "fasar/experiment.hpp"

namespace fasar
{

using json = nlohmann::json;

void to_json(json &j, const ChannelRealizationd &channel);
void from_json(const json &j, ChannelRealizationd &channel);

void to_json(json &j, const SarModeld &model);
SarModeld sar_model_from_json(const json &j);

void to_json(json &j, const AntennaLayoutd &layout);
void from_json(const json &j, AntennaLayoutd &layout);

void to_json(json &j, const SolverConfig &config);
void from_json(const json &j, SolverConfig &config);
void to_json(json &j, const BalanceConfig &config);
void from_json(const json &j, BalanceConfig &config);
void to_json(json &j, const BaselineConfig &config);
void from_json(const json &j, BaselineConfig &config);

// Inner traces are large; they are written only when `with_traces`.
json solve_report_json(const SolveReport &report, bool with_traces = true);
void to_json(json &j, const SolveReport &report);
void to_json(json &j, const BalanceReport &report);
void to_json(json &j, const BaselineReport &report);

void to_json(json &j, const Scenario &scenario);
void from_json(const json &j, Scenario &scenario);
void to_json(json &j, const ExperimentPlan &plan);
void from_json(const json &j, ExperimentPlan &plan);
void to_json(json &j, const TrialResult &trial);
void from_json(const json &j, TrialResult &trial);
void to_json(json &j, const Aggregate &aggregate);
void from_json(const json &j, Aggregate &aggregate);
void to_json(json &j, const RunRecord &record);
void from_json(const json &j, RunRecord &record);

json read_json_file(const std::string &path);
void write_json_file(const std::string &path, const json &j);
void write_text_file(const std::string &path, const std::string &text);

} // namespace fasar

#endif // FASAR_IO_HPP
