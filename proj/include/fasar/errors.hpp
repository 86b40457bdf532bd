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

#ifndef FASAR_ERRORS_HPP
#define FASAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fasar
{

// Invalid dimensions, parameters or input files.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// h_k^H p_k = 0 while user k's SINR constraint is violated: no multiplier in [0, 1) exists.
class DegenerateUserError : public SolverError
{
public:
    explicit DegenerateUserError(long user)
        : SolverError("degenerate user " + std::to_string(user) + ": zero desired-signal term"), user_(user)
    {
    }
    long user() const { return user_; }

private:
    long user_;
};

// A block update increased the penalized objective: indicates a bug, not bad input.
class InvariantViolation : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

} // namespace fasar

#endif // FASAR_ERRORS_HPP
