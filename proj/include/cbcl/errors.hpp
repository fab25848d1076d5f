// Copyright 2026 The cbcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cbcl
{
/// Root of the library's exception hierarchy. The CLI maps every subclass to
/// exit code 2 (data/format error).
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Stream could not be opened, read or written.
class IoError : public Error
{
public:
  using Error::Error;
};

/// Malformed binary or text input (bad magic, truncation, bad header).
class FormatError : public Error
{
public:
  using Error::Error;
};

/// Well-formed input carrying invalid values (non-finite floats, zero weights).
class DataError : public Error
{
public:
  using Error::Error;
};

/// Inconsistent or infeasible configuration.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Vector dimension does not match the model or dataset dimension.
class ShapeError : public Error
{
public:
  using Error::Error;
};

class ArgumentError : public Error
{
public:
  using Error::Error;
};

/// Operation is undefined for the current model state (e.g. empty model).
class StateError : public Error
{
public:
  using Error::Error;
};

/// A reduction plan does not fit the model it is applied to.
class PlanError : public Error
{
public:
  using Error::Error;
};

/// Metric is undefined for the given result (e.g. fewer than two increments).
class MetricError : public Error
{
public:
  using Error::Error;
};
}  // namespace cbcl
