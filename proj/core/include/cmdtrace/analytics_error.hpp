// Copyright 2026 The cmdtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cmdtrace {

enum class AnalyticsErrorKind { empty_command, length_mismatch, too_few_points };

class AnalyticsError : public std::invalid_argument {
public:
    AnalyticsError(AnalyticsErrorKind kind, const std::string& message)
        : std::invalid_argument(message), kind_(kind) {}
    [[nodiscard]] AnalyticsErrorKind kind() const noexcept { return kind_; }

private:
    AnalyticsErrorKind kind_;
};

}  // namespace cmdtrace
