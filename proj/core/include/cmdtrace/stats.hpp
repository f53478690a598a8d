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

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cmdtrace/analytics_error.hpp"

namespace cmdtrace {

/// Descriptive statistics in the column order of the report tables.
/// Median of an even count is the mean of the middle two; stdev is the
/// sample standard deviation (n - 1), defined as 0 for a single value.
struct Summary {
    std::size_t n = 0;
    double total = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double stdev = 0.0;
};

/// nullopt for an empty input.
std::optional<Summary> describe(std::span<const double> values);

/// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

enum class PValueMethod { exact_permutation, t_approximation };

std::string_view to_string(PValueMethod method);

struct SpearmanResult {
    std::size_t n = 0;
    std::optional<double> rho;      // absent when either input is constant
    std::optional<double> p_value;  // two-sided
    PValueMethod method = PValueMethod::t_approximation;
};

/// Largest n for which the two-sided p-value is computed by enumerating all
/// n! rank permutations; above it the t approximation is used.
inline constexpr std::size_t kExactSpearmanMaxN = 9;

/// Spearman rank correlation with average ranks for ties. Throws
/// AnalyticsError(length_mismatch | too_few_points); n >= 3 is required.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Two-sided p-value from t = rho * sqrt((n - 2) / (1 - rho^2)) with n - 2
/// degrees of freedom; |rho| == 1 gives exactly 0.
double spearman_t_pvalue(double rho, std::size_t n);

}  // namespace cmdtrace
