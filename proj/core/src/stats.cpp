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

#include "cmdtrace/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

namespace cmdtrace {

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Fraction of the n! pairings of the rank vectors whose correlation is at
// least as extreme as the observed one. Means and variances of both rank
// vectors are permutation invariant, so comparing centred cross products
// is equivalent to comparing correlations.
double exact_permutation_pvalue(const std::vector<double>& rx, const std::vector<double>& ry) {
    const std::size_t n = rx.size();
    const double mean = (static_cast<double>(n) + 1.0) / 2.0;
    std::vector<double> cx(n);
    std::vector<double> cy(n);
    for (std::size_t i = 0; i < n; ++i) {
        cx[i] = rx[i] - mean;
        cy[i] = ry[i] - mean;
    }
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) observed += cx[i] * cy[i];
    const double threshold = std::abs(observed) - 1e-9;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::uint64_t extreme = 0;
    std::uint64_t total = 0;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += cx[i] * cy[perm[i]];
        if (std::abs(s) >= threshold) ++extreme;
        ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

std::optional<Summary> describe(std::span<const double> values) {
    if (values.empty()) return std::nullopt;
    Summary s;
    s.n = values.size();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    const std::size_t mid = s.n / 2;
    s.median = s.n % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
    s.total = std::accumulate(values.begin(), values.end(), 0.0);
    s.mean = s.total / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::string_view to_string(PValueMethod method) {
    return method == PValueMethod::exact_permutation ? "exact-permutation" : "t-approximation";
}

double spearman_t_pvalue(double rho, std::size_t n) {
    if (std::abs(rho) >= 1.0) return 0.0;
    const double df = static_cast<double>(n) - 2.0;
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw AnalyticsError(AnalyticsErrorKind::length_mismatch, "spearman: inputs differ in length (" +
                                                                      std::to_string(x.size()) + " vs " +
                                                                      std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) throw AnalyticsError(AnalyticsErrorKind::too_few_points, "spearman: at least 3 points required");

    SpearmanResult result;
    result.n = x.size();
    result.method = result.n <= kExactSpearmanMaxN ? PValueMethod::exact_permutation : PValueMethod::t_approximation;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const auto constant = [](const std::vector<double>& r) {
        return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
    };
    if (constant(rx) || constant(ry)) return result;

    double rho = pearson(rx, ry);
    // Rounding can leave a perfectly monotone relation a hair away from 1.
    if (std::abs(std::abs(rho) - 1.0) < 1e-12) rho = std::copysign(1.0, rho);
    result.rho = rho;
    result.p_value = result.method == PValueMethod::exact_permutation ? exact_permutation_pvalue(rx, ry)
                                                                      : spearman_t_pvalue(rho, result.n);
    return result;
}

}  // namespace cmdtrace
