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

#include <doctest.h>

#include <cmath>
#include <random>

#include "cmdtrace/agent.hpp"
#include "cmdtrace/analytics.hpp"
#include "cmdtrace/analytics_error.hpp"
#include "cmdtrace/normalize.hpp"
#include "cmdtrace/stats.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cmdtrace;
using testsupport::make_record;

namespace {

bool rel_close(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

std::vector<CommandRecord> table2() { return load_trace(testsupport::table2_trace_path()).records; }

}  // namespace

TEST_SUITE("normalize") {
    TEST_CASE("doubled short flag takes its value") {
        const auto nc = normalize("nmap   -sV  --p 10000 172.18.1.5");
        CHECK(nc.tool == "nmap");
        REQUIRE(nc.options.size() == 2);
        CHECK(nc.has_flag("-sV"));
        CHECK(nc.value_of("--p") == "10000");
        CHECK(nc.positionals == std::vector<std::string>{"172.18.1.5"});
        CHECK(nc.canonical == "nmap --p 10000 -sV 172.18.1.5");
    }

    TEST_CASE("option order and duplicates do not matter") {
        CHECK(normalize("nmap -p 10000 -sV 172.18.1.5").canonical ==
              normalize("nmap -sV -sV -p 10000 172.18.1.5").canonical);
        CHECK(normalize("/usr/bin/nmap -sV x").tool == "nmap");
        CHECK(normalize("john --wordlist=/usr/share/wordlists/rockyou.txt hash.txt").value_of("--wordlist") ==
              "/usr/share/wordlists/rockyou.txt");
    }

    TEST_CASE("quoting and separators") {
        CHECK(shell_split(R"(echo "a b" 'c d' e\ f)") == std::vector<std::string>{"echo", "a b", "c d", "e f"});
        CHECK(split_command_list("ifconfig; ping -c 1 172.18.1.1 && ls | wc -l").size() == 4);
        CHECK(command_tools("sudo -i; nmap x") == std::vector<std::string>{"sudo", "nmap"});
        CHECK(split_command_list("echo 'a;b'").size() == 1);
    }

    TEST_CASE("sudo is looked through") {
        CHECK(normalize("sudo -u root nmap -A -T4").canonical == "nmap -A -T4");
        CHECK(normalize("sudo -- nmap x").tool == "nmap");
        CHECK(normalize("sudo -i").tool == "sudo");
        CHECK(command_tools("sudo john hash") == std::vector<std::string>{"john"});
    }

    TEST_CASE("positional that looks like a flag keeps its place") {
        const auto nc = normalize("grep -- -v file");
        CHECK(nc.positionals == std::vector<std::string>{"-v", "file"});
        CHECK(normalize(nc.canonical).canonical == nc.canonical);
    }

    TEST_CASE("empty command is an error") {
        try {
            normalize("   ");
            FAIL("expected AnalyticsError");
        } catch (const AnalyticsError& e) {
            CHECK(e.kind() == AnalyticsErrorKind::empty_command);
        }
    }

    TEST_CASE("normalization is idempotent on random commands") {
        std::mt19937_64 rng(11);
        const std::vector<std::string> words{"nmap", "-p", "10000", "-sV", "--p", "a b", "it's", "-", "--",
                                             "-oN", "x=y", "--wordlist=w", "172.18.1.5", "\"q\"", "-sn"};
        for (int i = 0; i < 2000; ++i) {
            std::string cmd = words[rng() % 3 == 0 ? 0 : rng() % words.size()];
            const auto n = 1 + rng() % 6;
            for (std::size_t k = 0; k < n; ++k) cmd += ' ' + shell_quote(words[rng() % words.size()]);
            if (shell_split(cmd).empty()) continue;
            const auto once = normalize(cmd);
            const auto twice = normalize(once.canonical);
            CHECK(twice.canonical == once.canonical);
            CHECK(twice.options == once.options);
            CHECK(twice.positionals == once.positionals);
        }
    }
}

TEST_SUITE("stats") {
    TEST_CASE("summaries agree with the oracle on random cohorts") {
        std::mt19937_64 rng(42);
        for (int c = 0; c < 200; ++c) {
            const auto n = 1 + rng() % 40;
            std::vector<double> v(n);
            for (auto& x : v) x = static_cast<double>(rng() % 1000) + (c % 2 == 0 ? 0.0 : std::ldexp(rng() % 997, -7));
            const auto got = describe(v);
            const auto want = oracle::describe(v);
            REQUIRE(got);
            CHECK(got->n == want.n);
            CHECK(rel_close(got->total, want.total, 1e-9));
            CHECK(got->min == want.min);
            CHECK(got->max == want.max);
            CHECK(rel_close(got->median, want.median, 1e-9));
            CHECK(rel_close(got->mean, want.mean, 1e-9));
            CHECK(rel_close(got->stdev, want.stdev, 1e-9));
        }
        CHECK_FALSE(describe(std::vector<double>{}).has_value());
        CHECK(describe(std::vector<double>{5})->stdev == 0.0);
    }

    TEST_CASE("average ranks with ties") {
        const std::vector<double> v{10, 20, 10, 30, 20, 20};
        CHECK(average_ranks(v) == oracle::ranks(v));
        CHECK(average_ranks(v) == std::vector<double>{1.5, 4, 1.5, 6, 4, 4});
    }

    TEST_CASE("spearman agrees with the oracle on tied vectors") {
        std::mt19937_64 rng(7);
        for (int c = 0; c < 100; ++c) {
            const auto n = 3 + rng() % 30;
            std::vector<double> x(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = static_cast<double>(rng() % 6);
                y[i] = static_cast<double>(rng() % 6);
            }
            const auto got = spearman(x, y);
            const auto want = oracle::spearman(x, y);
            CHECK(got.rho.has_value() == want.has_value());
            if (got.rho && want) CHECK(std::fabs(*got.rho - *want) <= 1e-12);
        }
    }

    TEST_CASE("small-sample p-values match an exact permutation test") {
        std::mt19937_64 rng(9);
        for (int c = 0; c < 60; ++c) {
            const auto n = 3 + rng() % 6;  // 3..8
            std::vector<double> x(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = static_cast<double>(rng() % 5);
                y[i] = static_cast<double>(rng() % 7);
            }
            const auto got = spearman(x, y);
            if (!got.rho) continue;
            REQUIRE(got.p_value);
            CHECK(got.method == PValueMethod::exact_permutation);
            CHECK(std::fabs(*got.p_value - oracle::exact_p(x, y)) <= 0.02);
        }
    }

    TEST_CASE("monotone and affine behaviour is exact") {
        std::mt19937_64 rng(5);
        for (int c = 0; c < 50; ++c) {
            const auto n = 3 + rng() % 40;
            std::vector<double> x(n), up(n), down(n), affine(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = static_cast<double>(i) + std::ldexp(rng() % 100, -8);
                up[i] = std::exp(x[i] / 10.0);
                down[i] = -x[i] * x[i];
            }
            CHECK(*spearman(x, up).rho == 1.0);
            CHECK(*spearman(x, down).rho == -1.0);
            std::vector<double> y(n);
            for (auto& v : y) v = static_cast<double>(rng() % 10);
            const auto base = spearman(x, y);
            const double a = 0.5 + static_cast<double>(rng() % 100), b = static_cast<double>(rng() % 1000) - 500;
            for (std::size_t i = 0; i < n; ++i) affine[i] = a * y[i] + b;
            const auto moved = spearman(x, affine);
            CHECK(moved.rho == base.rho);
            CHECK(moved.p_value == base.p_value);
        }
    }

    TEST_CASE("degenerate inputs") {
        const std::vector<double> flat{1, 1, 1, 1};
        const std::vector<double> x{1, 2, 3, 4};
        CHECK_FALSE(spearman(x, flat).rho.has_value());
        CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), AnalyticsError);
        CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2, 3}), AnalyticsError);
        const auto big = spearman(std::vector<double>(12, 0.0), std::vector<double>(12, 0.0));
        CHECK_FALSE(big.rho.has_value());
    }

    TEST_CASE("large samples use the t approximation") {
        std::vector<double> x(30), y(30);
        for (int i = 0; i < 30; ++i) {
            x[i] = i;
            y[i] = (i * 7) % 30;
        }
        const auto r = spearman(x, y);
        CHECK(r.method == PValueMethod::t_approximation);
        REQUIRE(r.p_value);
        CHECK(*r.p_value >= 0.0);
        CHECK(*r.p_value <= 1.0);
        CHECK(spearman_t_pvalue(0.0, 30) == doctest::Approx(1.0));
        CHECK(spearman_t_pvalue(0.9, 30) < 1e-6);
    }
}

TEST_SUITE("analytics") {
    TEST_CASE("per-session counts and cohort summary") {
        SessionMap sessions;
        const int sizes[] = {5, 68, 358};
        for (int s = 0; s < 3; ++s) {
            const auto id = std::to_string(s + 1);
            for (int i = 0; i < sizes[s]; ++i) {
                sessions[id].push_back(make_record("ls", i, i % 2 == 0 ? CommandType::bash : CommandType::msf, id));
            }
        }
        const auto t = session_stats(sessions);
        REQUIRE(t.both);
        CHECK(t.both->min == 5);
        CHECK(t.both->median == 68);
        CHECK(t.both->max == 358);
        CHECK(t.both->total == 431);
        CHECK(t.sessions.size() == 3);
        CHECK(t.sessions[0].bash == 3);
        CHECK(t.sessions[0].msf == 2);
        CHECK_FALSE(session_stats({}).both.has_value());
    }

    TEST_CASE("Table II gaps") {
        const auto g = gap_series(table2());
        CHECK(g.gaps == std::vector<std::int64_t>{55, 136, 3, 12, 44, 7});
        CHECK(g.duration_s == 257);
        CHECK(g.commands == 7);
        REQUIRE(g.gap_summary);
        CHECK(g.gap_summary->mean == doctest::Approx(257.0 / 6.0));
        CHECK(g.gap_summary->median == 28.0);

        auto shuffled = table2();
        std::reverse(shuffled.begin(), shuffled.end());
        CHECK(gap_series(shuffled).gaps == g.gaps);
        CHECK_FALSE(gap_series({make_record("ls", 0)}).gap_summary.has_value());
        CHECK(gap_series({}).duration_s == 0);
    }

    TEST_CASE("gaps always sum to the duration") {
        std::mt19937_64 rng(1);
        for (int i = 0; i < 100; ++i) {
            const auto g = gap_series(testsupport::random_session(rng, "1", 1 + rng() % 30));
            std::int64_t sum = 0;
            for (auto x : g.gaps) {
                CHECK(x >= 0);
                sum += x;
            }
            CHECK(sum == g.duration_s);
        }
    }

    TEST_CASE("cohort gap row") {
        SessionMap m;
        m["1"] = table2();
        m["2"] = {make_record("a", 0, CommandType::bash, "2"), make_record("b", 10, CommandType::bash, "2"),
                  make_record("c", 40, CommandType::bash, "2")};
        const auto c = cohort_gaps(m);
        REQUIRE(c.gap);
        CHECK(c.gap->sessions == 2);
        CHECK(c.gap->min == 3);
        CHECK(c.gap->max == 136);
        CHECK(c.gap->median == doctest::Approx((28.0 + 20.0) / 2));
        CHECK(c.gap->mean == doctest::Approx((257.0 / 6 + 20.0) / 2));
        REQUIRE(c.duration);
        CHECK(c.duration->max == 257);
        CHECK(c.duration->min == 40);
    }

    TEST_CASE("tool frequency counts every segment") {
        const auto f = tool_frequency({make_record("nmap a; nmap b", 0), make_record("ls | grep x", 1),
                                       make_record("nmap c", 2)});
        REQUIRE(f.size() == 3);
        CHECK(f[0] == ToolCount{"nmap", 3});
    }

    TEST_CASE("first action classes") {
        FirstActionOptions o;
        o.targets = {*Ipv4::parse("172.18.1.5")};
        const auto t = first_action(table2(), o);
        CHECK(t.cls == FirstActionClass::task_start);
        CHECK(t.matched_tool == "nmap");
        CHECK(t.first.size() == 5);

        const auto orient = first_action({make_record("ifconfig; ping 172.18.1.1", 0), make_record("ls", 1)}, o);
        CHECK(orient.cls == FirstActionClass::orientation);

        const auto off = first_action({make_record("firefox", 0), make_record("vim notes", 1)}, o);
        CHECK(off.cls == FirstActionClass::off_task);

        CHECK(first_action({}, o).cls == FirstActionClass::unknown);
        CHECK(is_orientation_command("pwd; ls -la"));
        CHECK(is_orientation_command("nmap --help"));
        CHECK_FALSE(is_orientation_command("nmap -sV x"));
    }
}
