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

#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>
#include <unistd.h>

#include "cmdtrace/detectors.hpp"
#include "cmdtrace/normalize.hpp"
#include "cmdtrace/record.hpp"
#include "cmdtrace/stats.hpp"
#include "cmdtrace/store.hpp"
#include "cmdtrace/syslog_frame.hpp"

using namespace cmdtrace;

namespace {

constexpr std::string_view kLine =
    R"(Jul 03 2020 8:09:25 username="root" attacker src="10.1.135.83" wd="/home" cmd="nmap -sV -p 10000 172.18.1.5" cmd_type="bash-command" sid="1")";

CommandRecord sample(std::int64_t i) {
    auto r = parse_local_line(kLine, std::chrono::minutes(60));
    r.timestamp = Timestamp::from_epoch_micros(r.timestamp.epoch_micros() + i * 1'000'000, r.timestamp.offset);
    return r;
}

void BM_ParseLocalLine(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(parse_local_line(kLine, std::chrono::minutes(60)));
}
BENCHMARK(BM_ParseLocalLine);

void BM_CanonicalJsonRoundTrip(benchmark::State& state) {
    const auto json = to_canonical_json(sample(0));
    for (auto _ : state) benchmark::DoNotOptimize(to_canonical_json(parse_canonical_json(json)));
}
BENCHMARK(BM_CanonicalJsonRoundTrip);

void BM_IngestFrame(benchmark::State& state) {
    const auto frame = frame_record(sample(0));
    for (auto _ : state) benchmark::DoNotOptimize(ingest_frame(frame));
}
BENCHMARK(BM_IngestFrame);

void BM_Normalize(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(normalize("sudo nmap   -sV  --p 10000 -T4 -oN 'scan out.txt' 172.18.1.5"));
}
BENCHMARK(BM_Normalize);

void BM_Spearman(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(rng() % 50);
        y[i] = static_cast<double>(rng() % 50);
    }
    for (auto _ : state) benchmark::DoNotOptimize(spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(8)->Arg(9)->Arg(100)->Arg(10000);

void BM_EvaluateDetectors(benchmark::State& state) {
    DetectorContext ctx;
    ctx.targets = {*Ipv4::parse("172.18.1.5")};
    ctx.cidrs = {*Cidr::parse("172.18.1.0/24")};
    ctx.router_addresses = {*Ipv4::parse("172.18.1.1")};
    std::int64_t i = 0;
    MsfSessionState st;
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(sample(i++), st, ctx));
}
BENCHMARK(BM_EvaluateDetectors);

void BM_StoreCommit(benchmark::State& state) {
    char tmpl[] = "/tmp/cmdtrace-bench-XXXXXX";
    const std::filesystem::path dir = mkdtemp(tmpl);
    {
        CentralStore store(dir, StoreOptions{state.range(0) != 0});
        std::int64_t i = 0;
        for (auto _ : state) benchmark::DoNotOptimize(store.commit(sample(i++)));
    }
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_StoreCommit)->Arg(0)->Arg(1)->ArgName("fsync");

}  // namespace

BENCHMARK_MAIN();
