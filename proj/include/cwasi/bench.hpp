/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_BENCH_HPP_
#define CWASI_BENCH_HPP_

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cwasi/bytes.hpp"
#include "cwasi/coordinator.hpp"

namespace cwasi::bench {

enum class Pattern { Sequential, FanOut, FanIn };

std::string_view pattern_name(Pattern pattern) noexcept;

/// "sequential", "fanout", "fanin"; throws InvalidArgument otherwise.
Pattern parse_pattern(std::string_view name);

/// Parses "2048", "512K", "2M" (binary multiples). Throws InvalidArgument.
uint64_t parse_size(std::string_view text);

/// Synthetic handlers: "echo", "reverse", "checksum" (payload followed by its FNV-1a 64 digest, big-endian).
Bytes apply_handler(std::string_view handler, ByteView payload);
const std::vector<std::string>& handler_names();

struct WorkloadConfig {
    Pattern pattern = Pattern::Sequential;
    CommunicationMode mode = CommunicationMode::LocalBuffer;
    uint64_t payload_size = 0;
    uint32_t degree = 1;
    uint32_t iterations = 10;
    uint32_t warmup = 2;
    uint32_t concurrency = 0; // 0: min(degree, 8)
    bool one_shot = false;    // sequential local mode only: fresh one-shot receiver per request
    std::string handler = "echo";
    std::string broker_address;          // empty: start an in-process broker when needed
    std::filesystem::path running_path;  // empty: a fresh temporary directory
    std::chrono::milliseconds timeout = local::kDefaultTimeout;
    std::chrono::milliseconds sample_interval {100};

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;

    uint32_t effective_concurrency() const noexcept;
};

struct BenchRecord {
    Pattern pattern = Pattern::Sequential;
    CommunicationMode mode = CommunicationMode::LocalBuffer;
    uint64_t payload_size = 0;
    uint32_t degree = 1;
    uint32_t iteration = 0;
    double latency_s = 0;
    double throughput_rps = 0;
    std::optional<double> cpu_percent;
    std::optional<uint64_t> rss_kb;
    double timestamp = 0; // completion, seconds since the Unix epoch

    bool operator==(const BenchRecord&) const = default;
};

/// Raw monotonic timings behind one record, seconds on the steady clock.
struct RequestTiming {
    double started_s = 0;
    double finished_s = 0;
};

struct Summary {
    uint64_t requests = 0;
    double elapsed_s = 0;
    double throughput_rps = 0;
    double median_latency_s = 0;
    double mean_latency_s = 0;
    double p95_latency_s = 0;
};

struct BenchRun {
    WorkloadConfig config;
    std::vector<BenchRecord> records;   // measured requests only
    std::vector<RequestTiming> timings; // parallel to records
    uint64_t warmup_requests = 0;
    Summary summary;
    std::set<std::string> tags_seen; // fan-in: source tags observed at the receiver
    std::optional<std::string> error; // set when the run aborted; records are partial

    bool complete() const noexcept { return !error.has_value(); }
};

/// requests / elapsed. Throws ZeroElapsed when elapsed <= 0.
double throughput(uint64_t requests, double elapsed_s);

double median(std::vector<double> values);

/// Statistics over records; elapsed spans the first start to the last finish.
Summary summarize(const std::vector<BenchRecord>& records, const std::vector<RequestTiming>& timings);

BenchRun run_sequential(const WorkloadConfig& config);
BenchRun run_fanout(const WorkloadConfig& config);
BenchRun run_fanin(const WorkloadConfig& config);

/// Dispatches on config.pattern.
BenchRun run_workload(const WorkloadConfig& config);

struct ResourceSample {
    double cpu_percent = 0;
    uint64_t rss_kb = 0;
};

/// CPU share over interval and resident set size from /proc. Throws Unsupported when unavailable.
ResourceSample sample_resources(pid_t pid, std::chrono::milliseconds interval = std::chrono::milliseconds(100));

/// Background sampler of one process; latest() is absent until the first interval elapsed.
class ResourceSampler {
public:
    ResourceSampler(pid_t pid, std::chrono::milliseconds interval);
    ResourceSampler(const ResourceSampler&) = delete;
    ResourceSampler& operator=(const ResourceSampler&) = delete;
    ~ResourceSampler();

    std::optional<ResourceSample> latest() const;

private:
    struct State;
    std::shared_ptr<State> state_;
};

inline constexpr std::string_view kCsvHeader
    = "pattern,mode,payload_size,degree,iteration,latency_s,throughput_rps,cpu_percent,rss_kb,timestamp";

/// Header plus one row per record. Throws InvalidArgument for no records.
std::string to_csv(const std::vector<BenchRecord>& records);

/// Throws InvalidArgument for no records, IoFailure when the file cannot be written.
void emit_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path);

/// Inverse of to_csv. Throws DecodeError.
std::vector<BenchRecord> parse_csv(std::string_view text);

} // namespace cwasi::bench

#endif
