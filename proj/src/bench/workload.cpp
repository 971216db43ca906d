/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "cwasi/bench.hpp"
#include "cwasi/error.hpp"
#include "cwasi/guest/native_engine.hpp"

namespace fs = std::filesystem;

namespace cwasi::bench {

namespace {

using guest::FunctionType;
using guest::GuestInstance;
using guest::ValueType;

constexpr std::string_view kSource = "fna";
constexpr std::string_view kTarget = "fnb";
constexpr std::string_view kHandleExport = "handle";
constexpr uint32_t kDefaultConcurrencyCap = 8;
constexpr char kTagEnd = '|';
constexpr size_t kMaxTagLength = 32;

double steady_seconds()
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

double unix_seconds()
{
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

FunctionType span_call_type()
{
    return FunctionType {{ValueType::I32, ValueType::I32}, {ValueType::I64}};
}

void put_leb(Bytes& out, uint32_t value)
{
    do {
        uint8_t byte = value & 0x7f;
        value >>= 7;
        out.push_back(value ? byte | 0x80 : byte);
    } while (value);
}

void put_name(Bytes& out, std::string_view name)
{
    put_leb(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
}

struct ImportDecl {
    std::string module;
    std::string name;
    FunctionType type;
};

/// Binary module carrying only a type and an import section, enough for import discovery.
Bytes import_declaring_module(const std::vector<ImportDecl>& imports)
{
    Bytes out {0x00, 0x61, 0x73, 0x6d, 0x01, 0x00, 0x00, 0x00};
    if (imports.empty()) {
        return out;
    }

    Bytes types;
    put_leb(types, static_cast<uint32_t>(imports.size()));
    for (const auto& import : imports) {
        types.push_back(0x60);
        put_leb(types, static_cast<uint32_t>(import.type.params.size()));
        for (auto t : import.type.params) {
            types.push_back(static_cast<uint8_t>(t));
        }
        put_leb(types, static_cast<uint32_t>(import.type.results.size()));
        for (auto t : import.type.results) {
            types.push_back(static_cast<uint8_t>(t));
        }
    }

    Bytes section;
    put_leb(section, static_cast<uint32_t>(imports.size()));
    for (uint32_t i = 0; i < imports.size(); ++i) {
        put_name(section, imports[i].module);
        put_name(section, imports[i].name);
        section.push_back(0x00);
        put_leb(section, i);
    }

    out.push_back(0x01);
    put_leb(out, static_cast<uint32_t>(types.size()));
    out.insert(out.end(), types.begin(), types.end());
    out.push_back(0x02);
    put_leb(out, static_cast<uint32_t>(section.size()));
    out.insert(out.end(), section.begin(), section.end());
    return out;
}

void write_file(const fs::path& path, ByteView bytes)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        raise(Errc::IoFailure, "cannot write " + path.string());
    }
}

std::optional<std::string> read_tag(ByteView payload)
{
    auto limit = std::min(payload.size(), kMaxTagLength);
    for (size_t i = 0; i < limit; ++i) {
        if (payload[i] == static_cast<uint8_t>(kTagEnd)) {
            return std::string(payload.begin(), payload.begin() + static_cast<ptrdiff_t>(i));
        }
    }
    return std::nullopt;
}

Bytes base_payload(uint64_t size)
{
    Bytes payload(size);
    std::mt19937_64 rng(0x5eed0f00dULL ^ size);
    size_t i = 0;
    for (; i + 8 <= size; i += 8) {
        uint64_t word = rng();
        std::memcpy(payload.data() + i, &word, 8);
    }
    for (; i < size; ++i) {
        payload[i] = static_cast<uint8_t>(rng());
    }
    return payload;
}

/// Stamps "<tag>|" over the start of the payload when it fits.
Bytes tagged_payload(const Bytes& base, const std::string& tag)
{
    Bytes payload = base;
    if (tag.size() + 1 <= payload.size()) {
        std::copy(tag.begin(), tag.end(), payload.begin());
        payload[tag.size()] = static_cast<uint8_t>(kTagEnd);
    }
    return payload;
}

/**
 * Everything a run needs: bundles, registry, broker, the target function's
 * receivers and a dispatcher acting for the source function.
 */
class Environment {
public:
    explicit Environment(const WorkloadConfig& config)
        : config_(config)
    {
        char pattern[] = "/tmp/cwasi-bench-XXXXXX";
        if (!::mkdtemp(pattern)) {
            raise(Errc::IoFailure, "cannot create a work directory under /tmp");
        }
        work_ = pattern;

        try {
            setup();
        } catch (...) {
            teardown();
            throw;
        }
    }

    ~Environment() { teardown(); }

    std::set<std::string> tags() const
    {
        std::lock_guard lock(tags_->mutex);
        return tags_->seen;
    }

    /// One dispatch from source; returns the sender-side latency in seconds.
    double request(std::string_view source, ByteView payload, Bytes& reply, RequestTiming& timing)
    {
        if (config_.one_shot) {
            start_target(local::ReceiverMode::OneShot);
        }

        if (config_.mode == CommunicationMode::Embedded) {
            auto instance = engine_.instantiate(primary_, std::span(&target_, 1), hosts_);
            auto span = instance->write_bytes(payload);
            uint64_t args[2] = {span.pointer, span.length};

            auto t0 = steady_seconds();
            auto result = instance->call_import(kTarget, kHandleExport, args);
            auto t1 = steady_seconds();

            reply = instance->read_span(guest::unpack_span(result.at(0)));
            timing = RequestTiming {t0, t1};
            return t1 - t0;
        }

        auto instance = engine_.instantiate(primary_, {}, hosts_);
        auto envelope = guest::encode_envelope(guest::DispatchEnvelope {
            std::string(source), std::string(kTarget), Bytes(payload.begin(), payload.end())});
        auto span = instance->write_bytes(envelope);
        envelope = Bytes();

        auto t0 = steady_seconds();
        auto packed = dispatcher_->dispatch(*instance, span.pointer, span.length);
        auto t1 = steady_seconds();

        auto region = instance->view_span(guest::unpack_span(packed));
        if (region.empty() || region[0] != kReplyOk) {
            raise(Errc::InfraUnavailable, "dispatch to " + std::string(kTarget) + " failed");
        }
        reply.assign(region.begin() + 1, region.end());
        timing = RequestTiming {t0, t1};

        if (config_.one_shot) {
            target_function_->wait();
            target_function_.reset();
        }
        return t1 - t0;
    }

private:
    struct TagSet {
        mutable std::mutex mutex;
        std::set<std::string> seen;
    };

    void observe(ByteView payload) const
    {
        if (config_.pattern != Pattern::FanIn) {
            return;
        }
        if (auto tag = read_tag(payload)) {
            std::lock_guard lock(tags_->mutex);
            tags_->seen.insert(*tag);
        }
    }

    guest::NativeModule target_module()
    {
        guest::NativeModule m;
        m.imports.push_back({std::string(guest::kHostModule), std::string(guest::kInputImport),
            FunctionType {{}, {ValueType::I64}}});

        auto handler = config_.handler;
        m.exports.emplace(std::string(kHandleExport),
            guest::NativeExport {span_call_type(),
                [this, handler](GuestInstance& g, std::span<const uint64_t> args) -> std::vector<uint64_t> {
                    auto data = g.view_span(guest::MemorySpan {
                        static_cast<uint32_t>(args[0]), static_cast<uint32_t>(args[1])});
                    observe(data);
                    return {guest::pack_span(g.write_bytes(apply_handler(handler, data)))};
                }});

        m.exports.emplace(std::string(guest::kEntryExport),
            guest::NativeExport {FunctionType {},
                [this, handler](GuestInstance& g, std::span<const uint64_t>) -> std::vector<uint64_t> {
                    auto input = g.call_import(guest::kHostModule, guest::kInputImport).at(0);
                    auto data = g.view_span(guest::unpack_span(input));
                    observe(data);
                    g.set_output(apply_handler(handler, data));
                    return {};
                }});
        return m;
    }

    guest::NativeModule source_module(bool embed)
    {
        guest::NativeModule m;
        m.imports.push_back({std::string(guest::kHostModule), std::string(guest::kDispatchImport),
            guest::dispatch_type()});
        m.imports.push_back({std::string(guest::kHostModule), std::string(guest::kInputImport),
            FunctionType {{}, {ValueType::I64}}});
        if (embed) {
            m.imports.push_back({std::string(kTarget), std::string(kHandleExport), span_call_type()});
        }

        // run: forward the input to the target and keep the reply region as output.
        m.exports.emplace(std::string(guest::kEntryExport),
            guest::NativeExport {FunctionType {},
                [embed](GuestInstance& g, std::span<const uint64_t>) -> std::vector<uint64_t> {
                    auto input = guest::unpack_span(g.call_import(guest::kHostModule, guest::kInputImport).at(0));
                    uint64_t reply = 0;
                    if (embed) {
                        uint64_t args[2] = {input.pointer, input.length};
                        reply = g.call_import(kTarget, kHandleExport, args).at(0);
                    } else {
                        auto envelope = guest::encode_envelope(
                            guest::DispatchEnvelope {std::string(kSource), std::string(kTarget), g.read_span(input)});
                        auto span = g.write_bytes(envelope);
                        uint64_t args[2] = {span.pointer, span.length};
                        reply = g.call_import(guest::kHostModule, guest::kDispatchImport, args).at(0);
                    }
                    g.set_output(g.read_span(guest::unpack_span(reply)));
                    return {};
                }});
        return m;
    }

    FunctionSpec make_spec(std::string_view name, bool secondary)
    {
        FunctionSpec spec;
        spec.args = {std::string(name)};
        if (secondary) {
            spec.annotations.emplace(std::string(kRoleAnnotation), std::string(kRoleSecondary));
        }
        spec.bundle_path = work_ / "bundles" / name;
        return spec;
    }

    void start_target(local::ReceiverMode receiver_mode)
    {
        CoordinatorOptions options;
        options.broker_address = config_.mode == CommunicationMode::NetworkedBuffer ? broker_address_ : "";
        options.receiver_mode = receiver_mode;
        options.timeout = config_.timeout;
        target_function_ = coordinate(target_spec_, *registry_, engine_, options);
    }

    void setup()
    {
        bool embed = config_.mode == CommunicationMode::Embedded;

        source_spec_ = make_spec(kSource, false);
        target_spec_ = make_spec(kTarget, true);
        write_spec(source_spec_);
        write_spec(target_spec_);

        std::vector<ImportDecl> source_imports {
            {std::string(guest::kHostModule), std::string(guest::kDispatchImport), guest::dispatch_type()},
            {std::string(guest::kHostModule), std::string(guest::kInputImport), FunctionType {{}, {ValueType::I64}}},
        };
        if (embed) {
            source_imports.push_back({std::string(kTarget), std::string(kHandleExport), span_call_type()});
        }
        auto target_bytes = import_declaring_module(
            {{std::string(guest::kHostModule), std::string(guest::kInputImport), FunctionType {{}, {ValueType::I64}}}});
        write_file(source_spec_.artifact_path(), import_declaring_module(source_imports));
        write_file(target_spec_.artifact_path(), target_bytes);
        write_file(work_ / "snapshot" / (std::string(kTarget) + ".wasm"), target_bytes);

        engine_.define(std::string(kSource), source_module(embed));
        engine_.define(std::string(kTarget), target_module());

        primary_ = guest::ModuleArtifact::load(source_spec_.artifact_path());
        target_ = guest::ModuleArtifact::load(target_spec_.artifact_path());

        auto running = config_.running_path.empty() ? work_ / "run" : config_.running_path;
        registry_.emplace(RunningRegistry::create(running));
        if (config_.mode != CommunicationMode::NetworkedBuffer) {
            registry_->register_function(target_spec_);
            registered_ = true;
        }

        if (config_.mode == CommunicationMode::NetworkedBuffer) {
            if (config_.broker_address.empty()) {
                broker_ = broker::Broker::serve("127.0.0.1:0");
                broker_address_ = broker_->address();
            } else {
                broker_address_ = config_.broker_address;
                broker::BrokerClient::connect(broker_address_, config_.timeout);
            }
        }

        if (!embed && !config_.one_shot) {
            start_target(local::ReceiverMode::Persistent);
        }

        DispatcherOptions options;
        options.broker_address = broker_address_;
        options.timeout = config_.timeout;
        options.source = std::string(kSource);
        dispatcher_ = std::make_unique<Dispatcher>(*registry_, options);
        hosts_ = {dispatcher_->host_function()};

        // The requested mode must be the one the selection rule picks for this layout.
        bool embeddable = !discover_embeddings(read_imports(primary_), SnapshotStore(work_ / "snapshot")).empty();
        auto selected = select_mode(source_spec_, kTarget, *registry_, read_hint(source_spec_), embeddable);
        if (selected != config_.mode) {
            raise(Errc::InfraUnavailable, "layout selects " + std::string(mode_name(selected)) + " mode, not "
                    + std::string(mode_name(config_.mode)));
        }
    }

    void teardown() noexcept
    {
        try {
            target_function_.reset();
            if (registered_ && registry_) {
                registry_->unregister_function(target_spec_.bundle_name());
            }
            dispatcher_.reset();
            broker_.reset();
        } catch (...) {
        }
        std::error_code ec;
        fs::remove_all(work_, ec);
    }

    WorkloadConfig config_;
    fs::path work_;
    FunctionSpec source_spec_;
    FunctionSpec target_spec_;
    guest::NativeEngine engine_;
    guest::ModuleArtifact primary_;
    guest::ModuleArtifact target_;
    std::optional<RunningRegistry> registry_;
    bool registered_ = false;
    std::unique_ptr<broker::Broker> broker_;
    std::string broker_address_;
    std::unique_ptr<RunningFunction> target_function_;
    std::unique_ptr<Dispatcher> dispatcher_;
    std::vector<guest::HostFunction> hosts_;
    std::shared_ptr<TagSet> tags_ = std::make_shared<TagSet>();
};

struct Completed {
    double latency_s = 0;
    RequestTiming timing;
    double timestamp = 0;
};

BenchRun run(const WorkloadConfig& config, Pattern pattern)
{
    BenchRun result;
    result.config = config;
    result.config.pattern = pattern;
    result.config.validate();

    const auto& cfg = result.config;
    const uint32_t batch = pattern == Pattern::Sequential ? 1 : cfg.degree;
    const uint32_t workers = std::min(cfg.effective_concurrency(), batch);

    try {
        Environment env(cfg);
        ResourceSampler sampler(::getpid(), cfg.sample_interval);

        const Bytes base = base_payload(cfg.payload_size);
        const Bytes base_expected = apply_handler(cfg.handler, base);

        auto source_name = [&](uint32_t index) {
            return pattern == Pattern::FanIn ? std::string(kSource) + "-" + std::to_string(index) : std::string(kSource);
        };

        for (uint32_t round = 0; round < cfg.warmup + cfg.iterations; ++round) {
            const bool measured = round >= cfg.warmup;
            std::vector<Completed> done(batch);
            std::atomic<uint32_t> next {0};
            std::mutex error_mutex;
            std::optional<std::string> failure;

            auto worker = [&] {
                for (;;) {
                    uint32_t index = next.fetch_add(1);
                    if (index >= batch) {
                        return;
                    }
                    {
                        std::lock_guard lock(error_mutex);
                        if (failure) {
                            return;
                        }
                    }
                    try {
                        Bytes reply;
                        RequestTiming timing;
                        double latency = 0;
                        if (pattern == Pattern::FanIn) {
                            auto tag = source_name(index);
                            auto payload = tagged_payload(base, tag);
                            latency = env.request(tag, payload, reply, timing);
                            if (reply != apply_handler(cfg.handler, payload)) {
                                raise(Errc::Internal, "reply mismatch for " + tag);
                            }
                        } else {
                            latency = env.request(kSource, base, reply, timing);
                            if (reply != base_expected) {
                                raise(Errc::Internal, "reply mismatch");
                            }
                        }
                        done[index] = Completed {latency, timing, unix_seconds()};
                    } catch (const std::exception& e) {
                        std::lock_guard lock(error_mutex);
                        if (!failure) {
                            failure = e.what();
                        }
                        return;
                    }
                }
            };

            if (workers <= 1) {
                worker();
            } else {
                std::vector<std::thread> threads;
                for (uint32_t i = 0; i < workers; ++i) {
                    threads.emplace_back(worker);
                }
                for (auto& t : threads) {
                    t.join();
                }
            }
            if (failure) {
                raise(Errc::InfraUnavailable, *failure);
            }

            if (!measured) {
                result.warmup_requests += batch;
                continue;
            }

            double first = done.front().timing.started_s;
            double last = done.front().timing.finished_s;
            for (const auto& c : done) {
                first = std::min(first, c.timing.started_s);
                last = std::max(last, c.timing.finished_s);
            }
            double batch_rps = throughput(batch, last - first);
            auto sample = sampler.latest();

            for (const auto& c : done) {
                BenchRecord r;
                r.pattern = pattern;
                r.mode = cfg.mode;
                r.payload_size = cfg.payload_size;
                r.degree = cfg.degree;
                r.iteration = round - cfg.warmup;
                r.latency_s = c.latency_s;
                r.throughput_rps = batch_rps;
                if (sample) {
                    r.cpu_percent = sample->cpu_percent;
                    r.rss_kb = sample->rss_kb;
                }
                r.timestamp = c.timestamp;
                result.records.push_back(r);
                result.timings.push_back(c.timing);
            }
        }

        result.tags_seen = env.tags();
    } catch (const Error& e) {
        result.error = e.code() == Errc::InfraUnavailable ? std::string(e.what())
                                                          : Error(Errc::InfraUnavailable, e.what()).what();
    } catch (const std::exception& e) {
        result.error = Error(Errc::InfraUnavailable, e.what()).what();
    }

    if (!result.records.empty()) {
        result.summary = summarize(result.records, result.timings);
    }
    return result;
}

} // namespace

void WorkloadConfig::validate() const
{
    if (degree < 1) {
        raise(Errc::InvalidArgument, "degree must be at least 1");
    }
    if (iterations < 1) {
        raise(Errc::InvalidArgument, "iterations must be at least 1");
    }
    if (payload_size > local::kDefaultMaxFrame - 16) {
        raise(Errc::InvalidArgument, "payload exceeds the frame limit");
    }
    if (payload_size > UINT32_MAX / 4) {
        raise(Errc::InvalidArgument, "payload does not fit guest memory");
    }
    if (one_shot && (pattern != Pattern::Sequential || mode != CommunicationMode::LocalBuffer)) {
        raise(Errc::InvalidArgument, "one-shot receivers apply to sequential local runs only");
    }
    if (std::find(handler_names().begin(), handler_names().end(), handler) == handler_names().end()) {
        raise(Errc::InvalidArgument, "unknown handler '" + handler + "'");
    }
    if (sample_interval.count() <= 0) {
        raise(Errc::InvalidArgument, "sample interval must be positive");
    }
}

uint32_t WorkloadConfig::effective_concurrency() const noexcept
{
    return concurrency ? concurrency : std::min(degree, kDefaultConcurrencyCap);
}

double throughput(uint64_t requests, double elapsed_s)
{
    if (!(elapsed_s > 0)) {
        raise(Errc::ZeroElapsed, "elapsed time must be positive");
    }
    return static_cast<double>(requests) / elapsed_s;
}

double median(std::vector<double> values)
{
    if (values.empty()) {
        return 0;
    }
    std::sort(values.begin(), values.end());
    auto mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
}

Summary summarize(const std::vector<BenchRecord>& records, const std::vector<RequestTiming>& timings)
{
    Summary s;
    s.requests = records.size();
    if (records.empty()) {
        return s;
    }

    std::vector<double> latencies;
    latencies.reserve(records.size());
    for (const auto& r : records) {
        latencies.push_back(r.latency_s);
    }
    s.median_latency_s = median(latencies);
    s.mean_latency_s = std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
    std::sort(latencies.begin(), latencies.end());
    auto rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(latencies.size())));
    s.p95_latency_s = latencies[std::min(latencies.size() - 1, rank ? rank - 1 : 0)];

    if (!timings.empty()) {
        double first = timings.front().started_s;
        double last = timings.front().finished_s;
        for (const auto& t : timings) {
            first = std::min(first, t.started_s);
            last = std::max(last, t.finished_s);
        }
        s.elapsed_s = last - first;
        if (s.elapsed_s > 0) {
            s.throughput_rps = throughput(s.requests, s.elapsed_s);
        }
    }
    return s;
}

BenchRun run_sequential(const WorkloadConfig& config)
{
    return run(config, Pattern::Sequential);
}

BenchRun run_fanout(const WorkloadConfig& config)
{
    return run(config, Pattern::FanOut);
}

BenchRun run_fanin(const WorkloadConfig& config)
{
    return run(config, Pattern::FanIn);
}

BenchRun run_workload(const WorkloadConfig& config)
{
    return run(config, config.pattern);
}

} // namespace cwasi::bench
