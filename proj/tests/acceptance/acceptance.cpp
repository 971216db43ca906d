/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

// Acceptance run: one PASS/FAIL line per primary criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "cwasi/bench.hpp"
#include "cwasi/broker.hpp"
#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"
#include "cwasi/guest/native_engine.hpp"
#include "cwasi/guest/wasm_engine.hpp"
#include "cwasi/linker.hpp"
#include "cwasi/local_buffer.hpp"
#include "cwasi/registry.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace cwasi {
namespace {

using namespace std::chrono_literals;
using testing::TempDir;

// ---- pinned tolerances and sizes ----
constexpr double kLocalVsNetworkRatio = 0.5;    // local median <= 0.5 x network median
constexpr double kEmbeddedVsLocalRatio = 1.0;   // embedded median <= local median
constexpr uint64_t kOrderingPayload = 2u << 20; // 2 MB
constexpr uint32_t kOrderingIterations = 10;
constexpr uint32_t kOrderingWarmup = 2;
constexpr int kEquivalencePayloads = 50;
constexpr size_t kEquivalenceMaxPayload = 8u << 20; // 8 MB
constexpr int kRegistryLayouts = 200;
constexpr int kMaxBundles = 20;
constexpr int kDiscoveryPairs = 100;
constexpr int kMinDualFixtures = 10;
constexpr int kIdentityCases = 10000;
constexpr int kLifecycleCycles = 20;
constexpr double kMinRSquared = 0.9;
constexpr double kFanoutStabilityFactor = 3.0;
constexpr uint64_t kFanoutPayload = 2u << 20;
constexpr double kThroughputRelTolerance = 1e-9;

struct Outcome {
    bool pass = false;
    std::string detail;
};

/// Throws with a message when the condition does not hold.
struct Failure {
    std::string message;
};

void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw Failure {message};
    }
}

std::string fmt(double value)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

// Every bench run seen by any criterion, for the throughput rule.
std::vector<bench::BenchRun> all_runs;

bench::BenchRun measured(bench::WorkloadConfig config)
{
    auto run = bench::run_workload(config);
    require(run.complete(), "bench run failed: " + run.error.value_or(""));
    all_runs.push_back(run);
    return run;
}

// ---------------------------------------------------------------------------

Outcome mode_ordering()
{
    double medians[3] = {};
    for (auto mode : {CommunicationMode::Embedded, CommunicationMode::LocalBuffer, CommunicationMode::NetworkedBuffer}) {
        bench::WorkloadConfig config;
        config.pattern = bench::Pattern::Sequential;
        config.mode = mode;
        config.payload_size = kOrderingPayload;
        config.iterations = kOrderingIterations;
        config.warmup = kOrderingWarmup;
        medians[int(mode)] = measured(config).summary.median_latency_s;
    }
    double embedded = medians[0], local = medians[1], network = medians[2];
    std::string detail = "median embedded=" + fmt(embedded) + "s local=" + fmt(local) + "s network=" + fmt(network)
        + "s (local/network=" + fmt(local / network) + ")";
    bool ok = local <= kLocalVsNetworkRatio * network && embedded <= kEmbeddedVsLocalRatio * local;
    return {ok, detail};
}

// All three modes run the same wasm handler; only the transport differs.
class ModeRig {
public:
    explicit ModeRig(const std::string& handler_fixture)
    {
        snapshot_ = dir_ / "snapshot";
        std::filesystem::create_directories(snapshot_);
        std::filesystem::copy_file(testing::fixture(handler_fixture + ".wasm"), snapshot_ / "fn_utils.wasm");

        // Secondary named "echo" because primary_dispatch addresses that target.
        secondary_.args = {"echo"};
        secondary_.bundle_path = dir_ / "bundles" / "echo";
        secondary_.annotations[std::string(kRoleAnnotation)] = std::string(kRoleSecondary);
        write_spec(secondary_);
        std::filesystem::copy_file(testing::fixture(handler_fixture + ".wasm"), secondary_.bundle_path / "echo.wasm");

        for (auto [name, fixture] : {std::pair {"fna_embed", "primary_embed"}, std::pair {"fna", "primary_dispatch"}}) {
            FunctionSpec spec;
            spec.args = {name};
            spec.bundle_path = dir_ / "bundles" / name;
            write_spec(spec);
            std::filesystem::copy_file(testing::fixture(std::string(fixture) + ".wasm"),
                spec.bundle_path / (std::string(name) + ".wasm"));
            (std::string(name) == "fna" ? dispatching_ : embedding_) = spec;
        }

        CoordinatorOptions options;
        options.broker_address = broker_->address();
        options.receiver_mode = local::ReceiverMode::Persistent;
        target_ = coordinate(secondary_, registry_, engine_, options);
    }

    Bytes call(CommunicationMode mode, ByteView payload)
    {
        CoordinatorOptions options;
        options.broker_address = broker_->address();
        options.input = Bytes(payload.begin(), payload.end());
        const bool local = mode == CommunicationMode::LocalBuffer;
        if (local && !registered_) {
            registry_.register_function(secondary_);
        } else if (!local && registered_) {
            registry_.unregister_function(secondary_.bundle_name());
        }
        registered_ = local;

        if (mode == CommunicationMode::Embedded) {
            options.snapshot_root = snapshot_;
            auto primary = coordinate(embedding_, registry_, engine_, options);
            require(primary->wait() == guest::InstanceState::Finished && primary->instance()->trap_message().empty(),
                "embedded primary failed: " + primary->instance()->trap_message());
            return primary->instance()->take_output();
        }
        auto primary = coordinate(dispatching_, registry_, engine_, options);
        require(primary->wait() == guest::InstanceState::Finished && primary->instance()->trap_message().empty(),
            "dispatching primary failed: " + primary->instance()->trap_message());
        const auto& counters = primary->dispatcher().counters();
        require((local ? counters.local_requests : counters.network_requests) == 1,
            std::string("dispatch did not use the ") + std::string(mode_name(mode)) + " transport");
        auto region = parse_reply_region(primary->instance()->output());
        require(region.ok, "dispatch reported a transport failure");
        return region.body;
    }

private:
    TempDir dir_ {"cwasi-accept-rig"};
    std::filesystem::path snapshot_;
    RunningRegistry registry_ = RunningRegistry::create(dir_ / "run");
    std::unique_ptr<broker::Broker> broker_ = broker::Broker::serve("127.0.0.1:0");
    guest::WasmEngine engine_;
    FunctionSpec secondary_, dispatching_, embedding_;
    std::unique_ptr<RunningFunction> target_;
    bool registered_ = false;
};

Outcome correctness_equivalence()
{
    std::mt19937_64 rng(testing::kPropertySeed + 1000);
    const std::pair<const char*, std::function<Bytes(ByteView)>> handlers[] = {
        {"echo", [](ByteView p) { return Bytes(p.begin(), p.end()); }},
        {"reverse", oracle::reverse},
        {"checksum", oracle::checksum_tag},
    };
    std::vector<Bytes> payloads;
    for (int i = 0; i < kEquivalencePayloads; ++i) {
        // Pin both extremes, then log-uniform sizes in between.
        size_t size = i == 0 ? 0 : i == 1 ? kEquivalenceMaxPayload : testing::random_size(rng, kEquivalenceMaxPayload);
        payloads.push_back(testing::random_bytes(rng, size));
    }
    size_t compared = 0;
    for (const auto& [name, expected_of] : handlers) {
        ModeRig rig(name);
        for (size_t i = 0; i < payloads.size(); ++i) {
            auto expected = expected_of(payloads[i]);
            for (auto mode :
                {CommunicationMode::Embedded, CommunicationMode::LocalBuffer, CommunicationMode::NetworkedBuffer}) {
                auto got = rig.call(mode, payloads[i]);
                require(got == expected, std::string(name) + " payload " + std::to_string(i) + " ("
                        + std::to_string(payloads[i].size()) + " B) differs in " + std::string(mode_name(mode))
                        + " mode");
                ++compared;
            }
        }
    }
    return {true, std::to_string(compared) + " results byte-identical across 3 modes x 3 handlers"};
}

Outcome alg2_oracle()
{
    std::mt19937_64 rng(testing::kPropertySeed + 1001);
    const std::string types = "abcd";
    int queries = 0, not_local = 0, ties = 0;
    for (int layout = 0; layout < kRegistryLayouts; ++layout) {
        TempDir dir("cwasi-accept-reg");
        RunningRegistry registry(dir.path());
        int bundles = int(rng() % (kMaxBundles + 1));
        for (int b = 0; b < bundles; ++b) {
            auto entry = testing::random_string(rng, "abcxyz019_-.", 1, 6);
            if (std::filesystem::exists(dir / entry) || entry == "." || entry == "..") {
                continue;
            }
            switch (rng() % 10) {
            case 0: // malformed JSON
                testing::write_text(dir / entry / "config.json", "{\"args\": [");
                break;
            case 1: // no config at all
                std::filesystem::create_directories(dir / entry);
                break;
            case 2: // a plain file among the directories
                testing::write_text(dir / entry, "not a bundle");
                break;
            case 3: // empty args
                testing::write_config(dir / entry, {});
                break;
            default: {
                std::vector<std::string> args;
                for (int a = 1 + int(rng() % 3); a > 0; --a) {
                    args.push_back(std::string(1, types[rng() % types.size()]));
                }
                testing::write_config(dir / entry, args);
            }
            }
        }
        for (char t : types + "q") {
            std::string target(1, t);
            auto got = registry.ifc_selection(target);
            auto want = oracle::ifc_selection(dir.path().string(), target);
            require(got.has_value() == want.has_value() && (!got || got->string() == *want),
                "layout " + std::to_string(layout) + " target " + target + ": got "
                    + (got ? got->string() : "NotLocal") + ", oracle " + want.value_or("NotLocal"));
            ++queries;
            not_local += !want;
        }
        // Count layouts where several entries carry the same type.
        std::map<std::string, int> seen;
        for (const auto& name : registry.list()) {
            try {
                for (const auto& a : load_spec(dir / name).args) {
                    ties += ++seen[a] == 2;
                }
            } catch (const Error&) {
            }
        }
    }
    return {true, std::to_string(kRegistryLayouts) + " layouts, " + std::to_string(queries) + " queries ("
            + std::to_string(not_local) + " NotLocal, " + std::to_string(ties) + " tie-breaks) match the oracle"};
}

Outcome alg3_oracle()
{
    std::mt19937_64 rng(testing::kPropertySeed + 1002);
    const std::vector<std::string> modules = {"cwasi", "fn_utils", "math", "env", "libc", "crypto", "img"};
    const std::vector<std::string> extensions = {".wasm", ".wat", ".txt", ".wasm.bak", ""};
    size_t found_total = 0;
    for (int pair = 0; pair < kDiscoveryPairs; ++pair) {
        TempDir root("cwasi-accept-snap");
        for (int f = int(rng() % 15); f > 0; --f) {
            std::filesystem::path where = root.path();
            for (int depth = int(rng() % 3); depth > 0; --depth) {
                where /= testing::random_string(rng, "dxy", 1, 2);
            }
            std::filesystem::create_directories(where);
            auto stem = modules[rng() % modules.size()];
            auto file = where / (stem + extensions[rng() % extensions.size()]);
            if (std::filesystem::exists(file)) {
                continue;
            }
            if (rng() % 8 == 0) {
                std::filesystem::create_directories(file); // a directory with a module-like name
            } else {
                testing::write_text(file, "(module)");
            }
        }
        ImportSet imports;
        std::set<std::pair<std::string, std::string>> pairs;
        for (int i = int(rng() % 5); i > 0; --i) {
            Import import {modules[rng() % modules.size()], testing::random_string(rng, testing::kNameAlphabet, 1, 6)};
            imports.insert(import);
            pairs.insert({import.module, import.name});
        }
        auto got = discover_embeddings(imports, SnapshotStore(root.path()));
        auto want = oracle::discover(pairs, root.path().string());
        std::set<std::string> got_strings;
        for (const auto& p : got) {
            got_strings.insert(p.string());
        }
        require(got_strings == want, "pair " + std::to_string(pair) + ": discovery differs from the oracle");
        found_total += got.size();
    }

    int dual = 0;
    for (const auto& entry : std::filesystem::directory_iterator(testing::fixture(""))) {
        if (entry.path().extension() != ".wat") {
            continue;
        }
        auto binary = std::filesystem::path(entry.path()).replace_extension(".wasm");
        if (!std::filesystem::exists(binary)) {
            continue;
        }
        auto text = testing::read_file(entry.path());
        auto from_text = scan_text_imports(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
        auto from_binary = parse_binary_imports(testing::read_file(binary));
        require(from_text == from_binary, entry.path().filename().string() + ": text and binary imports differ");
        ++dual;
    }
    require(dual >= kMinDualFixtures, "only " + std::to_string(dual) + " dual-encoded fixtures");
    return {true, std::to_string(kDiscoveryPairs) + " pairs match the oracle (" + std::to_string(found_total)
            + " embeddings found); " + std::to_string(dual) + " dual-encoded fixtures agree"};
}

Outcome alg1_observability()
{
    TempDir dir("cwasi-accept-alg1");
    auto registry = RunningRegistry::create(dir / "run");
    auto broker = broker::Broker::serve("127.0.0.1:0");
    guest::WasmEngine engine;
    EventLog log;

    FunctionSpec secondary;
    secondary.args = {"fnb"};
    secondary.bundle_path = dir / "bundles" / "fnb";
    secondary.annotations[std::string(kRoleAnnotation)] = std::string(kRoleSecondary);
    write_spec(secondary);
    std::filesystem::copy_file(testing::fixture("echo.wasm"), secondary.bundle_path / "fnb.wasm");

    CoordinatorOptions options;
    options.broker_address = broker->address();
    options.log = &log;
    auto running = coordinate(secondary, registry, engine, options);

    // Right after start: both receivers exist and no guest has run.
    require(std::filesystem::is_socket(registry.socket_path("fnb").value), "socket file missing after start");
    require(broker->subscriber_count("fnb") == 1, "broker subscription missing after start");
    for (const auto& e : log.events()) {
        require(e.event.rfind("guest.", 0) != 0, "guest event before any request: " + e.event);
    }
    require(to_string(local::send(registry.socket_path("fnb"), to_bytes("hi"))) == "hi", "echo failed");
    running->wait();

    auto all = log.events();
    auto first_guest = std::find_if(all.begin(), all.end(), [](const Event& e) { return e.event.rfind("guest.", 0) == 0; });
    require(first_guest != all.end(), "no guest event after a request");
    auto listening = log.first("fnb", events::kLocalListening);
    auto subscribed = log.first("fnb", events::kNetworkSubscribed);
    require(listening && subscribed, "receiver events missing");
    require(*listening < first_guest->seq && *subscribed < first_guest->seq, "receiver started after a guest event");

    // Primary with an embeddable import: one instance holding both modules.
    TempDir snapshot("cwasi-accept-snap1");
    std::filesystem::copy_file(testing::fixture("fn_utils.wasm"), snapshot / "fn_utils.wasm");
    FunctionSpec primary;
    primary.args = {"fna"};
    primary.bundle_path = dir / "bundles" / "fna";
    write_spec(primary);
    std::filesystem::copy_file(testing::fixture("primary_embed.wasm"), primary.bundle_path / "fna.wasm");
    CoordinatorOptions primary_options;
    primary_options.broker_address.clear();
    primary_options.snapshot_root = snapshot.path();
    primary_options.log = &log;
    primary_options.input = to_bytes("one instance");
    auto started = coordinate(primary, registry, engine, primary_options);
    require(started->wait() == guest::InstanceState::Finished, "primary did not finish");
    require(to_string(started->instance()->output()) == "ONE INSTANCE", "embedded call returned the wrong output");
    auto created = log.count("fna", events::kGuestCreated);
    require(created == 1, "primary created " + std::to_string(created) + " guest instances");
    require(started->instance()->module_count() == 2, "embedded module not linked into the instance");

    return {true, "listening seq " + std::to_string(*listening) + ", subscribed seq " + std::to_string(*subscribed)
            + " < first guest event seq " + std::to_string(first_guest->seq) + "; embedded primary: 1 guest.created"};
}

Outcome alg4_branch()
{
    TempDir dir("cwasi-accept-alg4");
    auto registry = RunningRegistry::create(dir / "run");
    auto broker = broker::Broker::serve("127.0.0.1:0");
    guest::WasmEngine engine;

    FunctionSpec secondary;
    secondary.args = {"echo"};
    secondary.bundle_path = dir / "bundles" / "echo";
    secondary.annotations[std::string(kRoleAnnotation)] = std::string(kRoleSecondary);
    write_spec(secondary);
    std::filesystem::copy_file(testing::fixture("echo.wasm"), secondary.bundle_path / "echo.wasm");
    CoordinatorOptions options;
    options.broker_address = broker->address();
    options.receiver_mode = local::ReceiverMode::Persistent;
    auto target = coordinate(secondary, registry, engine, options);

    // One dispatcher instruments every call made through guests.
    Dispatcher dispatcher(registry, {broker->address(), 10s, "fna"});
    std::vector<guest::HostFunction> hosts = guest::standard_host_functions();
    hosts.push_back(dispatcher.host_function());
    auto artifact = guest::ModuleArtifact::load(testing::fixture("primary_dispatch.wasm"));
    constexpr int kCalls = 10;
    auto call_all = [&] {
        for (int i = 0; i < kCalls; ++i) {
            auto region = execute_once(engine, artifact, to_bytes("call " + std::to_string(i)), hosts);
            require(region == to_bytes(std::string(1, '\0') + "call " + std::to_string(i)), "wrong reply");
        }
    };
    const auto& c = dispatcher.counters();

    registry.register_function(secondary);
    auto published_before = broker->published();
    call_all();
    require(c.local_requests == kCalls && c.network_requests == 0, "registered target: traffic left the socket path");
    require(broker->published() == published_before, "registered target: broker saw traffic");
    uint64_t local_after = c.local_requests;

    registry.unregister_function("echo");
    call_all();
    require(c.local_requests == local_after && c.network_requests == kCalls,
        "unregistered target: traffic used the socket path");
    require(broker->published() >= published_before + 2 * kCalls, "unregistered target: broker saw no traffic");

    return {true, "registered: local=" + std::to_string(local_after) + " network=0; unregistered: local+0 network="
            + std::to_string(c.network_requests.load())};
}

Outcome identities()
{
    std::mt19937_64 rng(testing::kPropertySeed + 1003);
    for (int i = 0; i < kIdentityCases; ++i) {
        auto body = testing::random_bytes(rng, testing::random_size(rng, 4096));
        auto frame = local::encode_frame(body);
        require(frame == oracle::local_frame(body) && local::decode_frame(frame) == body,
            "Frame case " + std::to_string(i));
    }
    for (int i = 0; i < kIdentityCases; ++i) {
        broker::BrokerFrame f;
        f.opcode = broker::Opcode(1 + rng() % 3);
        f.queue = testing::random_string(rng, testing::kNameAlphabet, 1, 40);
        f.payload = testing::random_bytes(rng, testing::random_size(rng, 4096));
        auto encoded = broker::encode_frame(f);
        require(encoded == oracle::broker_frame(uint8_t(f.opcode), f.queue, f.payload)
                && broker::decode_frame(encoded) == f,
            "BrokerFrame case " + std::to_string(i));
    }
    for (int i = 0; i < kIdentityCases; ++i) {
        guest::DispatchEnvelope e {testing::random_string(rng, testing::kNameAlphabet, 1, 30),
            testing::random_string(rng, testing::kNameAlphabet, 1, 30),
            testing::random_bytes(rng, testing::random_size(rng, 4096))};
        auto encoded = guest::encode_envelope(e);
        require(encoded == oracle::envelope(e.source, e.target, e.payload) && guest::decode_envelope(encoded) == e,
            "DispatchEnvelope case " + std::to_string(i));
    }
    for (int i = 0; i < kIdentityCases; ++i) {
        guest::MemorySpan span {uint32_t(rng()), uint32_t(rng())};
        if (i < 4) {
            span = {i & 1 ? UINT32_MAX : 0u, i & 2 ? UINT32_MAX : 0u};
        }
        auto packed = guest::pack_span(span);
        require(packed == oracle::pack(span.pointer, span.length) && guest::unpack_span(packed) == span,
            "span packing case " + std::to_string(i));
    }
    return {true, std::to_string(kIdentityCases) + " cases each for Frame, BrokerFrame, DispatchEnvelope, span packing"};
}

Outcome lifecycle_hygiene()
{
    TempDir dir("cwasi-accept-life");
    auto registry = RunningRegistry::create(dir / "run");
    auto broker = broker::Broker::serve("127.0.0.1:0");
    guest::WasmEngine engine;
    EventLog log;

    // Same bundle name in two trees: one answers, one keeps its guest busy until killed.
    auto make = [&](const std::string& tree, const std::string& fixture) {
        FunctionSpec spec;
        spec.args = {"fnb"};
        spec.bundle_path = dir / tree / "fnb";
        spec.annotations[std::string(kRoleAnnotation)] = std::string(kRoleSecondary);
        write_spec(spec);
        std::filesystem::copy_file(testing::fixture(fixture + ".wasm"), spec.bundle_path / "fnb.wasm");
        return spec;
    };
    auto answering = make("a", "echo");
    auto busy = make("b", "spin");
    auto socket = registry.socket_path("fnb");

    int in_flight_kills = 0;
    for (int cycle = 0; cycle < kLifecycleCycles; ++cycle) {
        CoordinatorOptions options;
        options.broker_address = broker->address();
        options.receiver_mode = local::ReceiverMode::Persistent;
        options.log = &log;
        const bool spin = cycle % 2 == 1;
        auto running = coordinate(spin ? busy : answering, registry, engine, options);
        require(std::filesystem::is_socket(socket.value), "cycle " + std::to_string(cycle) + ": no socket after start");

        std::thread request;
        if (spin) {
            auto started_before = log.count("fnb", events::kGuestStarted);
            request = std::thread([&] {
                try {
                    local::send(socket, to_bytes("x"), 10s);
                } catch (const Error&) {
                }
            });
            require(testing::eventually([&] { return log.count("fnb", events::kGuestStarted) > started_before; }),
                "cycle " + std::to_string(cycle) + ": guest never started");
            ++in_flight_kills;
        } else {
            require(to_string(local::send(socket, to_bytes("ping"), 10s)) == "ping", "echo failed");
        }

        running->kill();
        if (request.joinable()) {
            request.join();
        }
        require(!std::filesystem::exists(socket.value), "cycle " + std::to_string(cycle) + ": socket left behind");
        require(testing::eventually([&] { return broker->subscriber_count("fnb") == 0; }),
            "cycle " + std::to_string(cycle) + ": subscription left behind");
    }
    return {true, std::to_string(kLifecycleCycles) + " kill/restart cycles (" + std::to_string(in_flight_kills)
            + " with a guest mid-execution), socket absent and rebindable each time"};
}

Outcome scaling_shape()
{
    std::vector<double> sizes, medians;
    std::string detail;
    for (uint64_t mb : {1, 2, 4, 8, 16, 32, 64}) {
        bench::WorkloadConfig config;
        config.pattern = bench::Pattern::Sequential;
        config.mode = CommunicationMode::LocalBuffer;
        config.payload_size = mb << 20;
        config.iterations = mb >= 32 ? 5 : 10;
        config.warmup = 1;
        auto run = measured(config);
        sizes.push_back(double(mb));
        medians.push_back(run.summary.median_latency_s);
        detail += std::to_string(mb) + "MB=" + fmt(run.summary.median_latency_s) + "s ";
    }
    double r2 = oracle::r_squared(sizes, medians);
    return {r2 >= kMinRSquared, "R^2=" + fmt(r2) + " (" + detail + ")"};
}

Outcome fanout_stability()
{
    double medians[2] = {};
    uint32_t degrees[2] = {10, 100};
    for (int i = 0; i < 2; ++i) {
        bench::WorkloadConfig config;
        config.pattern = bench::Pattern::FanOut;
        config.mode = CommunicationMode::LocalBuffer;
        config.payload_size = kFanoutPayload;
        config.degree = degrees[i];
        config.iterations = degrees[i] == 10 ? 10 : 3;
        config.warmup = 1;
        auto run = measured(config);
        require(run.records.size() == size_t(degrees[i]) * config.iterations, "missing fan-out records");
        medians[i] = run.summary.median_latency_s;
    }
    return {medians[1] <= kFanoutStabilityFactor * medians[0],
        "median degree10=" + fmt(medians[0]) + "s degree100=" + fmt(medians[1]) + "s (ratio "
            + fmt(medians[1] / medians[0]) + ")"};
}

Outcome throughput_rule()
{
    require(bench::throughput(10, 0.5) == 20.0, "throughput(10, 0.5) != 20.0");
    // Fan-in runs complete the set of patterns checked.
    bench::WorkloadConfig fanin;
    fanin.pattern = bench::Pattern::FanIn;
    fanin.mode = CommunicationMode::NetworkedBuffer;
    fanin.payload_size = 64 << 10;
    fanin.degree = 10;
    fanin.iterations = 3;
    measured(fanin);

    for (size_t r = 0; r < all_runs.size(); ++r) {
        const auto& run = all_runs[r];
        double first = run.timings.front().started_s, last = run.timings.front().finished_s;
        for (const auto& t : run.timings) {
            first = std::min(first, t.started_s);
            last = std::max(last, t.finished_s);
        }
        double recomputed = double(run.timings.size()) / (last - first);
        require(run.summary.requests == run.records.size(), "run " + std::to_string(r) + ": request count");
        require(std::abs(run.summary.throughput_rps - recomputed) <= kThroughputRelTolerance * recomputed,
            "run " + std::to_string(r) + ": summary " + fmt(run.summary.throughput_rps) + " vs recomputed "
                + fmt(recomputed));
        // Per-batch throughput in each record follows the same rule over that batch's timings.
        std::map<uint32_t, std::pair<double, double>> spans;
        std::map<uint32_t, size_t> counts;
        for (size_t i = 0; i < run.records.size(); ++i) {
            auto [it, fresh] = spans.try_emplace(run.records[i].iteration, run.timings[i].started_s, run.timings[i].finished_s);
            it->second.first = std::min(it->second.first, run.timings[i].started_s);
            it->second.second = std::max(it->second.second, run.timings[i].finished_s);
            ++counts[run.records[i].iteration];
        }
        for (size_t i = 0; i < run.records.size(); ++i) {
            auto [a, b] = spans[run.records[i].iteration];
            double want = double(counts[run.records[i].iteration]) / (b - a);
            require(std::abs(run.records[i].throughput_rps - want) <= kThroughputRelTolerance * want,
                "run " + std::to_string(r) + " record " + std::to_string(i) + ": batch throughput");
        }
    }
    return {true, "throughput(10, 0.5) == 20; " + std::to_string(all_runs.size())
            + " bench runs match requests/elapsed recomputed from raw timings"};
}

} // namespace
} // namespace cwasi

int main()
{
    using Criterion = std::pair<const char*, std::function<cwasi::Outcome()>>;
    const Criterion criteria[] = {
        {"Mode ordering", cwasi::mode_ordering},
        {"Correctness equivalence", cwasi::correctness_equivalence},
        {"Alg. 2 oracle", cwasi::alg2_oracle},
        {"Alg. 3 oracle", cwasi::alg3_oracle},
        {"Alg. 1 observability", cwasi::alg1_observability},
        {"Alg. 4 branch test", cwasi::alg4_branch},
        {"Framing/envelope/packing identities", cwasi::identities},
        {"Lifecycle hygiene", cwasi::lifecycle_hygiene},
        {"Scaling shape", cwasi::scaling_shape},
        {"Fan-out stability", cwasi::fanout_stability},
        {"Throughput rule", cwasi::throughput_rule},
    };

    int failures = 0;
    for (const auto& [name, check] : criteria) {
        auto started = std::chrono::steady_clock::now();
        cwasi::Outcome outcome;
        try {
            outcome = check();
        } catch (const cwasi::Failure& f) {
            outcome = {false, f.message};
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::printf("%s %s: %s [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str(), seconds);
        std::fflush(stdout);
        failures += !outcome.pass;
    }
    return failures ? 1 : 0;
}
