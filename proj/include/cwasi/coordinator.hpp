/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_COORDINATOR_HPP_
#define CWASI_COORDINATOR_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cwasi/broker.hpp"
#include "cwasi/guest/engine.hpp"
#include "cwasi/linker.hpp"
#include "cwasi/local_buffer.hpp"
#include "cwasi/registry.hpp"
#include "cwasi/spec.hpp"

namespace cwasi {

enum class CommunicationMode { Embedded, LocalBuffer, NetworkedBuffer };

/// "embedded", "local", "network".
std::string_view mode_name(CommunicationMode mode) noexcept;

/// Accepts the names above; throws InvalidArgument otherwise.
CommunicationMode parse_mode(std::string_view name);

enum class ModeHint { None, ForceLocal, ForceNetwork, ForceEmbed };

/// Reads the "cwasi/mode" annotation: "local", "network" or "embed". Unknown values are ignored.
ModeHint read_hint(const FunctionSpec& spec);

/**
 * Mode for a call from source to target_type. Hints win when feasible
 * (ForceEmbed needs embeddable, ForceLocal needs co-location). Otherwise:
 * Embedded iff embeddable, co-located and in the source's namespace;
 * LocalBuffer iff co-located; NetworkedBuffer otherwise.
 */
CommunicationMode select_mode(const FunctionSpec& source, std::string_view target_type,
    const RunningRegistry& registry, ModeHint hint, bool embeddable);

struct Event {
    uint64_t seq = 0;
    int64_t timestamp_ns = 0; // steady clock
    std::string function;
    std::string event;
    std::string mode; // empty when not applicable
};

/// One JSON object per line: {"seq":..,"ts_ns":..,"function":..,"event":..,"mode":..}.
std::string to_line(const Event& event);

/// Thread-safe, append-only record of lifecycle and dispatch events.
class EventLog {
public:
    EventLog() = default;

    /// Also writes every event as a line to sink (which must outlive the log).
    explicit EventLog(std::ostream& sink);

    void record(std::string_view function, std::string_view event, std::string_view mode = {});

    std::vector<Event> events() const;
    std::vector<Event> events_for(std::string_view function) const;
    size_t count(std::string_view function, std::string_view event) const;

    /// Index in events() of the first match, if any.
    std::optional<size_t> first(std::string_view function, std::string_view event) const;

private:
    mutable std::mutex mutex_;
    std::vector<Event> events_;
    std::ostream* sink_ = nullptr;
};

namespace events {
inline constexpr std::string_view kLocalListening = "receiver.local.listening";
inline constexpr std::string_view kNetworkSubscribed = "receiver.network.subscribed";
inline constexpr std::string_view kLocalConnection = "receiver.local.connection";
inline constexpr std::string_view kRequestReceived = "receiver.request";
inline constexpr std::string_view kReplySent = "receiver.reply";
inline constexpr std::string_view kLocalShutdown = "receiver.local.shutdown";
inline constexpr std::string_view kEmbeddingsDiscovered = "embed.discovered";
inline constexpr std::string_view kGuestCreated = "guest.created";
inline constexpr std::string_view kGuestStarted = "guest.started";
inline constexpr std::string_view kGuestFinished = "guest.finished";
inline constexpr std::string_view kGuestFailed = "guest.failed";
inline constexpr std::string_view kGuestKilled = "guest.killed";
inline constexpr std::string_view kDispatchBegin = "dispatch.begin";
inline constexpr std::string_view kDispatchEnd = "dispatch.end";
inline constexpr std::string_view kDispatchFailed = "dispatch.failed";
inline constexpr std::string_view kFunctionKilled = "function.killed";
} // namespace events

struct TransportCounters {
    std::atomic<uint64_t> local_requests {0};
    std::atomic<uint64_t> network_requests {0};
    std::atomic<uint64_t> local_bytes {0};
    std::atomic<uint64_t> network_bytes {0};
    std::atomic<uint64_t> failures {0};
};

/// Reply region status bytes written ahead of the reply body.
inline constexpr uint8_t kReplyOk = 0x00;
inline constexpr uint8_t kReplyError = 0x01;

struct DispatcherOptions {
    std::string broker_address = std::string(broker::kDefaultAddress);
    std::chrono::milliseconds timeout = local::kDefaultTimeout;
    std::string source = "primary"; // used when an envelope's source is not a valid queue prefix
};

/**
 * Request dispatcher behind ("cwasi","dispatch"): decodes the envelope the
 * guest wrote, forwards the payload over the local buffer when the target is
 * co-located and over the broker otherwise, and writes status byte + reply
 * back into guest memory.
 */
class Dispatcher {
public:
    Dispatcher(const RunningRegistry& registry, DispatcherOptions options = {}, EventLog* log = nullptr);

    /// Host function for ("cwasi","dispatch") bound to this dispatcher.
    guest::HostFunction host_function();

    /**
     * Alg. 4. Returns the packed span of the reply region. Throws
     * DecodeError when (ptr, len) does not address a valid envelope.
     */
    uint64_t dispatch(guest::GuestInstance& instance, uint32_t ptr, uint32_t len);

    /// Transport step alone: reply bytes, or throws the transport error.
    Bytes forward(const guest::DispatchEnvelope& envelope, CommunicationMode* used = nullptr);
    Bytes forward(const guest::EnvelopeView& envelope, CommunicationMode* used = nullptr);

    const TransportCounters& counters() const noexcept { return counters_; }
    const RunningRegistry& registry() const noexcept { return registry_; }
    const DispatcherOptions& options() const noexcept { return options_; }

private:
    const RunningRegistry& registry_;
    DispatcherOptions options_;
    EventLog* log_;
    TransportCounters counters_;
};

/// Parses a reply region: status byte then body. Throws DecodeError when empty.
struct ReplyRegion {
    bool ok = false;
    Bytes body;
};
ReplyRegion parse_reply_region(ByteView region);

struct CoordinatorOptions {
    std::string broker_address = std::string(broker::kDefaultAddress); // empty: no networked buffer
    local::ReceiverMode receiver_mode = local::ReceiverMode::OneShot;
    std::chrono::milliseconds timeout = local::kDefaultTimeout;
    std::optional<std::filesystem::path> snapshot_root; // absent: no embedding discovery
    EventLog* log = nullptr;
    Bytes input; // primary only: readable through ("cwasi","input") when non-empty
};

/**
 * A function started by coordinate(). Primaries own one guest instance;
 * secondaries own their receivers and run a fresh guest per message.
 */
class RunningFunction {
public:
    RunningFunction(const RunningFunction&) = delete;
    RunningFunction& operator=(const RunningFunction&) = delete;
    ~RunningFunction();

    const FunctionSpec& spec() const noexcept;
    Role role() const noexcept;

    /// Primary only; nullptr for secondaries.
    guest::GuestInstance* instance() noexcept;

    /// Embedded bundles linked into the primary's instance.
    const BundlePathSet& embeddings() const noexcept;

    const local::LocalReceiver* local_receiver() const noexcept;
    const broker::NetworkReceiver* network_receiver() const noexcept;

    /// Guest executions so far (1 for a started primary).
    uint64_t executions() const noexcept;

    Dispatcher& dispatcher() noexcept;

    /// Primary: waits for the guest. Secondary: waits until the local receiver shut down.
    guest::InstanceState wait();

    /// Stops receivers, kills running guests and removes the socket file.
    void kill();

    struct State;

private:
    friend std::unique_ptr<RunningFunction> coordinate(
        const FunctionSpec&, const RunningRegistry&, guest::GuestEngine&, CoordinatorOptions);
    explicit RunningFunction(std::unique_ptr<State> state);

    std::unique_ptr<State> state_;
};

/**
 * Alg. 1. Secondary: starts the network receiver and the local receiver at
 * registry.socket_path(spec.bundle_name()); each request runs a fresh guest
 * with the payload as input and its output as the reply. Primary: reads the
 * artifact's imports, discovers embeddable bundles, instantiates once and
 * starts "run". The caller registers the function in the registry.
 */
std::unique_ptr<RunningFunction> coordinate(const FunctionSpec& spec, const RunningRegistry& registry,
    guest::GuestEngine& engine, CoordinatorOptions options = {});

/// Runs a fresh instance of artifact with payload as input; returns its output. Throws Trap on failure.
Bytes execute_once(guest::GuestEngine& engine, const guest::ModuleArtifact& artifact, ByteView payload,
    std::span<const guest::HostFunction> host_functions = {});

} // namespace cwasi

#endif
