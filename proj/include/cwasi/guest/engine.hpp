/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_ENGINE_HPP_
#define CWASI_GUEST_ENGINE_HPP_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cwasi/bytes.hpp"

namespace cwasi::guest {

/// (pointer, length) reference into guest linear memory.
struct MemorySpan {
    uint32_t pointer = 0;
    uint32_t length = 0;

    uint64_t end() const noexcept { return uint64_t(pointer) + length; }

    bool operator==(const MemorySpan&) const = default;
};

/// Single-scalar encoding used to return a span from a host call.
constexpr uint64_t pack_span(MemorySpan span) noexcept
{
    return (uint64_t(span.pointer) << 32) | span.length;
}

constexpr MemorySpan unpack_span(uint64_t word) noexcept
{
    return MemorySpan {static_cast<uint32_t>(word >> 32), static_cast<uint32_t>(word)};
}

/**
 * Request written by a guest before calling the dispatcher.
 *
 * Wire layout: u16-BE source length, source, u16-BE target length, target,
 * remaining bytes are the payload.
 */
struct DispatchEnvelope {
    std::string source;
    std::string target;
    Bytes payload;

    bool operator==(const DispatchEnvelope&) const = default;
};

/// Throws Error(EmptyName) for empty names, InvalidArgument for NUL bytes or names over 65535 bytes.
Bytes encode_envelope(const DispatchEnvelope& envelope);

/// Throws Error(TruncatedEnvelope) or Error(EmptyName).
DispatchEnvelope decode_envelope(ByteView data);

/// Envelope fields borrowed from the buffer they were decoded from.
struct EnvelopeView {
    std::string_view source;
    std::string_view target;
    ByteView payload;
};

/// decode_envelope without copying. Same errors.
EnvelopeView view_envelope(ByteView data);

enum class ValueType : uint8_t {
    I32 = 0x7f,
    I64 = 0x7e,
    F32 = 0x7d,
    F64 = 0x7c,
    FuncRef = 0x70,
    ExternRef = 0x6f,
};

struct FunctionType {
    std::vector<ValueType> params;
    std::vector<ValueType> results;

    bool operator==(const FunctionType&) const = default;
};

std::string to_string(const FunctionType& type);

class GuestInstance;

/// Host callback. Arguments and results are raw 64-bit slots (i32 zero-extended).
using HostCallback = std::function<void(GuestInstance&, std::span<const uint64_t>, std::span<uint64_t>)>;

struct HostFunction {
    std::string module;
    std::string name;
    FunctionType type;
    HostCallback callback;
};

/// Import namespace satisfied by the shim rather than by snapshot bundles.
inline constexpr std::string_view kHostModule = "cwasi";
inline constexpr std::string_view kDispatchImport = "dispatch";
inline constexpr std::string_view kInputImport = "input";
inline constexpr std::string_view kOutputImport = "output";
inline constexpr std::string_view kAllocImport = "alloc";
inline constexpr std::string_view kEntryExport = "run";

/// Signature of ("cwasi","dispatch"): (ptr: i32, len: i32) -> i64 packed span.
FunctionType dispatch_type();

/**
 * The host functions every engine provides besides dispatch:
 *   input  () -> i64          packed span of the input region (0 when unset)
 *   output (ptr: i32, len: i32) copies the addressed bytes out as the result
 *   alloc  (len: i32) -> i32  bump allocation, same region as write_bytes
 */
std::vector<HostFunction> standard_host_functions();

/// A module file as handed to an engine.
struct ModuleArtifact {
    std::string name; // file stem, also the import module name it satisfies
    std::filesystem::path path;
    Bytes bytes;

    bool is_text() const { return path.extension() == ".wat"; }

    static ModuleArtifact load(const std::filesystem::path& path);
};

/// Growable byte array in 64 KiB pages. Address space up to the limit is
/// reserved up front, so growth never moves or copies the contents. Released
/// reservations are zeroed and pooled so later instances skip page faults.
class LinearMemory {
public:
    static constexpr uint32_t kPageSize = 65536;
    static constexpr uint32_t kMaxPages = 65536;

    explicit LinearMemory(uint32_t initial_pages, std::optional<uint32_t> max_pages = std::nullopt);
    LinearMemory(const LinearMemory&) = delete;
    LinearMemory& operator=(const LinearMemory&) = delete;
    ~LinearMemory();

    uint64_t size() const noexcept { return size_; }
    uint32_t pages() const noexcept { return static_cast<uint32_t>(size_ / kPageSize); }
    std::optional<uint32_t> max_pages() const noexcept { return max_pages_; }

    uint8_t* data() noexcept { return base_; }
    const uint8_t* data() const noexcept { return base_; }

    bool contains(uint64_t offset, uint64_t length) const noexcept
    {
        return offset <= size_ && length <= size_ - offset;
    }

    /// Returns the previous page count, or -1 when the limit forbids growth.
    int64_t grow(uint32_t delta_pages);

private:
    uint8_t* base_ = nullptr;
    uint64_t size_ = 0;
    uint64_t reserved_ = 0;
    uint64_t committed_ = 0; // readable and writable prefix, >= size_
    std::optional<uint32_t> max_pages_;
};

enum class InstanceState { Created, Running, Finished, Killed };
enum class LifecycleAction { New, Start, Wait, Delete, Kill };

std::string_view state_name(InstanceState state) noexcept;

/**
 * One instantiated guest: the primary module plus any embedded modules,
 * sharing a single address space.
 *
 * Lifecycle: Created -> Running -> {Finished, Killed}. start() executes the
 * "run" export on a dedicated executor thread. Memory is accessible in
 * Created and Running only. Release hooks registered with on_release() run
 * exactly once when the instance finishes, is killed, or is destroyed.
 */
class GuestInstance {
public:
    GuestInstance(const GuestInstance&) = delete;
    GuestInstance& operator=(const GuestInstance&) = delete;
    virtual ~GuestInstance();

    InstanceState state() const;
    bool deleted() const;

    Bytes read_span(MemorySpan span) const;

    /// read_span without the copy. Guest memory never moves, so the view stays
    /// valid for the life of the instance; later guest writes show through it.
    ByteView view_span(MemorySpan span) const;
    std::span<uint8_t> writable_span(MemorySpan span);

    MemorySpan write_bytes(ByteView data);

    /// Copies data to pointer. Throws OutOfBounds.
    void write_at(uint32_t pointer, ByteView data);
    MemorySpan allocate(uint32_t length);

    /// Invokes an export of the primary module.
    std::vector<uint64_t> call(std::string_view export_name, std::span<const uint64_t> args = {});

    /// Invokes whatever the primary's import (module, name) was linked to.
    std::vector<uint64_t> call_import(std::string_view module, std::string_view name, std::span<const uint64_t> args = {});

    bool has_export(std::string_view export_name) const;

    InstanceState lifecycle(LifecycleAction action);
    void start();
    InstanceState wait();
    void kill();
    void remove();

    /// Set once kill() was requested; long-running guests poll it.
    bool interrupted() const noexcept { return interrupted_.load(std::memory_order_relaxed); }
    const std::atomic<bool>& interrupt_flag() const noexcept { return interrupted_; }

    void on_release(std::function<void()> hook);

    /// Copies data into guest memory; the guest reads it via ("cwasi","input").
    MemorySpan set_input(ByteView data);
    std::optional<MemorySpan> input_span() const;

    void set_output(Bytes data);
    Bytes output() const;

    /// Moves the output out, leaving it empty.
    Bytes take_output();

    /// Non-empty when run trapped or threw.
    std::string trap_message() const;

    size_t module_count() const noexcept { return module_count_; }
    std::string_view engine_name() const noexcept { return engine_name_; }

protected:
    GuestInstance(std::string engine_name, size_t module_count);

    virtual LinearMemory& memory() = 0;
    virtual const LinearMemory& memory() const = 0;
    virtual std::vector<uint64_t> invoke_export(std::string_view name, std::span<const uint64_t> args) = 0;
    virtual std::vector<uint64_t> invoke_import(
        std::string_view module, std::string_view name, std::span<const uint64_t> args)
        = 0;
    virtual bool export_exists(std::string_view name) const = 0;
    virtual void teardown() {}

    /// Start of the bump region; must be called once by the backend.
    void set_heap_base(uint64_t base);

    /// Guards that the caller may touch memory or run guest code right now.
    void check_accessible(const char* what) const;

    /// Interrupts and joins the executor. Backends call this first in their
    /// destructors, before the state run() touches goes away.
    void stop_executor() noexcept;

private:
    void execute();
    void release();

    std::string engine_name_;
    size_t module_count_;

    mutable std::mutex mutex_;
    InstanceState state_ = InstanceState::Created;
    bool deleted_ = false;
    std::mutex join_mutex_;
    std::thread executor_;
    std::thread::id executor_id_;
    std::atomic<bool> interrupted_ {false};
    std::vector<std::function<void()>> release_hooks_;
    bool released_ = false;

    uint64_t heap_next_ = 0;
    std::optional<MemorySpan> input_;
    Bytes output_;
    std::string trap_message_;
};

/// Execution backend.
class GuestEngine {
public:
    virtual ~GuestEngine() = default;

    virtual std::string_view name() const noexcept = 0;

    /**
     * Instantiates primary with extras linked in. Imports of the primary are
     * resolved against the host functions first (module "cwasi"), then
     * against exports of the extras. Throws Error(LinkError) on unresolved or
     * mistyped imports and Error(EngineError) for backend failures.
     */
    virtual std::unique_ptr<GuestInstance> instantiate(const ModuleArtifact& primary,
        std::span<const ModuleArtifact> extras, std::span<const HostFunction> host_functions)
        = 0;
};

} // namespace cwasi::guest

#endif
