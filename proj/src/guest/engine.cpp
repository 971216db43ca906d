/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/guest/engine.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>

#include "cwasi/error.hpp"

namespace cwasi::guest {

namespace {

constexpr size_t kMaxNameLength = 0xffff;
constexpr uint64_t kAddressLimit = uint64_t(1) << 32;
constexpr uint64_t kHeapAlignment = 8;

void check_name(std::string_view name, const char* which)
{
    if (name.empty()) {
        raise(Errc::EmptyName, std::string(which) + " name is empty");
    }
    if (name.size() > kMaxNameLength) {
        raise(Errc::InvalidArgument, std::string(which) + " name exceeds 65535 bytes");
    }
    if (name.find('\0') != std::string_view::npos) {
        raise(Errc::InvalidArgument, std::string(which) + " name contains NUL");
    }
}

std::string_view value_type_name(ValueType type)
{
    switch (type) {
    case ValueType::I32:
        return "i32";
    case ValueType::I64:
        return "i64";
    case ValueType::F32:
        return "f32";
    case ValueType::F64:
        return "f64";
    case ValueType::FuncRef:
        return "funcref";
    case ValueType::ExternRef:
        return "externref";
    }
    return "?";
}

} // namespace

Bytes encode_envelope(const DispatchEnvelope& envelope)
{
    check_name(envelope.source, "source");
    check_name(envelope.target, "target");

    Bytes out;
    out.reserve(4 + envelope.source.size() + envelope.target.size() + envelope.payload.size());
    put_u16_be(out, static_cast<uint16_t>(envelope.source.size()));
    out.insert(out.end(), envelope.source.begin(), envelope.source.end());
    put_u16_be(out, static_cast<uint16_t>(envelope.target.size()));
    out.insert(out.end(), envelope.target.begin(), envelope.target.end());
    out.insert(out.end(), envelope.payload.begin(), envelope.payload.end());

    return out;
}

EnvelopeView view_envelope(ByteView data)
{
    size_t pos = 0;

    auto read_name = [&](const char* which) {
        if (data.size() - pos < 2) {
            raise(Errc::TruncatedEnvelope, std::string("missing ") + which + " length");
        }
        size_t length = get_u16_be(data.data() + pos);
        pos += 2;
        if (length == 0) {
            raise(Errc::EmptyName, std::string(which) + " name is empty");
        }
        if (data.size() - pos < length) {
            raise(Errc::TruncatedEnvelope, std::string(which) + " name runs past the end");
        }
        std::string_view name(reinterpret_cast<const char*>(data.data()) + pos, length);
        pos += length;
        return name;
    };

    EnvelopeView view;
    view.source = read_name("source");
    view.target = read_name("target");
    view.payload = data.subspan(pos);
    return view;
}

DispatchEnvelope decode_envelope(ByteView data)
{
    auto view = view_envelope(data);
    return DispatchEnvelope {
        std::string(view.source), std::string(view.target), Bytes(view.payload.begin(), view.payload.end())};
}

std::string to_string(const FunctionType& type)
{
    std::string text = "(";
    for (size_t i = 0; i < type.params.size(); ++i) {
        text += (i ? ", " : "") + std::string(value_type_name(type.params[i]));
    }
    text += ") -> (";
    for (size_t i = 0; i < type.results.size(); ++i) {
        text += (i ? ", " : "") + std::string(value_type_name(type.results[i]));
    }
    return text + ")";
}

FunctionType dispatch_type()
{
    return FunctionType {{ValueType::I32, ValueType::I32}, {ValueType::I64}};
}

std::vector<HostFunction> standard_host_functions()
{
    std::vector<HostFunction> functions;

    functions.push_back({std::string(kHostModule), std::string(kInputImport), FunctionType {{}, {ValueType::I64}},
        [](GuestInstance& instance, std::span<const uint64_t>, std::span<uint64_t> results) {
            auto span = instance.input_span();
            results[0] = span ? pack_span(*span) : 0;
        }});

    functions.push_back({std::string(kHostModule), std::string(kOutputImport),
        FunctionType {{ValueType::I32, ValueType::I32}, {}},
        [](GuestInstance& instance, std::span<const uint64_t> args, std::span<uint64_t>) {
            MemorySpan span {static_cast<uint32_t>(args[0]), static_cast<uint32_t>(args[1])};
            instance.set_output(instance.read_span(span));
        }});

    functions.push_back({std::string(kHostModule), std::string(kAllocImport),
        FunctionType {{ValueType::I32}, {ValueType::I32}},
        [](GuestInstance& instance, std::span<const uint64_t> args, std::span<uint64_t> results) {
            results[0] = instance.allocate(static_cast<uint32_t>(args[0])).pointer;
        }});

    return functions;
}

ModuleArtifact ModuleArtifact::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(Errc::IoFailure, "cannot open module " + path.string());
    }

    ModuleArtifact artifact;
    artifact.name = path.stem().string();
    artifact.path = path;
    artifact.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    return artifact;
}

namespace {

/// Full-size reservations kept for reuse, each with a zeroed read-write prefix.
class MemoryPool {
public:
    static constexpr size_t kMaxEntries = 16;
    static constexpr uint64_t kKeepResident = 16ull << 20;

    struct Entry {
        uint8_t* base;
        uint64_t committed;
    };

    static MemoryPool& instance()
    {
        static auto* pool = new MemoryPool(); // leaked: memories may outlive static destruction
        return *pool;
    }

    std::optional<Entry> take()
    {
        std::lock_guard lock(mutex_);
        if (entries_.empty()) {
            return std::nullopt;
        }
        auto entry = entries_.back();
        entries_.pop_back();
        return entry;
    }

    /// Zeroes the used prefix and keeps the reservation, or unmaps it when the pool is full.
    void give(uint8_t* base, uint64_t reserved, uint64_t used, uint64_t committed)
    {
        {
            std::lock_guard lock(mutex_);
            if (entries_.size() >= kMaxEntries) {
                ::munmap(base, reserved);
                return;
            }
        }

        uint64_t keep = std::min(used, kKeepResident);
        std::memset(base, 0, keep);
        if (committed > keep) {
            ::madvise(base + keep, committed - keep, MADV_DONTNEED); // refaults as zero pages
        }

        std::lock_guard lock(mutex_);
        entries_.push_back(Entry {base, committed});
    }

private:
    std::mutex mutex_;
    std::vector<Entry> entries_;
};

constexpr uint64_t kFullReservation = uint64_t(LinearMemory::kMaxPages) * LinearMemory::kPageSize;

} // namespace

LinearMemory::LinearMemory(uint32_t initial_pages, std::optional<uint32_t> max_pages)
    : max_pages_(max_pages)
{
    if (initial_pages > kMaxPages || (max_pages && initial_pages > *max_pages)) {
        raise(Errc::EngineError, "initial memory size exceeds its limit");
    }

    reserved_ = uint64_t(std::min<uint32_t>(max_pages.value_or(kMaxPages), kMaxPages)) * kPageSize;
    if (reserved_ == 0) {
        return;
    }

    if (reserved_ == kFullReservation) {
        if (auto entry = MemoryPool::instance().take()) {
            base_ = entry->base;
            committed_ = entry->committed;
        }
    }
    if (!base_) {
        void* region = ::mmap(nullptr, reserved_, PROT_NONE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
        if (region == MAP_FAILED) {
            raise(Errc::AllocationFailure, "cannot reserve guest address space");
        }
        base_ = static_cast<uint8_t*>(region);
        ::madvise(base_, reserved_, MADV_HUGEPAGE); // advisory
    }

    if (grow(initial_pages) < 0) {
        ::munmap(base_, reserved_);
        raise(Errc::AllocationFailure, "cannot commit initial guest memory");
    }
}

LinearMemory::~LinearMemory()
{
    if (!base_) {
        return;
    }
    if (reserved_ == kFullReservation) {
        MemoryPool::instance().give(base_, reserved_, size_, committed_);
    } else {
        ::munmap(base_, reserved_);
    }
}

int64_t LinearMemory::grow(uint32_t delta_pages)
{
    uint64_t old_pages = pages();
    uint64_t new_size = (old_pages + delta_pages) * kPageSize;

    if (new_size > reserved_) {
        return -1;
    }
    if (new_size > committed_) {
        if (::mprotect(base_ + committed_, new_size - committed_, PROT_READ | PROT_WRITE) != 0) {
            return -1;
        }
        // Prefault in one call; growth is almost always followed by a bulk write. Best effort.
        ::madvise(base_ + committed_, new_size - committed_, MADV_POPULATE_WRITE);
        committed_ = new_size;
    }
    size_ = new_size;
    return static_cast<int64_t>(old_pages);
}

std::string_view state_name(InstanceState state) noexcept
{
    switch (state) {
    case InstanceState::Created:
        return "created";
    case InstanceState::Running:
        return "running";
    case InstanceState::Finished:
        return "finished";
    case InstanceState::Killed:
        return "killed";
    }
    return "unknown";
}

GuestInstance::GuestInstance(std::string engine_name, size_t module_count)
    : engine_name_(std::move(engine_name))
    , module_count_(module_count)
{
}

GuestInstance::~GuestInstance()
{
    stop_executor();
    release();
}

void GuestInstance::stop_executor() noexcept
{
    interrupted_.store(true);

    std::lock_guard join_lock(join_mutex_);
    if (executor_.joinable()) {
        if (executor_.get_id() == std::this_thread::get_id()) {
            executor_.detach();
        } else {
            executor_.join();
        }
    }
}

InstanceState GuestInstance::state() const
{
    std::lock_guard lock(mutex_);
    return state_;
}

bool GuestInstance::deleted() const
{
    std::lock_guard lock(mutex_);
    return deleted_;
}

void GuestInstance::check_accessible(const char* what) const
{
    std::lock_guard lock(mutex_);

    if (deleted_) {
        raise(Errc::BadState, std::string(what) + " on a deleted instance");
    }
    if (state_ == InstanceState::Finished || state_ == InstanceState::Killed) {
        raise(Errc::BadState, std::string(what) + " on a " + std::string(state_name(state_)) + " instance");
    }
    if (state_ == InstanceState::Running && std::this_thread::get_id() != executor_id_) {
        raise(Errc::BadState, std::string(what) + " from outside the executor thread");
    }
}

Bytes GuestInstance::read_span(MemorySpan span) const
{
    auto view = view_span(span);
    return Bytes(view.begin(), view.end());
}

std::span<uint8_t> GuestInstance::writable_span(MemorySpan span)
{
    auto view = view_span(span);
    return std::span<uint8_t>(memory().data() + span.pointer, view.size());
}

ByteView GuestInstance::view_span(MemorySpan span) const
{
    check_accessible("view_span");

    const auto& mem = memory();
    if (!mem.contains(span.pointer, span.length)) {
        raise(Errc::OutOfBounds,
            "span [" + std::to_string(span.pointer) + ", +" + std::to_string(span.length) + ") exceeds memory of "
                + std::to_string(mem.size()) + " bytes");
    }

    return ByteView(mem.data() + span.pointer, span.length);
}

void GuestInstance::set_heap_base(uint64_t base)
{
    heap_next_ = (base + kHeapAlignment - 1) / kHeapAlignment * kHeapAlignment;
}

MemorySpan GuestInstance::allocate(uint32_t length)
{
    check_accessible("allocate");

    auto& mem = memory();
    uint64_t start = heap_next_;
    uint64_t end = start + length;

    if (end > kAddressLimit) {
        raise(Errc::AllocationFailure, "guest address space exhausted");
    }
    if (end > mem.size()) {
        uint64_t missing = end - mem.size();
        auto pages = static_cast<uint32_t>((missing + LinearMemory::kPageSize - 1) / LinearMemory::kPageSize);
        if (mem.grow(pages) < 0) {
            raise(Errc::AllocationFailure, "cannot grow guest memory by " + std::to_string(pages) + " pages");
        }
    }

    heap_next_ = (end + kHeapAlignment - 1) / kHeapAlignment * kHeapAlignment;

    return MemorySpan {static_cast<uint32_t>(start), length};
}

void GuestInstance::write_at(uint32_t pointer, ByteView data)
{
    check_accessible("write_at");

    auto& mem = memory();
    if (!mem.contains(pointer, data.size())) {
        raise(Errc::OutOfBounds, "write of " + std::to_string(data.size()) + " bytes at " + std::to_string(pointer)
                + " exceeds memory of " + std::to_string(mem.size()) + " bytes");
    }
    if (!data.empty()) {
        std::memcpy(mem.data() + pointer, data.data(), data.size());
    }
}

MemorySpan GuestInstance::write_bytes(ByteView data)
{
    if (data.size() >= kAddressLimit) {
        raise(Errc::AllocationFailure, "payload larger than the guest address space");
    }

    auto span = allocate(static_cast<uint32_t>(data.size()));
    if (!data.empty()) {
        std::memcpy(memory().data() + span.pointer, data.data(), data.size());
    }

    return span;
}

std::vector<uint64_t> GuestInstance::call(std::string_view export_name, std::span<const uint64_t> args)
{
    check_accessible("call");
    return invoke_export(export_name, args);
}

std::vector<uint64_t> GuestInstance::call_import(
    std::string_view module, std::string_view name, std::span<const uint64_t> args)
{
    check_accessible("call_import");
    return invoke_import(module, name, args);
}

bool GuestInstance::has_export(std::string_view export_name) const
{
    return export_exists(export_name);
}

MemorySpan GuestInstance::set_input(ByteView data)
{
    auto span = write_bytes(data);

    std::lock_guard lock(mutex_);
    input_ = span;

    return span;
}

std::optional<MemorySpan> GuestInstance::input_span() const
{
    std::lock_guard lock(mutex_);
    return input_;
}

void GuestInstance::set_output(Bytes data)
{
    std::lock_guard lock(mutex_);
    output_ = std::move(data);
}

Bytes GuestInstance::output() const
{
    std::lock_guard lock(mutex_);
    return output_;
}

Bytes GuestInstance::take_output()
{
    std::lock_guard lock(mutex_);
    return std::exchange(output_, Bytes());
}

std::string GuestInstance::trap_message() const
{
    std::lock_guard lock(mutex_);
    return trap_message_;
}

void GuestInstance::on_release(std::function<void()> hook)
{
    {
        std::lock_guard lock(mutex_);
        if (!released_) {
            release_hooks_.push_back(std::move(hook));
            return;
        }
    }
    // Already released: run immediately so the resource is not leaked.
    hook();
}

void GuestInstance::release()
{
    std::vector<std::function<void()>> hooks;
    {
        std::lock_guard lock(mutex_);
        if (released_) {
            return;
        }
        released_ = true;
        hooks.swap(release_hooks_);
    }

    for (auto& hook : hooks) {
        try {
            hook();
        } catch (...) {
        }
    }
}

void GuestInstance::start()
{
    std::lock_guard lock(mutex_);

    if (deleted_ || state_ != InstanceState::Created) {
        raise(Errc::BadTransition, "start on a " + std::string(state_name(state_)) + " instance");
    }

    state_ = InstanceState::Running;
    executor_ = std::thread([this] { execute(); });
    executor_id_ = executor_.get_id();
}

void GuestInstance::execute()
{
    {
        // Wait for start() to publish executor_id_.
        std::lock_guard lock(mutex_);
    }

    std::string trap;
    try {
        if (!export_exists(kEntryExport)) {
            raise(Errc::LinkError, "module has no \"run\" export");
        }
        invoke_export(kEntryExport, {});
    } catch (const std::exception& e) {
        trap = e.what();
    }

    {
        std::lock_guard lock(mutex_);
        trap_message_ = std::move(trap);
        if (state_ == InstanceState::Running) {
            state_ = interrupted_.load() ? InstanceState::Killed : InstanceState::Finished;
        }
    }

    release();
}

InstanceState GuestInstance::wait()
{
    {
        std::lock_guard lock(mutex_);
        if (deleted_ || state_ == InstanceState::Created) {
            raise(Errc::BadTransition, "wait on an instance that was never started");
        }
    }

    {
        std::lock_guard join_lock(join_mutex_);
        if (executor_.joinable() && executor_.get_id() != std::this_thread::get_id()) {
            executor_.join();
        }
    }

    return state();
}

void GuestInstance::kill()
{
    {
        std::lock_guard lock(mutex_);
        if (deleted_ || state_ != InstanceState::Running) {
            raise(Errc::BadTransition, "kill on a " + std::string(state_name(state_)) + " instance");
        }
        interrupted_.store(true);
    }

    {
        std::lock_guard join_lock(join_mutex_);
        if (executor_.joinable() && executor_.get_id() != std::this_thread::get_id()) {
            executor_.join();
        }
    }

    {
        std::lock_guard lock(mutex_);
        state_ = InstanceState::Killed;
    }

    release();
}

void GuestInstance::remove()
{
    {
        std::lock_guard lock(mutex_);
        if (deleted_ || state_ == InstanceState::Running) {
            raise(Errc::BadTransition, "delete on a " + std::string(deleted_ ? "deleted" : "running") + " instance");
        }
        deleted_ = true;
    }

    release();
    teardown();
}

InstanceState GuestInstance::lifecycle(LifecycleAction action)
{
    switch (action) {
    case LifecycleAction::New: {
        std::lock_guard lock(mutex_);
        if (deleted_ || state_ != InstanceState::Created) {
            raise(Errc::BadTransition, "new on an existing " + std::string(state_name(state_)) + " instance");
        }
        return state_;
    }
    case LifecycleAction::Start:
        start();
        break;
    case LifecycleAction::Wait:
        return wait();
    case LifecycleAction::Delete:
        remove();
        break;
    case LifecycleAction::Kill:
        kill();
        break;
    }

    return state();
}

} // namespace cwasi::guest
