/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"

namespace cwasi {

Dispatcher::Dispatcher(const RunningRegistry& registry, DispatcherOptions options, EventLog* log)
    : registry_(registry)
    , options_(std::move(options))
    , log_(log)
{
}

guest::HostFunction Dispatcher::host_function()
{
    return guest::HostFunction {std::string(guest::kHostModule), std::string(guest::kDispatchImport),
        guest::dispatch_type(),
        [this](guest::GuestInstance& instance, std::span<const uint64_t> args, std::span<uint64_t> results) {
            results[0] = dispatch(instance, static_cast<uint32_t>(args[0]), static_cast<uint32_t>(args[1]));
        }};
}

Bytes Dispatcher::forward(const guest::DispatchEnvelope& envelope, CommunicationMode* used)
{
    return forward(guest::EnvelopeView {envelope.source, envelope.target, envelope.payload}, used);
}

Bytes Dispatcher::forward(const guest::EnvelopeView& envelope, CommunicationMode* used)
{
    if (auto socket = registry_.ifc_selection(envelope.target)) {
        if (used) {
            *used = CommunicationMode::LocalBuffer;
        }
        counters_.local_requests.fetch_add(1, std::memory_order_relaxed);
        counters_.local_bytes.fetch_add(envelope.payload.size(), std::memory_order_relaxed);
        return local::send(*socket, envelope.payload, options_.timeout);
    }

    if (used) {
        *used = CommunicationMode::NetworkedBuffer;
    }
    counters_.network_requests.fetch_add(1, std::memory_order_relaxed);
    counters_.network_bytes.fetch_add(envelope.payload.size(), std::memory_order_relaxed);
    if (options_.broker_address.empty()) {
        raise(Errc::BrokerUnreachable, std::string(envelope.target) + " is not co-located and no broker is configured");
    }
    std::string_view source = broker::valid_queue_name(envelope.source) ? envelope.source : options_.source;
    return broker::publish_request(options_.broker_address, envelope.target, envelope.payload, options_.timeout, source);
}

uint64_t Dispatcher::dispatch(guest::GuestInstance& instance, uint32_t ptr, uint32_t len)
{
    // The envelope is read in place; guest memory does not move while we hold the view.
    guest::EnvelopeView envelope;
    try {
        envelope = guest::view_envelope(instance.view_span(guest::MemorySpan {ptr, len}));
    } catch (const Error& e) {
        if (e.code() == Errc::BadState) {
            throw;
        }
        raise(Errc::DecodeError, std::string("dispatch request is not a valid envelope: ") + e.what());
    }
    std::string source(envelope.source);

    if (log_) {
        log_->record(source, events::kDispatchBegin);
    }

    std::optional<guest::MemorySpan> region;
    Bytes reply;
    auto mode = CommunicationMode::NetworkedBuffer;
    try {
        if (auto socket = registry_.ifc_selection(envelope.target)) {
            // Local replies are read straight into the reply region behind its status byte.
            mode = CommunicationMode::LocalBuffer;
            counters_.local_requests.fetch_add(1, std::memory_order_relaxed);
            counters_.local_bytes.fetch_add(envelope.payload.size(), std::memory_order_relaxed);
            local::send_into(
                *socket, envelope.payload,
                [&](uint32_t length) {
                    if (length > UINT32_MAX - 1) {
                        raise(Errc::AllocationFailure, "reply does not fit guest memory");
                    }
                    region = instance.allocate(length + 1);
                    auto out = instance.writable_span(*region);
                    out[0] = kReplyOk;
                    return out.subspan(1);
                },
                options_.timeout);
        } else {
            reply = forward(envelope, &mode);
            if (reply.size() > UINT32_MAX - 1) {
                raise(Errc::AllocationFailure, "reply does not fit guest memory");
            }
            region = instance.allocate(static_cast<uint32_t>(1 + reply.size()));
            auto out = instance.writable_span(*region);
            out[0] = kReplyOk;
            std::copy(reply.begin(), reply.end(), out.begin() + 1);
        }
        if (log_) {
            log_->record(source, events::kDispatchEnd, mode_name(mode));
        }
    } catch (const Error& e) {
        if (e.code() == Errc::BadState) {
            throw;
        }
        counters_.failures.fetch_add(1, std::memory_order_relaxed);
        region = instance.allocate(1);
        instance.writable_span(*region)[0] = kReplyError;
        if (log_) {
            log_->record(source, events::kDispatchFailed, mode_name(mode));
        }
    }

    return guest::pack_span(*region);
}

ReplyRegion parse_reply_region(ByteView region)
{
    if (region.empty()) {
        raise(Errc::DecodeError, "reply region lacks a status byte");
    }
    return ReplyRegion {region[0] == kReplyOk, Bytes(region.begin() + 1, region.end())};
}

} // namespace cwasi
