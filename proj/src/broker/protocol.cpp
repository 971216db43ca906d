/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <cctype>

#include "broker/wire.hpp"
#include "cwasi/error.hpp"

namespace cwasi::broker {

namespace {

bool known_opcode(uint8_t op)
{
    return op >= static_cast<uint8_t>(Opcode::Publish) && op <= static_cast<uint8_t>(Opcode::Message);
}

} // namespace

bool valid_queue_name(std::string_view name) noexcept
{
    if (name.empty() || name.size() > 0xffff) {
        return false;
    }
    for (unsigned char c : name) {
        if (c <= 0x20 || c == 0x7f) {
            return false;
        }
    }
    return true;
}

Bytes encode_frame(const BrokerFrame& frame)
{
    if (!valid_queue_name(frame.queue)) {
        raise(Errc::InvalidArgument, "invalid queue name '" + frame.queue + "'");
    }
    if (!known_opcode(static_cast<uint8_t>(frame.opcode))) {
        raise(Errc::InvalidArgument, "unknown opcode");
    }
    uint64_t total = wire::kFixedHeader + frame.queue.size() + frame.payload.size();
    if (total > kMaxFrame) {
        raise(Errc::FrameTooLarge, "broker frame of " + std::to_string(total) + " bytes exceeds the limit");
    }

    Bytes out;
    out.reserve(wire::kLengthPrefix + total);
    put_u32_be(out, static_cast<uint32_t>(total));
    out.push_back(static_cast<uint8_t>(frame.opcode));
    put_u16_be(out, static_cast<uint16_t>(frame.queue.size()));
    out.insert(out.end(), frame.queue.begin(), frame.queue.end());
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

BrokerFrame decode_frame(ByteView data)
{
    if (data.size() < wire::kLengthPrefix) {
        raise(Errc::ProtocolError, "broker frame shorter than its length prefix");
    }
    uint32_t total = get_u32_be(data.data());
    if (total > kMaxFrame) {
        raise(Errc::FrameTooLarge, "broker frame length " + std::to_string(total) + " exceeds the limit");
    }
    if (data.size() - wire::kLengthPrefix != total) {
        raise(Errc::ProtocolError, "broker frame length disagrees with buffer size");
    }

    wire::RawFrame raw;
    raw.body.assign(data.begin() + wire::kLengthPrefix, data.end());
    wire::parse_header(raw);

    auto payload = raw.payload();
    return BrokerFrame {raw.opcode, std::string(raw.queue()), Bytes(payload.begin(), payload.end())};
}

Bytes encode_request(const RequestEnvelope& request)
{
    if (!valid_queue_name(request.reply_queue)) {
        raise(Errc::InvalidArgument, "invalid reply queue '" + request.reply_queue + "'");
    }
    Bytes out;
    out.reserve(2 + request.reply_queue.size() + request.payload.size());
    put_u16_be(out, static_cast<uint16_t>(request.reply_queue.size()));
    out.insert(out.end(), request.reply_queue.begin(), request.reply_queue.end());
    out.insert(out.end(), request.payload.begin(), request.payload.end());
    return out;
}

RequestEnvelope decode_request(ByteView data)
{
    if (data.size() < 2) {
        raise(Errc::DecodeError, "request shorter than its reply-queue length");
    }
    uint16_t length = get_u16_be(data.data());
    if (data.size() - 2 < length) {
        raise(Errc::DecodeError, "request truncated inside the reply queue");
    }
    std::string reply(reinterpret_cast<const char*>(data.data()) + 2, length);
    if (!valid_queue_name(reply)) {
        raise(Errc::DecodeError, "request names an invalid reply queue");
    }
    return RequestEnvelope {std::move(reply), Bytes(data.begin() + 2 + length, data.end())};
}

std::string reply_queue_name(std::string_view source, std::string_view correlation_id)
{
    std::string out(source);
    out += ".reply.";
    out += correlation_id;
    return out;
}

namespace wire {

void parse_header(RawFrame& frame)
{
    if (frame.body.size() < kFixedHeader) {
        raise(Errc::ProtocolError, "broker frame shorter than its header");
    }
    uint8_t op = frame.body[0];
    if (!known_opcode(op)) {
        raise(Errc::ProtocolError, "unknown broker opcode " + std::to_string(op));
    }
    frame.opcode = static_cast<Opcode>(op);
    frame.queue_length = get_u16_be(frame.body.data() + 1);
    if (frame.body.size() - kFixedHeader < frame.queue_length) {
        raise(Errc::ProtocolError, "queue name overruns the frame");
    }
    if (!valid_queue_name(frame.queue())) {
        raise(Errc::ProtocolError, "invalid queue name in frame");
    }
}

std::optional<RawFrame> read_frame(int fd, const net::Deadline& deadline)
{
    uint8_t prefix[kLengthPrefix];
    if (!net::read_exact(fd, prefix, kLengthPrefix, deadline)) {
        return std::nullopt;
    }
    uint32_t total = get_u32_be(prefix);
    if (total > kMaxFrame) {
        raise(Errc::FrameTooLarge, "incoming broker frame exceeds the limit");
    }

    RawFrame frame;
    frame.body.resize(total);
    if (total && !net::read_exact(fd, frame.body.data(), total, deadline)) {
        raise(Errc::ProtocolError, "connection closed inside a frame");
    }
    parse_header(frame);
    return frame;
}

void write_frame(int fd, Opcode opcode, std::string_view queue, std::initializer_list<ByteView> payload,
    const net::Deadline& deadline)
{
    uint64_t total = kFixedHeader + queue.size();
    for (auto part : payload) {
        total += part.size();
    }
    if (total > kMaxFrame) {
        raise(Errc::FrameTooLarge, "broker frame of " + std::to_string(total) + " bytes exceeds the limit");
    }

    Bytes header;
    header.reserve(kLengthPrefix + kFixedHeader + queue.size());
    put_u32_be(header, static_cast<uint32_t>(total));
    header.push_back(static_cast<uint8_t>(opcode));
    put_u16_be(header, static_cast<uint16_t>(queue.size()));
    header.insert(header.end(), queue.begin(), queue.end());

    // Header plus at most two payload parts cover every caller; larger lists fall back to one write per part.
    if (payload.size() <= 2) {
        auto it = payload.begin();
        ByteView first = payload.size() > 0 ? *it++ : ByteView();
        ByteView second = payload.size() > 1 ? *it : ByteView();
        net::write_all(fd, {ByteView(header), first, second}, deadline);
        return;
    }
    net::write_all(fd, header, deadline);
    for (auto part : payload) {
        net::write_all(fd, part, deadline);
    }
}

} // namespace wire

} // namespace cwasi::broker
