/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_BROKER_WIRE_HPP_
#define CWASI_BROKER_WIRE_HPP_

#include <initializer_list>
#include <optional>

#include "cwasi/broker.hpp"
#include "net/socket.hpp"

namespace cwasi::broker::wire {

inline constexpr size_t kLengthPrefix = 4;
inline constexpr size_t kFixedHeader = 3; // opcode + queue_length

/// A frame body as read off the socket: opcode, queue, payload in place.
struct RawFrame {
    Bytes body; // everything after total_length
    Opcode opcode = Opcode::Publish;
    uint16_t queue_length = 0;

    std::string_view queue() const
    {
        return std::string_view(reinterpret_cast<const char*>(body.data()) + kFixedHeader, queue_length);
    }
    ByteView payload() const { return ByteView(body).subspan(kFixedHeader + queue_length); }
};

/// Validates the header fields of a frame body. Throws ProtocolError.
void parse_header(RawFrame& frame);

/// nullopt on clean EOF before a frame starts.
std::optional<RawFrame> read_frame(int fd, const net::Deadline& deadline);

/// Writes header then payload parts without concatenating them.
void write_frame(int fd, Opcode opcode, std::string_view queue, std::initializer_list<ByteView> payload,
    const net::Deadline& deadline);

} // namespace cwasi::broker::wire

#endif
