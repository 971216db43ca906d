/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_LOCAL_BUFFER_HPP_
#define CWASI_LOCAL_BUFFER_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>

#include "cwasi/bytes.hpp"
#include "cwasi/registry.hpp"

namespace cwasi::local {

inline constexpr uint32_t kDefaultMaxFrame = 256u * 1024 * 1024;
inline constexpr std::chrono::milliseconds kDefaultTimeout {30000};
inline constexpr size_t kFramePrefix = 4;

/// u32-BE length prefix followed by the body. Throws FrameTooLarge.
Bytes encode_frame(ByteView body, uint32_t max_frame = kDefaultMaxFrame);

/// Inverse of encode_frame over a complete buffer. Throws ProtocolError when
/// the prefix disagrees with the buffer length, FrameTooLarge above the limit.
Bytes decode_frame(ByteView frame, uint32_t max_frame = kDefaultMaxFrame);

using Handler = std::function<Bytes(ByteView)>;

enum class ReceiverMode {
    OneShot,    // serve one request, then shut down and remove the socket file
    Persistent, // serve until stopped; connections handled concurrently
};

/// Observation points of the request sequence, called on receiver threads.
struct ReceiverEvents {
    std::function<void()> on_listening;
    std::function<void()> on_connection;
    std::function<void(size_t)> on_request;
    std::function<void(size_t)> on_reply;
    std::function<void()> on_shutdown;
};

struct ReceiverOptions {
    ReceiverMode mode = ReceiverMode::OneShot;
    uint32_t max_frame = kDefaultMaxFrame;
    std::chrono::milliseconds io_timeout = kDefaultTimeout;
    ReceiverEvents events;
};

/**
 * Unix-domain-socket server answering one frame per connection with the
 * handler's result. The socket file exists exactly while the receiver is
 * live. A handler exception closes the connection without a reply.
 */
class LocalReceiver {
public:
    /// Throws AddressInUse if a live listener owns the path, IoFailure otherwise.
    static std::unique_ptr<LocalReceiver> start(SocketPath path, Handler handler, ReceiverOptions options = {});

    LocalReceiver(const LocalReceiver&) = delete;
    LocalReceiver& operator=(const LocalReceiver&) = delete;
    ~LocalReceiver();

    const SocketPath& socket_path() const noexcept;

    /// False once the receiver shut down (one-shot completion or stop()).
    bool live() const noexcept;

    /// Blocks until the receiver has shut down.
    void wait();

    /// Stops accepting, waits for in-flight requests, removes the socket file.
    void stop();

    uint64_t requests_served() const noexcept;

    struct State;

private:
    explicit LocalReceiver(std::shared_ptr<State> state);

    std::shared_ptr<State> state_;
};

/// Starts a receiver on registry.socket_path(name).
std::unique_ptr<LocalReceiver> start_receiver(
    const RunningRegistry& registry, std::string_view name, Handler handler, ReceiverOptions options = {});

/**
 * Connects, writes one frame, blocks for the reply frame. Throws
 * ConnectRefused (no listener), Timeout, FrameTooLarge, ProtocolError.
 */
Bytes send(const SocketPath& path, ByteView request, std::chrono::milliseconds timeout = kDefaultTimeout,
    uint32_t max_frame = kDefaultMaxFrame);

/// Destination for a reply body of the announced length; must return exactly that many bytes.
using ReplySink = std::function<std::span<uint8_t>(uint32_t length)>;

/// send() that reads the reply body straight into the sink's buffer. Same errors.
void send_into(const SocketPath& path, ByteView request, const ReplySink& sink,
    std::chrono::milliseconds timeout = kDefaultTimeout, uint32_t max_frame = kDefaultMaxFrame);

} // namespace cwasi::local

#endif
