/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_BROKER_HPP_
#define CWASI_BROKER_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "cwasi/bytes.hpp"

namespace cwasi::broker {

inline constexpr std::string_view kDefaultAddress = "127.0.0.1:7077";
inline constexpr std::chrono::milliseconds kDefaultTimeout {30000};

/// Largest accepted total_length: a 256 MiB payload plus headers.
inline constexpr uint32_t kMaxFrame = 256u * 1024 * 1024 + 256u * 1024;

enum class Opcode : uint8_t {
    Publish = 0x01,
    Subscribe = 0x02,
    Message = 0x03,
};

/**
 * Wire frame: u32-BE total_length, u8 opcode, u16-BE queue_length, queue,
 * payload. total_length counts everything after itself.
 */
struct BrokerFrame {
    Opcode opcode = Opcode::Publish;
    std::string queue;
    Bytes payload;

    bool operator==(const BrokerFrame&) const = default;
};

/// Throws InvalidArgument for a bad queue name, FrameTooLarge above kMaxFrame.
Bytes encode_frame(const BrokerFrame& frame);

/// Inverse of encode_frame over one complete frame. Throws ProtocolError.
BrokerFrame decode_frame(ByteView data);

/// Non-empty, at most 65535 bytes, no whitespace or control characters.
bool valid_queue_name(std::string_view name) noexcept;

/// Request carried to a network receiver: u16-BE reply-queue length, reply queue, payload.
struct RequestEnvelope {
    std::string reply_queue;
    Bytes payload;

    bool operator==(const RequestEnvelope&) const = default;
};

Bytes encode_request(const RequestEnvelope& request);

/// Throws DecodeError on truncation or an invalid reply-queue name.
RequestEnvelope decode_request(ByteView data);

/// "<source>.reply.<correlation_id>"
std::string reply_queue_name(std::string_view source, std::string_view correlation_id);

/// Reference pub/sub broker: at-most-once delivery to current subscribers.
class Broker {
public:
    /// Binds host:port (port 0 picks a free port). Throws BindFailure.
    static std::unique_ptr<Broker> serve(const std::string& bind_address = std::string(kDefaultAddress));

    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;
    ~Broker();

    /// Actual listening address as host:port.
    std::string address() const;
    uint16_t port() const noexcept;

    size_t subscriber_count(std::string_view queue) const;
    uint64_t published() const noexcept;
    uint64_t delivered() const noexcept;

    void stop();

    struct State;

private:
    explicit Broker(std::shared_ptr<State> state);

    std::shared_ptr<State> state_;
};

/**
 * One broker connection. Writes are thread-safe; reads (next_message) must
 * come from a single thread.
 */
class BrokerClient {
public:
    /// Throws BrokerUnreachable.
    static std::unique_ptr<BrokerClient> connect(
        const std::string& address, std::chrono::milliseconds timeout = kDefaultTimeout);

    BrokerClient(const BrokerClient&) = delete;
    BrokerClient& operator=(const BrokerClient&) = delete;
    ~BrokerClient();

    void subscribe(std::string_view queue);

    /// Subscribes and waits until the broker has registered the subscription.
    void subscribe_sync(std::string_view queue, std::chrono::milliseconds timeout = kDefaultTimeout);

    void publish(std::string_view queue, ByteView payload);

    /// Publishes the concatenation of parts as one payload.
    void publish(std::string_view queue, std::initializer_list<ByteView> parts);

    /// Publishes a request envelope without materializing it in one buffer.
    void publish_request(std::string_view queue, std::string_view reply_queue, ByteView payload);

    /// Next MESSAGE frame; nullopt when the connection closed. Throws Timeout.
    std::optional<BrokerFrame> next_message(std::chrono::milliseconds timeout);
    std::optional<BrokerFrame> next_message();

    /// Unblocks a pending next_message from another thread.
    void shutdown() noexcept;

    struct Impl;

private:
    explicit BrokerClient(std::unique_ptr<Impl> impl);

    std::unique_ptr<Impl> impl_;
};

using Handler = std::function<Bytes(ByteView)>;

struct ReceiverEvents {
    std::function<void()> on_subscribed;
    std::function<void(size_t)> on_request;
    std::function<void(size_t)> on_reply;
};

/**
 * Subscription of a function to its queue. Each message is a request
 * envelope; the handler's result is published to the stated reply queue as a
 * status byte (0 ok, 1 handler failure) followed by the body. Malformed
 * requests are discarded.
 */
class NetworkReceiver {
public:
    /// Returns once the subscription is registered. Throws BrokerUnreachable.
    static std::unique_ptr<NetworkReceiver> start(
        const std::string& broker_address, std::string function_name, Handler handler, ReceiverEvents events = {});

    NetworkReceiver(const NetworkReceiver&) = delete;
    NetworkReceiver& operator=(const NetworkReceiver&) = delete;
    ~NetworkReceiver();

    const std::string& function_name() const noexcept;
    bool live() const noexcept;
    uint64_t requests_served() const noexcept;
    uint64_t requests_discarded() const noexcept;

    void stop();

    struct State;

private:
    explicit NetworkReceiver(std::shared_ptr<State> state);

    std::shared_ptr<State> state_;
};

inline std::unique_ptr<NetworkReceiver> network_receiver(
    const std::string& broker_address, std::string function_name, Handler handler, ReceiverEvents events = {})
{
    return NetworkReceiver::start(broker_address, std::move(function_name), std::move(handler), std::move(events));
}

/**
 * Request/reply over pub/sub: subscribes to a fresh reply queue, publishes
 * the request to target and waits for the reply. Throws Timeout,
 * BrokerUnreachable, and ProtocolError when the remote handler failed.
 */
Bytes publish_request(const std::string& broker_address, std::string_view target, ByteView payload,
    std::chrono::milliseconds timeout = kDefaultTimeout, std::string_view source = "client");

} // namespace cwasi::broker

#endif
