/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <sys/socket.h>

#include <cstdio>
#include <deque>
#include <mutex>
#include <random>
#include <thread>

#include "broker/wire.hpp"
#include "cwasi/error.hpp"

namespace cwasi::broker {

namespace {

constexpr int kSocketBuffer = 4 * 1024 * 1024;
constexpr uint8_t kReplyOk = 0;
constexpr uint8_t kReplyFailed = 1;

std::string correlation_id()
{
    thread_local std::mt19937_64 rng(std::random_device {}() ^ std::hash<std::thread::id> {}(std::this_thread::get_id()));
    char text[17];
    std::snprintf(text, sizeof(text), "%016llx", static_cast<unsigned long long>(rng()));
    return text;
}

BrokerFrame to_frame(wire::RawFrame&& raw)
{
    BrokerFrame frame;
    frame.opcode = raw.opcode;
    frame.queue = std::string(raw.queue());
    raw.body.erase(raw.body.begin(), raw.body.begin() + static_cast<ptrdiff_t>(wire::kFixedHeader + raw.queue_length));
    frame.payload = std::move(raw.body);
    return frame;
}

void check_queue(std::string_view queue)
{
    if (!valid_queue_name(queue)) {
        raise(Errc::InvalidArgument, "invalid queue name '" + std::string(queue) + "'");
    }
}

} // namespace

struct BrokerClient::Impl {
    net::Fd fd;
    std::mutex write_mutex;
    std::deque<BrokerFrame> pending; // messages read while waiting for a sync token
    std::chrono::milliseconds io_timeout = kDefaultTimeout;

    void write(Opcode opcode, std::string_view queue, std::initializer_list<ByteView> payload)
    {
        std::lock_guard lock(write_mutex);
        try {
            wire::write_frame(fd.get(), opcode, queue, payload, net::Deadline::after(io_timeout));
        } catch (const Error& e) {
            if (e.code() == Errc::IoFailure) {
                raise(Errc::BrokerUnreachable, std::string("broker connection lost: ") + e.what());
            }
            throw;
        }
    }

    std::optional<BrokerFrame> read(const net::Deadline& deadline)
    {
        if (!pending.empty()) {
            auto frame = std::move(pending.front());
            pending.pop_front();
            return frame;
        }
        for (;;) {
            std::optional<wire::RawFrame> raw;
            try {
                raw = wire::read_frame(fd.get(), deadline);
            } catch (const Error& e) {
                if (e.code() == Errc::Timeout) {
                    throw;
                }
                return std::nullopt; // reset or shut down
            }
            if (!raw) {
                return std::nullopt;
            }
            if (raw->opcode == Opcode::Message) {
                return to_frame(std::move(*raw));
            }
        }
    }
};

BrokerClient::BrokerClient(std::unique_ptr<Impl> impl)
    : impl_(std::move(impl))
{
}

BrokerClient::~BrokerClient() = default;

std::unique_ptr<BrokerClient> BrokerClient::connect(const std::string& address, std::chrono::milliseconds timeout)
{
    auto impl = std::make_unique<Impl>();
    impl->io_timeout = timeout;
    try {
        impl->fd = net::tcp_connect(net::parse_host_port(address), net::Deadline::after(timeout));
    } catch (const Error& e) {
        raise(Errc::BrokerUnreachable, "cannot reach broker at " + address + ": " + e.what());
    }
    net::set_buffer_sizes(impl->fd.get(), kSocketBuffer);
    return std::unique_ptr<BrokerClient>(new BrokerClient(std::move(impl)));
}

void BrokerClient::subscribe(std::string_view queue)
{
    check_queue(queue);
    impl_->write(Opcode::Subscribe, queue, {});
}

void BrokerClient::subscribe_sync(std::string_view queue, std::chrono::milliseconds timeout)
{
    subscribe(queue);

    // The broker handles one connection's frames in order, so once a token
    // published after SUBSCRIBE comes back, the subscription is in place.
    auto token = correlation_id();
    auto sync_queue = std::string(queue) + ".sync." + token;
    subscribe(sync_queue);
    impl_->write(Opcode::Publish, sync_queue, {ByteView(reinterpret_cast<const uint8_t*>(token.data()), token.size())});

    auto deadline = net::Deadline::after(timeout);
    std::deque<BrokerFrame> early;
    for (;;) {
        auto frame = impl_->read(deadline);
        if (!frame) {
            raise(Errc::BrokerUnreachable, "broker closed the connection during subscribe");
        }
        if (frame->queue == sync_queue) {
            break;
        }
        early.push_back(std::move(*frame));
    }
    for (auto it = early.rbegin(); it != early.rend(); ++it) {
        impl_->pending.push_front(std::move(*it));
    }
}

void BrokerClient::publish(std::string_view queue, ByteView payload)
{
    check_queue(queue);
    impl_->write(Opcode::Publish, queue, {payload});
}

void BrokerClient::publish(std::string_view queue, std::initializer_list<ByteView> parts)
{
    check_queue(queue);
    impl_->write(Opcode::Publish, queue, parts);
}

void BrokerClient::publish_request(std::string_view queue, std::string_view reply_queue, ByteView payload)
{
    check_queue(queue);
    check_queue(reply_queue);
    uint8_t length[2] = {static_cast<uint8_t>(reply_queue.size() >> 8), static_cast<uint8_t>(reply_queue.size())};
    impl_->write(Opcode::Publish, queue,
        {ByteView(length, 2), ByteView(reinterpret_cast<const uint8_t*>(reply_queue.data()), reply_queue.size()),
            payload});
}

std::optional<BrokerFrame> BrokerClient::next_message(std::chrono::milliseconds timeout)
{
    return impl_->read(net::Deadline::after(timeout));
}

std::optional<BrokerFrame> BrokerClient::next_message()
{
    return impl_->read(net::Deadline::never());
}

void BrokerClient::shutdown() noexcept
{
    ::shutdown(impl_->fd.get(), SHUT_RDWR);
}

struct NetworkReceiver::State {
    std::string function;
    Handler handler;
    ReceiverEvents events;
    std::unique_ptr<BrokerClient> client;
    std::thread thread;
    std::atomic<bool> live {true};
    std::atomic<uint64_t> served {0};
    std::atomic<uint64_t> discarded {0};
    std::mutex stop_mutex;

    void run()
    {
        for (;;) {
            std::optional<BrokerFrame> frame;
            try {
                frame = client->next_message();
            } catch (const std::exception&) {
                break;
            }
            if (!frame) {
                break;
            }
            if (frame->queue != function) {
                continue;
            }

            RequestEnvelope request;
            try {
                request = decode_request(frame->payload);
            } catch (const Error&) {
                discarded.fetch_add(1, std::memory_order_relaxed);
                continue;
            }
            if (events.on_request) {
                events.on_request(request.payload.size());
            }

            uint8_t status = kReplyOk;
            Bytes body;
            try {
                body = handler(request.payload);
            } catch (const std::exception&) {
                status = kReplyFailed;
                body.clear();
            }

            try {
                client->publish(request.reply_queue, {ByteView(&status, 1), ByteView(body)});
                served.fetch_add(1, std::memory_order_relaxed);
                if (events.on_reply) {
                    events.on_reply(body.size());
                }
            } catch (const std::exception&) {
                break;
            }
        }
        live = false;
    }
};

NetworkReceiver::NetworkReceiver(std::shared_ptr<State> state)
    : state_(std::move(state))
{
}

std::unique_ptr<NetworkReceiver> NetworkReceiver::start(
    const std::string& broker_address, std::string function_name, Handler handler, ReceiverEvents events)
{
    check_queue(function_name);
    if (!handler) {
        raise(Errc::InvalidArgument, "network receiver handler is empty");
    }

    auto state = std::make_shared<State>();
    state->function = std::move(function_name);
    state->handler = std::move(handler);
    state->events = std::move(events);
    state->client = BrokerClient::connect(broker_address);
    state->client->subscribe_sync(state->function);
    if (state->events.on_subscribed) {
        state->events.on_subscribed();
    }

    state->thread = std::thread([state] { state->run(); });
    return std::unique_ptr<NetworkReceiver>(new NetworkReceiver(std::move(state)));
}

NetworkReceiver::~NetworkReceiver()
{
    stop();
}

const std::string& NetworkReceiver::function_name() const noexcept
{
    return state_->function;
}

bool NetworkReceiver::live() const noexcept
{
    return state_->live.load();
}

uint64_t NetworkReceiver::requests_served() const noexcept
{
    return state_->served.load(std::memory_order_relaxed);
}

uint64_t NetworkReceiver::requests_discarded() const noexcept
{
    return state_->discarded.load(std::memory_order_relaxed);
}

void NetworkReceiver::stop()
{
    std::lock_guard lock(state_->stop_mutex);
    state_->client->shutdown();
    if (state_->thread.joinable()) {
        if (state_->thread.get_id() == std::this_thread::get_id()) {
            state_->thread.detach();
        } else {
            state_->thread.join();
        }
    }
    state_->live = false;
}

Bytes publish_request(const std::string& broker_address, std::string_view target, ByteView payload,
    std::chrono::milliseconds timeout, std::string_view source)
{
    check_queue(target);
    auto reply_queue = reply_queue_name(source, correlation_id());
    check_queue(reply_queue);

    auto client = BrokerClient::connect(broker_address, timeout);
    // Same-connection ordering: the subscription is registered before the
    // request can reach the receiver.
    client->subscribe(reply_queue);
    client->publish_request(target, reply_queue, payload);

    auto deadline = net::Clock::now() + timeout;
    for (;;) {
        auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - net::Clock::now());
        if (left.count() <= 0) {
            raise(Errc::Timeout, "no reply from " + std::string(target));
        }
        std::optional<BrokerFrame> frame;
        try {
            frame = client->next_message(left);
        } catch (const Error& e) {
            if (e.code() == Errc::Timeout) {
                raise(Errc::Timeout, "no reply from " + std::string(target) + " within "
                        + std::to_string(timeout.count()) + " ms");
            }
            throw;
        }
        if (!frame) {
            raise(Errc::BrokerUnreachable, "broker closed the connection before the reply");
        }
        if (frame->queue != reply_queue) {
            continue;
        }
        if (frame->payload.empty()) {
            raise(Errc::ProtocolError, "reply without status byte");
        }
        if (frame->payload[0] != kReplyOk) {
            raise(Errc::ProtocolError, std::string(target) + " failed to handle the request");
        }
        frame->payload.erase(frame->payload.begin());
        return std::move(frame->payload);
    }
}

} // namespace cwasi::broker
