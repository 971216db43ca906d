/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "broker/wire.hpp"
#include "cwasi/error.hpp"

namespace cwasi::broker {

namespace {

constexpr int kBacklog = 1024;
constexpr int kSocketBuffer = 4 * 1024 * 1024;
constexpr std::chrono::milliseconds kDeliveryTimeout {30000};

struct Connection {
    net::Fd fd;
    std::mutex write_mutex;
    std::atomic<bool> closed {false};

    void close() noexcept
    {
        if (!closed.exchange(true)) {
            ::shutdown(fd.get(), SHUT_RDWR);
        }
    }
};

using ConnectionPtr = std::shared_ptr<Connection>;

} // namespace

struct Broker::State {
    net::Fd listener;
    net::Waker waker;
    std::string host;
    uint16_t port = 0;

    mutable std::mutex mutex;
    std::map<std::string, std::set<ConnectionPtr>, std::less<>> subscriptions;
    std::set<ConnectionPtr> connections;
    bool stopping = false;

    struct Worker {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::list<Worker> workers; // touched only by the acceptor thread and stop()
    std::thread acceptor;

    std::atomic<uint64_t> published {0};
    std::atomic<uint64_t> delivered {0};

    void accept_loop();
    void serve(const ConnectionPtr& conn);
    void deliver(wire::RawFrame& frame);
    void drop(const ConnectionPtr& conn);
    void reap(bool all);
};

void Broker::State::deliver(wire::RawFrame& frame)
{
    std::vector<ConnectionPtr> targets;
    {
        std::lock_guard lock(mutex);
        auto it = subscriptions.find(frame.queue());
        if (it != subscriptions.end()) {
            targets.assign(it->second.begin(), it->second.end());
        }
    }
    published.fetch_add(1, std::memory_order_relaxed);

    // The forwarded frame differs from the PUBLISH only in its opcode.
    frame.body[0] = static_cast<uint8_t>(Opcode::Message);
    uint8_t prefix[wire::kLengthPrefix];
    store_u32_be(prefix, static_cast<uint32_t>(frame.body.size()));

    for (const auto& target : targets) {
        if (target->closed) {
            continue;
        }
        try {
            std::lock_guard lock(target->write_mutex);
            auto deadline = net::Deadline::after(kDeliveryTimeout);
            net::write_all(target->fd.get(), ByteView(prefix, sizeof(prefix)), deadline);
            net::write_all(target->fd.get(), frame.body, deadline);
            delivered.fetch_add(1, std::memory_order_relaxed);
        } catch (const std::exception&) {
            // A subscriber that cannot take the message is disconnected; no redelivery.
            target->close();
        }
    }
}

void Broker::State::drop(const ConnectionPtr& conn)
{
    conn->close();
    std::lock_guard lock(mutex);
    for (auto it = subscriptions.begin(); it != subscriptions.end();) {
        it->second.erase(conn);
        it = it->second.empty() ? subscriptions.erase(it) : std::next(it);
    }
    connections.erase(conn);
}

void Broker::State::serve(const ConnectionPtr& conn)
{
    try {
        for (;;) {
            auto frame = wire::read_frame(conn->fd.get(), net::Deadline::never());
            if (!frame) {
                break;
            }
            switch (frame->opcode) {
            case Opcode::Subscribe: {
                std::lock_guard lock(mutex);
                subscriptions[std::string(frame->queue())].insert(conn);
                break;
            }
            case Opcode::Publish:
                deliver(*frame);
                break;
            case Opcode::Message:
                raise(Errc::ProtocolError, "clients may not send MESSAGE frames");
            }
        }
    } catch (const std::exception&) {
        // Protocol violations and I/O errors end the connection.
    }
    drop(conn);
}

void Broker::State::reap(bool all)
{
    for (auto it = workers.begin(); it != workers.end();) {
        if (all || it->done->load()) {
            it->thread.join();
            it = workers.erase(it);
        } else {
            ++it;
        }
    }
}

void Broker::State::accept_loop()
{
    for (;;) {
        pollfd fds[2] = {{listener.get(), POLLIN, 0}, {waker.read_fd(), POLLIN, 0}};
        int rc = ::poll(fds, 2, -1);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        if (fds[1].revents) {
            break;
        }

        int raw = ::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC);
        if (raw < 0) {
            continue;
        }

        auto conn = std::make_shared<Connection>();
        conn->fd.reset(raw);
        int one = 1;
        ::setsockopt(raw, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        net::set_buffer_sizes(raw, kSocketBuffer);
        try {
            net::set_nonblocking(raw);
        } catch (const std::exception&) {
            continue;
        }

        {
            std::lock_guard lock(mutex);
            if (stopping) {
                break;
            }
            connections.insert(conn);
        }

        reap(false);
        auto done = std::make_shared<std::atomic<bool>>(false);
        workers.push_back(Worker {std::thread([this, conn, done] {
            serve(conn);
            done->store(true);
        }),
            done});
    }
}

Broker::Broker(std::shared_ptr<State> state)
    : state_(std::move(state))
{
}

std::unique_ptr<Broker> Broker::serve(const std::string& bind_address)
{
    net::HostPort hp;
    try {
        hp = net::parse_host_port(bind_address);
    } catch (const Error& e) {
        raise(Errc::BindFailure, e.what());
    }

    auto state = std::make_shared<State>();
    state->listener.reset(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!state->listener) {
        raise(Errc::BindFailure, std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(state->listener.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr {};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(hp.port);
    ::inet_pton(AF_INET, hp.host.c_str(), &addr.sin_addr);
    if (::bind(state->listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0
        || ::listen(state->listener.get(), kBacklog) != 0) {
        raise(Errc::BindFailure, "cannot listen on " + bind_address + ": " + std::strerror(errno));
    }

    socklen_t len = sizeof(addr);
    ::getsockname(state->listener.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    state->host = hp.host;
    state->port = ntohs(addr.sin_port);
    net::set_nonblocking(state->listener.get());

    state->acceptor = std::thread([raw = state.get()] { raw->accept_loop(); });
    return std::unique_ptr<Broker>(new Broker(std::move(state)));
}

Broker::~Broker()
{
    stop();
}

std::string Broker::address() const
{
    return state_->host + ":" + std::to_string(state_->port);
}

uint16_t Broker::port() const noexcept
{
    return state_->port;
}

size_t Broker::subscriber_count(std::string_view queue) const
{
    std::lock_guard lock(state_->mutex);
    auto it = state_->subscriptions.find(queue);
    return it == state_->subscriptions.end() ? 0 : it->second.size();
}

uint64_t Broker::published() const noexcept
{
    return state_->published.load(std::memory_order_relaxed);
}

uint64_t Broker::delivered() const noexcept
{
    return state_->delivered.load(std::memory_order_relaxed);
}

void Broker::stop()
{
    {
        std::lock_guard lock(state_->mutex);
        if (state_->stopping) {
            return;
        }
        state_->stopping = true;
    }

    state_->waker.wake();
    if (state_->acceptor.joinable()) {
        state_->acceptor.join();
    }
    state_->listener.reset();

    std::vector<ConnectionPtr> open;
    {
        std::lock_guard lock(state_->mutex);
        open.assign(state_->connections.begin(), state_->connections.end());
    }
    for (const auto& conn : open) {
        conn->close();
    }
    state_->reap(true);
}

} // namespace cwasi::broker
