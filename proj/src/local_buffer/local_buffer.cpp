/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/local_buffer.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <list>
#include <mutex>
#include <thread>

#include "cwasi/error.hpp"
#include "net/socket.hpp"

namespace cwasi::local {

namespace {

constexpr int kBacklog = 1024;
constexpr int kSocketBuffer = 4 * 1024 * 1024;

sockaddr_un unix_address(const SocketPath& path)
{
    sockaddr_un addr {};
    addr.sun_family = AF_UNIX;
    auto text = path.string();
    if (text.size() >= sizeof(addr.sun_path)) {
        raise(Errc::InvalidArgument, "socket path longer than " + std::to_string(sizeof(addr.sun_path) - 1)
                + " bytes: " + text);
    }
    std::memcpy(addr.sun_path, text.c_str(), text.size() + 1);
    return addr;
}

net::Fd unix_socket()
{
    net::Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd) {
        raise(Errc::IoFailure, std::string("socket: ") + std::strerror(errno));
    }
    return fd;
}

/// Returns the connected socket, or an empty Fd with errno set.
net::Fd try_connect(const SocketPath& path)
{
    auto addr = unix_address(path);
    auto fd = unix_socket();
    for (;;) {
        if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
            return fd;
        }
        if (errno == EINTR) {
            continue;
        }
        return net::Fd();
    }
}

void notify(const std::function<void()>& hook)
{
    if (hook) {
        hook();
    }
}

void notify(const std::function<void(size_t)>& hook, size_t value)
{
    if (hook) {
        hook(value);
    }
}

} // namespace

Bytes encode_frame(ByteView body, uint32_t max_frame)
{
    if (body.size() > max_frame) {
        raise(Errc::FrameTooLarge, std::to_string(body.size()) + " bytes exceeds the " + std::to_string(max_frame)
                + " byte frame limit");
    }

    Bytes out;
    out.reserve(kFramePrefix + body.size());
    put_u32_be(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Bytes decode_frame(ByteView frame, uint32_t max_frame)
{
    if (frame.size() < kFramePrefix) {
        raise(Errc::ProtocolError, "frame shorter than its length prefix");
    }
    uint32_t length = get_u32_be(frame.data());
    if (length > max_frame) {
        raise(Errc::FrameTooLarge, "frame prefix " + std::to_string(length) + " exceeds the limit");
    }
    if (frame.size() - kFramePrefix != length) {
        raise(Errc::ProtocolError, "frame prefix " + std::to_string(length) + " disagrees with body size "
                + std::to_string(frame.size() - kFramePrefix));
    }
    return Bytes(frame.begin() + kFramePrefix, frame.end());
}

struct LocalReceiver::State {
    SocketPath path;
    Handler handler;
    ReceiverOptions options;

    net::Fd listener;
    net::Waker waker;
    dev_t device = 0;
    ino_t inode = 0;

    std::mutex mutex;
    std::condition_variable finished;
    bool live = true;
    bool stopping = false;
    std::thread acceptor;

    struct Worker {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::list<Worker> workers;

    std::atomic<uint64_t> served {0};

    // Returns true when the connection carried a request.
    bool serve(net::Fd conn);
    void accept_loop();
    void reap(bool all);
    void shutdown();
};

bool LocalReceiver::State::serve(net::Fd conn)
{
    try {
        net::set_nonblocking(conn.get());
        net::set_buffer_sizes(conn.get(), kSocketBuffer);

        auto deadline = net::Deadline::after(options.io_timeout);
        uint8_t prefix[kFramePrefix];
        if (!net::read_exact(conn.get(), prefix, sizeof(prefix), deadline)) {
            return false; // probe or abandoned connection
        }
        notify(options.events.on_connection);

        uint32_t length = get_u32_be(prefix);
        if (length > options.max_frame) {
            return true;
        }
        // Left uninitialized: read_exact fills all of it or the frame is dropped.
        std::unique_ptr<uint8_t[]> body(new uint8_t[length]);
        if (length && !net::read_exact(conn.get(), body.get(), length, deadline)) {
            return true;
        }
        notify(options.events.on_request, length);

        Bytes reply = handler(ByteView(body.get(), length));
        body.reset();
        if (reply.size() > options.max_frame) {
            return true;
        }

        uint8_t reply_prefix[kFramePrefix];
        store_u32_be(reply_prefix, static_cast<uint32_t>(reply.size()));
        auto write_deadline = net::Deadline::after(options.io_timeout);
        net::write_all(conn.get(), {ByteView(reply_prefix, kFramePrefix), ByteView(reply)}, write_deadline);

        served.fetch_add(1, std::memory_order_relaxed);
        notify(options.events.on_reply, reply.size());
    } catch (const std::exception&) {
        // Dropping the connection tells the sender the request failed.
    }
    return true;
}

void LocalReceiver::State::reap(bool all)
{
    for (auto it = workers.begin(); it != workers.end();) {
        if (all || it->done->load()) {
            if (it->thread.joinable()) {
                it->thread.join();
            }
            it = workers.erase(it);
        } else {
            ++it;
        }
    }
}

void LocalReceiver::State::accept_loop()
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

        net::Fd conn(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
        if (!conn) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR || errno == ECONNABORTED) {
                continue;
            }
            break;
        }

        if (options.mode == ReceiverMode::OneShot) {
            if (serve(std::move(conn))) {
                break;
            }
            continue;
        }

        reap(false);
        auto done = std::make_shared<std::atomic<bool>>(false);
        auto* raw = new net::Fd(std::move(conn));
        workers.push_back(Worker {std::thread([this, raw, done] {
            serve(std::move(*raw));
            delete raw;
            done->store(true);
        }),
            done});
    }

    shutdown();
}

void LocalReceiver::State::shutdown()
{
    listener.reset();

    // Only remove the file if it is still the one this receiver bound.
    struct stat st {};
    if (::lstat(path.value.c_str(), &st) == 0 && st.st_dev == device && st.st_ino == inode) {
        ::unlink(path.value.c_str());
    }

    reap(true);

    {
        std::lock_guard lock(mutex);
        live = false;
    }
    notify(options.events.on_shutdown);
    finished.notify_all();
}

LocalReceiver::LocalReceiver(std::shared_ptr<State> state)
    : state_(std::move(state))
{
}

std::unique_ptr<LocalReceiver> LocalReceiver::start(SocketPath path, Handler handler, ReceiverOptions options)
{
    if (!handler) {
        raise(Errc::InvalidArgument, "receiver handler is empty");
    }
    auto addr = unix_address(path);

    struct stat st {};
    if (::lstat(path.value.c_str(), &st) == 0) {
        if (!S_ISSOCK(st.st_mode)) {
            raise(Errc::AddressInUse, path.string() + " exists and is not a socket");
        }
        if (try_connect(path)) {
            raise(Errc::AddressInUse, "a live receiver already listens on " + path.string());
        }
        ::unlink(path.value.c_str()); // stale leftover of a killed shim
    }

    auto state = std::make_shared<State>();
    state->path = std::move(path);
    state->handler = std::move(handler);
    state->options = std::move(options);
    state->listener = unix_socket();

    if (::bind(state->listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        raise(err == EADDRINUSE ? Errc::AddressInUse : Errc::IoFailure,
            "bind " + state->path.string() + ": " + std::strerror(err));
    }
    if (::lstat(state->path.value.c_str(), &st) == 0) {
        state->device = st.st_dev;
        state->inode = st.st_ino;
    }
    if (::listen(state->listener.get(), kBacklog) != 0) {
        int err = errno;
        ::unlink(state->path.value.c_str());
        raise(Errc::IoFailure, std::string("listen: ") + std::strerror(err));
    }
    net::set_nonblocking(state->listener.get());

    notify(state->options.events.on_listening);
    state->acceptor = std::thread([state] { state->accept_loop(); });

    return std::unique_ptr<LocalReceiver>(new LocalReceiver(std::move(state)));
}

LocalReceiver::~LocalReceiver()
{
    stop();
}

const SocketPath& LocalReceiver::socket_path() const noexcept
{
    return state_->path;
}

bool LocalReceiver::live() const noexcept
{
    std::lock_guard lock(state_->mutex);
    return state_->live;
}

void LocalReceiver::wait()
{
    std::unique_lock lock(state_->mutex);
    state_->finished.wait(lock, [&] { return !state_->live; });
}

void LocalReceiver::stop()
{
    {
        std::lock_guard lock(state_->mutex);
        state_->stopping = true;
    }
    state_->waker.wake();
    if (state_->acceptor.joinable()) {
        if (state_->acceptor.get_id() == std::this_thread::get_id()) {
            state_->acceptor.detach();
        } else {
            state_->acceptor.join();
        }
    }
}

uint64_t LocalReceiver::requests_served() const noexcept
{
    return state_->served.load(std::memory_order_relaxed);
}

std::unique_ptr<LocalReceiver> start_receiver(
    const RunningRegistry& registry, std::string_view name, Handler handler, ReceiverOptions options)
{
    return LocalReceiver::start(registry.socket_path(name), std::move(handler), std::move(options));
}

void send_into(const SocketPath& path, ByteView request, const ReplySink& sink, std::chrono::milliseconds timeout,
    uint32_t max_frame)
{
    if (request.size() > max_frame) {
        raise(Errc::FrameTooLarge, std::to_string(request.size()) + " byte request exceeds the frame limit");
    }

    auto conn = try_connect(path);
    if (!conn) {
        int err = errno;
        if (err == ENOENT || err == ECONNREFUSED) {
            raise(Errc::ConnectRefused, "no receiver at " + path.string());
        }
        raise(Errc::IoFailure, "connect " + path.string() + ": " + std::strerror(err));
    }
    net::set_nonblocking(conn.get());
    net::set_buffer_sizes(conn.get(), kSocketBuffer);

    auto deadline = net::Deadline::after(timeout);
    uint8_t prefix[kFramePrefix];
    store_u32_be(prefix, static_cast<uint32_t>(request.size()));
    try {
        net::write_all(conn.get(), {ByteView(prefix, kFramePrefix), request}, deadline);
    } catch (const Error& e) {
        if (e.code() == Errc::IoFailure) {
            raise(Errc::ProtocolError, std::string("receiver dropped the request: ") + e.what());
        }
        throw;
    }

    if (!net::read_exact(conn.get(), prefix, kFramePrefix, deadline)) {
        raise(Errc::ProtocolError, "receiver closed the connection without a reply");
    }
    uint32_t length = get_u32_be(prefix);
    if (length > max_frame) {
        raise(Errc::FrameTooLarge, "reply prefix " + std::to_string(length) + " exceeds the frame limit");
    }

    auto body = sink(length);
    if (body.size() != length) {
        raise(Errc::Internal, "reply sink returned a buffer of the wrong size");
    }
    if (length && !net::read_exact(conn.get(), body.data(), length, deadline)) {
        raise(Errc::ProtocolError, "reply truncated");
    }
}

Bytes send(const SocketPath& path, ByteView request, std::chrono::milliseconds timeout, uint32_t max_frame)
{
    Bytes reply;
    send_into(
        path, request,
        [&reply](uint32_t length) {
            reply.resize(length);
            return std::span<uint8_t>(reply);
        },
        timeout, max_frame);
    return reply;
}

} // namespace cwasi::local
