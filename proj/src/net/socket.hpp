/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_NET_SOCKET_HPP_
#define CWASI_NET_SOCKET_HPP_

#include <chrono>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>

#include "cwasi/bytes.hpp"

namespace cwasi::net {

using Clock = std::chrono::steady_clock;

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) noexcept
        : fd_(fd)
    {
    }
    Fd(Fd&& other) noexcept
        : fd_(std::exchange(other.fd_, -1))
    {
    }
    Fd& operator=(Fd&& other) noexcept
    {
        if (this != &other) {
            reset(std::exchange(other.fd_, -1));
        }
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    void reset(int fd = -1) noexcept;

private:
    int fd_ = -1;
};

class Deadline {
public:
    static Deadline after(std::chrono::milliseconds timeout) { return Deadline(Clock::now() + timeout); }
    static Deadline never() { return Deadline(Clock::time_point::max()); }

    bool infinite() const noexcept { return at_ == Clock::time_point::max(); }
    bool expired() const { return !infinite() && Clock::now() >= at_; }

    /// Milliseconds left for poll(): -1 when infinite, 0 once expired.
    int poll_timeout() const;

private:
    explicit Deadline(Clock::time_point at)
        : at_(at)
    {
    }

    Clock::time_point at_;
};

void set_nonblocking(int fd);
void set_buffer_sizes(int fd, int bytes);

/// Waits for events on fd; raises Timeout when the deadline passes.
void wait_for(int fd, short events, const Deadline& deadline, const char* what);

void write_all(int fd, ByteView data, const Deadline& deadline);

/// Gathered write of all parts in order, one syscall when the socket buffer allows.
void write_all(int fd, std::initializer_list<ByteView> parts, const Deadline& deadline);

/// Fills buf completely. Returns false on EOF before the first byte; raises
/// ProtocolError on EOF after it.
bool read_exact(int fd, uint8_t* buf, size_t length, const Deadline& deadline);

/// Self-pipe used to wake a poll loop from another thread.
class Waker {
public:
    Waker();

    int read_fd() const noexcept { return read_.get(); }
    void wake() noexcept;

private:
    Fd read_;
    Fd write_;
};

/// TCP helpers. Addresses are "host:port"; host must be a numeric IPv4 address or "localhost".
struct HostPort {
    std::string host;
    uint16_t port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
};

HostPort parse_host_port(const std::string& address);

/// Raises ConnectRefused when nothing listens, Timeout when the deadline passes.
Fd tcp_connect(const HostPort& address, const Deadline& deadline);

} // namespace cwasi::net

#endif
