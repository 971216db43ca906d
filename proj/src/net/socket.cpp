/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cwasi/error.hpp"

namespace cwasi::net {

namespace {

std::string errno_text(int err)
{
    return std::strerror(err);
}

} // namespace

void Fd::reset(int fd) noexcept
{
    if (fd_ >= 0) {
        ::close(fd_);
    }
    fd_ = fd;
}

int Deadline::poll_timeout() const
{
    if (infinite()) {
        return -1;
    }
    // Rounded up, so a poll never returns before the deadline.
    auto left = std::chrono::ceil<std::chrono::milliseconds>(at_ - Clock::now()).count();
    if (left <= 0) {
        return 0;
    }
    return left > INT32_MAX ? INT32_MAX : static_cast<int>(left);
}

void set_nonblocking(int fd)
{
    int flags = ::fcntl(fd, F_GETFL, 0);
    if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) {
        raise(Errc::IoFailure, "fcntl: " + errno_text(errno));
    }
}

void set_buffer_sizes(int fd, int bytes)
{
    // Best effort; the kernel clamps to its limits.
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &bytes, sizeof(bytes));
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes));
}

void wait_for(int fd, short events, const Deadline& deadline, const char* what)
{
    for (;;) {
        pollfd p {fd, events, 0};
        int timeout = deadline.poll_timeout();
        int rc = ::poll(&p, 1, timeout);
        if (rc > 0) {
            return;
        }
        if (rc == 0 && deadline.expired()) {
            raise(Errc::Timeout, std::string("timed out waiting to ") + what);
        }
        if (rc < 0 && errno != EINTR) {
            raise(Errc::IoFailure, std::string("poll: ") + errno_text(errno));
        }
    }
}

void write_all(int fd, ByteView data, const Deadline& deadline)
{
    size_t done = 0;
    while (done < data.size()) {
        ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
        if (n > 0) {
            done += static_cast<size_t>(n);
            continue;
        }
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            wait_for(fd, POLLOUT, deadline, "write");
            continue;
        }
        raise(Errc::IoFailure, "send: " + errno_text(errno));
    }
}

void write_all(int fd, std::initializer_list<ByteView> parts, const Deadline& deadline)
{
    constexpr size_t kMaxParts = 8;
    if (parts.size() > kMaxParts) {
        raise(Errc::InvalidArgument, "too many parts for one gathered write");
    }

    iovec iov[kMaxParts];
    size_t count = 0;
    for (auto part : parts) {
        if (!part.empty()) {
            iov[count++] = iovec {const_cast<uint8_t*>(part.data()), part.size()};
        }
    }

    size_t first = 0;
    while (first < count) {
        msghdr msg {};
        msg.msg_iov = iov + first;
        msg.msg_iovlen = count - first;
        ssize_t n = ::sendmsg(fd, &msg, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                wait_for(fd, POLLOUT, deadline, "write");
                continue;
            }
            raise(Errc::IoFailure, "sendmsg: " + errno_text(errno));
        }
        auto sent = static_cast<size_t>(n);
        while (first < count && sent >= iov[first].iov_len) {
            sent -= iov[first++].iov_len;
        }
        if (first < count) {
            iov[first].iov_base = static_cast<uint8_t*>(iov[first].iov_base) + sent;
            iov[first].iov_len -= sent;
        }
    }
}

bool read_exact(int fd, uint8_t* buf, size_t length, const Deadline& deadline)
{
    size_t done = 0;
    while (done < length) {
        ssize_t n = ::recv(fd, buf + done, length - done, 0);
        if (n > 0) {
            done += static_cast<size_t>(n);
            continue;
        }
        if (n == 0) {
            if (done == 0) {
                return false;
            }
            raise(Errc::ProtocolError, "peer closed the connection mid-frame");
        }
        if (errno == EINTR) {
            continue;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            wait_for(fd, POLLIN, deadline, "read");
            continue;
        }
        if (errno == ECONNRESET) {
            raise(Errc::ProtocolError, "connection reset by peer");
        }
        raise(Errc::IoFailure, "recv: " + errno_text(errno));
    }
    return true;
}

Waker::Waker()
{
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC | O_NONBLOCK) != 0) {
        raise(Errc::IoFailure, "pipe: " + errno_text(errno));
    }
    read_.reset(fds[0]);
    write_.reset(fds[1]);
}

void Waker::wake() noexcept
{
    uint8_t byte = 1;
    [[maybe_unused]] auto rc = ::write(write_.get(), &byte, 1);
}

HostPort parse_host_port(const std::string& address)
{
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
        raise(Errc::InvalidArgument, "expected host:port, got '" + address + "'");
    }

    HostPort out;
    out.host = address.substr(0, colon);
    if (out.host == "localhost") {
        out.host = "127.0.0.1";
    }

    unsigned long port = 0;
    try {
        size_t used = 0;
        port = std::stoul(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        raise(Errc::InvalidArgument, "bad port in '" + address + "'");
    }
    if (port > 65535) {
        raise(Errc::InvalidArgument, "port out of range in '" + address + "'");
    }
    out.port = static_cast<uint16_t>(port);

    in_addr probe {};
    if (::inet_pton(AF_INET, out.host.c_str(), &probe) != 1) {
        raise(Errc::InvalidArgument, "host must be a numeric IPv4 address: '" + out.host + "'");
    }
    return out;
}

Fd tcp_connect(const HostPort& address, const Deadline& deadline)
{
    Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
    if (!fd) {
        raise(Errc::IoFailure, "socket: " + errno_text(errno));
    }

    sockaddr_in addr {};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(address.port);
    ::inet_pton(AF_INET, address.host.c_str(), &addr.sin_addr);

    int rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (rc != 0 && errno != EINPROGRESS) {
        int err = errno;
        raise(err == ECONNREFUSED ? Errc::ConnectRefused : Errc::IoFailure,
            "connect " + address.to_string() + ": " + errno_text(err));
    }
    if (rc != 0) {
        wait_for(fd.get(), POLLOUT, deadline, "connect");
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            raise(err == ECONNREFUSED ? Errc::ConnectRefused : Errc::IoFailure,
                "connect " + address.to_string() + ": " + errno_text(err));
        }
    }

    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return fd;
}

} // namespace cwasi::net
