/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_ERROR_HPP_
#define CWASI_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cwasi {

/**
 * Error conditions raised by the runtime. Values are mirrored one-to-one by
 * the C API status codes in cwasi.h, so the numbering is part of the ABI.
 */
enum class Errc : int {
    Ok = 0,
    // spec
    MalformedConfig = 1,
    MissingArgs = 2,
    // registry
    DuplicateFunction = 3,
    IoFailure = 4,
    ScanFailure = 5,
    // linker
    UnparsableText = 6,
    BadMagic = 7,
    TruncatedSection = 8,
    MalformedLeb128 = 9,
    MalformedModule = 10,
    LinkError = 11,
    EngineError = 12,
    // guest engine
    OutOfBounds = 13,
    BadState = 14,
    AllocationFailure = 15,
    TruncatedEnvelope = 16,
    EmptyName = 17,
    BadTransition = 18,
    Trap = 19,
    // local buffer
    AddressInUse = 20,
    ConnectRefused = 21,
    Timeout = 22,
    FrameTooLarge = 23,
    ProtocolError = 24,
    // broker
    BindFailure = 25,
    BrokerUnreachable = 26,
    // coordinator
    DecodeError = 27,
    StartupFailure = 28,
    // bench
    InfraUnavailable = 29,
    ZeroElapsed = 30,
    Unsupported = 31,
    // generic
    InvalidArgument = 32,
    NotFound = 33,
    Internal = 34,
};

/// Stable identifier for an error code, e.g. "MissingArgs".
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message)
        , code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace cwasi

#endif
