/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <algorithm>
#include <cctype>
#include <limits>

#include "cwasi/bench.hpp"
#include "cwasi/error.hpp"

namespace cwasi::bench {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

} // namespace

std::string_view pattern_name(Pattern pattern) noexcept
{
    switch (pattern) {
    case Pattern::Sequential:
        return "sequential";
    case Pattern::FanOut:
        return "fanout";
    case Pattern::FanIn:
        return "fanin";
    }
    return "unknown";
}

Pattern parse_pattern(std::string_view name)
{
    if (name == "sequential") {
        return Pattern::Sequential;
    }
    if (name == "fanout" || name == "fan-out") {
        return Pattern::FanOut;
    }
    if (name == "fanin" || name == "fan-in") {
        return Pattern::FanIn;
    }
    raise(Errc::InvalidArgument, "unknown pattern '" + std::string(name) + "'");
}

uint64_t parse_size(std::string_view text)
{
    if (text.empty()) {
        raise(Errc::InvalidArgument, "empty size");
    }

    uint64_t multiplier = 1;
    char suffix = static_cast<char>(std::toupper(static_cast<unsigned char>(text.back())));
    if (suffix == 'K' || suffix == 'M' || suffix == 'G') {
        multiplier = suffix == 'K' ? 1024ull : suffix == 'M' ? 1024ull * 1024 : 1024ull * 1024 * 1024;
        text.remove_suffix(1);
    } else if (suffix == 'B') {
        text.remove_suffix(1);
    }
    if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        raise(Errc::InvalidArgument, "malformed size '" + std::string(text) + "'");
    }

    uint64_t value = 0;
    for (char c : text) {
        if (value > (std::numeric_limits<uint64_t>::max() - 9) / 10) {
            raise(Errc::InvalidArgument, "size overflows");
        }
        value = value * 10 + static_cast<uint64_t>(c - '0');
    }
    if (value > std::numeric_limits<uint64_t>::max() / multiplier) {
        raise(Errc::InvalidArgument, "size overflows");
    }
    return value * multiplier;
}

const std::vector<std::string>& handler_names()
{
    static const std::vector<std::string> names {"echo", "reverse", "checksum"};
    return names;
}

Bytes apply_handler(std::string_view handler, ByteView payload)
{
    if (handler == "echo") {
        return Bytes(payload.begin(), payload.end());
    }
    if (handler == "reverse") {
        return Bytes(payload.rbegin(), payload.rend());
    }
    if (handler == "checksum") {
        uint64_t hash = kFnvOffset;
        for (uint8_t b : payload) {
            hash = (hash ^ b) * kFnvPrime;
        }
        Bytes out;
        out.reserve(payload.size() + 8);
        out.assign(payload.begin(), payload.end());
        for (int shift = 56; shift >= 0; shift -= 8) {
            out.push_back(static_cast<uint8_t>(hash >> shift));
        }
        return out;
    }
    raise(Errc::InvalidArgument, "unknown handler '" + std::string(handler) + "'");
}

} // namespace cwasi::bench
