/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_BYTES_HPP_
#define CWASI_BYTES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cwasi {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

inline Bytes to_bytes(std::string_view text)
{
    return Bytes(text.begin(), text.end());
}

inline std::string to_string(ByteView data)
{
    return std::string(data.begin(), data.end());
}

inline void put_u16_be(Bytes& out, uint16_t value)
{
    out.push_back(static_cast<uint8_t>(value >> 8));
    out.push_back(static_cast<uint8_t>(value));
}

inline void put_u32_be(Bytes& out, uint32_t value)
{
    out.push_back(static_cast<uint8_t>(value >> 24));
    out.push_back(static_cast<uint8_t>(value >> 16));
    out.push_back(static_cast<uint8_t>(value >> 8));
    out.push_back(static_cast<uint8_t>(value));
}

inline void store_u32_be(uint8_t* out, uint32_t value)
{
    out[0] = static_cast<uint8_t>(value >> 24);
    out[1] = static_cast<uint8_t>(value >> 16);
    out[2] = static_cast<uint8_t>(value >> 8);
    out[3] = static_cast<uint8_t>(value);
}

inline uint16_t get_u16_be(const uint8_t* in)
{
    return static_cast<uint16_t>((in[0] << 8) | in[1]);
}

inline uint32_t get_u32_be(const uint8_t* in)
{
    return (uint32_t(in[0]) << 24) | (uint32_t(in[1]) << 16) | (uint32_t(in[2]) << 8) | uint32_t(in[3]);
}

} // namespace cwasi

#endif
