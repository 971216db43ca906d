/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_WASM_READER_HPP_
#define CWASI_GUEST_WASM_READER_HPP_

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <string>

#include "cwasi/bytes.hpp"
#include "cwasi/error.hpp"

namespace cwasi::guest::wasm {

inline constexpr uint8_t kMagic[4] = {0x00, 0x61, 0x73, 0x6d};
inline constexpr uint8_t kVersion1[4] = {0x01, 0x00, 0x00, 0x00};

/**
 * Cursor over a byte range of a WebAssembly binary. Running past the end
 * raises TruncatedSection, over-long or non-canonical LEB128 encodings raise
 * MalformedLeb128.
 */
class Reader {
public:
    explicit Reader(ByteView data, size_t base_offset = 0)
        : data_(data)
        , base_(base_offset)
    {
    }

    bool eof() const noexcept { return pos_ == data_.size(); }
    size_t remaining() const noexcept { return data_.size() - pos_; }
    size_t offset() const noexcept { return base_ + pos_; }

    uint8_t peek() const
    {
        need(1);
        return data_[pos_];
    }

    uint8_t u8()
    {
        need(1);
        return data_[pos_++];
    }

    ByteView bytes(size_t count)
    {
        need(count);
        auto view = data_.subspan(pos_, count);
        pos_ += count;
        return view;
    }

    Reader sub(size_t count)
    {
        auto start = offset();
        return Reader(bytes(count), start);
    }

    uint32_t u32() { return static_cast<uint32_t>(unsigned_leb(32)); }
    uint64_t u64() { return unsigned_leb(64); }
    int32_t s32() { return static_cast<int32_t>(signed_leb(32)); }
    int64_t s33() { return signed_leb(33); }
    int64_t s64() { return signed_leb(64); }

    std::string name()
    {
        auto length = u32();
        auto view = bytes(length);
        return std::string(view.begin(), view.end());
    }

    uint32_t fixed_u32_le()
    {
        auto view = bytes(4);
        return uint32_t(view[0]) | (uint32_t(view[1]) << 8) | (uint32_t(view[2]) << 16) | (uint32_t(view[3]) << 24);
    }

    uint64_t fixed_u64_le()
    {
        auto view = bytes(8);
        uint64_t value = 0;
        for (int i = 7; i >= 0; --i) {
            value = (value << 8) | view[static_cast<size_t>(i)];
        }
        return value;
    }

private:
    void need(size_t count) const
    {
        if (count > remaining()) {
            raise(Errc::TruncatedSection, "unexpected end of data at offset " + std::to_string(offset()));
        }
    }

    uint64_t unsigned_leb(unsigned bits)
    {
        uint64_t result = 0;
        unsigned shift = 0;
        const unsigned max_bytes = (bits + 6) / 7;

        for (unsigned i = 0;; ++i) {
            auto at = offset();
            auto byte = u8();
            if (i + 1 == max_bytes) {
                // Final byte: no continuation, and no bits beyond the width.
                unsigned used = bits - shift;
                if ((byte & 0x80) != 0 || (used < 7 && (byte >> used) != 0)) {
                    raise(Errc::MalformedLeb128, "invalid LEB128 at offset " + std::to_string(at));
                }
            }
            result |= uint64_t(byte & 0x7f) << shift;
            if ((byte & 0x80) == 0) {
                return result;
            }
            shift += 7;
        }
    }

    int64_t signed_leb(unsigned bits)
    {
        uint64_t result = 0;
        unsigned shift = 0;
        const unsigned max_bytes = (bits + 6) / 7;

        for (unsigned i = 0;; ++i) {
            auto at = offset();
            auto byte = u8();
            if (i + 1 == max_bytes) {
                // Unused high bits must replicate the sign bit.
                unsigned used = bits - shift;
                if ((byte & 0x80) != 0) {
                    raise(Errc::MalformedLeb128, "invalid LEB128 at offset " + std::to_string(at));
                }
                if (used < 7) {
                    int sign_bit = (byte >> (used - 1)) & 1;
                    uint8_t high = static_cast<uint8_t>((byte & 0x7f) >> used);
                    uint8_t expected = sign_bit ? static_cast<uint8_t>(0x7f >> used) : 0;
                    if (high != expected) {
                        raise(Errc::MalformedLeb128, "invalid LEB128 at offset " + std::to_string(at));
                    }
                }
            }
            result |= uint64_t(byte & 0x7f) << shift;
            shift += 7;
            if ((byte & 0x80) == 0) {
                if (shift < 64 && (byte & 0x40) != 0) {
                    result |= ~uint64_t(0) << shift;
                }
                return static_cast<int64_t>(result);
            }
        }
    }

    ByteView data_;
    size_t pos_ = 0;
    size_t base_ = 0;
};

/// Throws BadMagic unless data starts with "\0asm" version 1.
inline void check_header(Reader& reader)
{
    if (reader.remaining() < 8) {
        raise(Errc::BadMagic, "module shorter than the 8-byte header");
    }
    auto magic = reader.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        raise(Errc::BadMagic, "missing \\0asm magic");
    }
    auto version = reader.bytes(4);
    if (!std::equal(version.begin(), version.end(), std::begin(kVersion1))) {
        raise(Errc::BadMagic, "unsupported binary version");
    }
}

} // namespace cwasi::guest::wasm

#endif
