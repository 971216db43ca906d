/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/error.hpp"
#include "cwasi/linker.hpp"

#include "guest/wasm/reader.hpp"

namespace cwasi {

namespace {

using guest::wasm::Reader;

constexpr uint8_t kImportSectionId = 2;

void skip_limits(Reader& reader)
{
    auto flags = reader.u8();
    if (flags > 0x07) {
        raise(Errc::MalformedModule, "invalid limits flags " + std::to_string(flags));
    }
    bool is64 = (flags & 0x04) != 0;
    bool has_max = (flags & 0x01) != 0;

    is64 ? reader.u64() : reader.u32();
    if (has_max) {
        is64 ? reader.u64() : reader.u32();
    }
}

void skip_descriptor(Reader& reader)
{
    auto kind = reader.u8();
    switch (kind) {
    case 0x00: // func: type index
        reader.u32();
        break;
    case 0x01: // table: reftype + limits
        reader.u8();
        skip_limits(reader);
        break;
    case 0x02: // memory
        skip_limits(reader);
        break;
    case 0x03: // global: valtype + mutability
        reader.u8();
        if (reader.u8() > 1) {
            raise(Errc::MalformedModule, "invalid global mutability");
        }
        break;
    case 0x04: // tag: attribute + type index
        reader.u8();
        reader.u32();
        break;
    default:
        raise(Errc::MalformedModule, "unknown import kind " + std::to_string(kind));
    }
}

void read_import_section(Reader section, ImportSet& imports)
{
    auto count = section.u32();
    for (uint32_t i = 0; i < count; ++i) {
        auto module = section.name();
        auto name = section.name();
        skip_descriptor(section);

        if (module.empty()) {
            raise(Errc::MalformedModule, "import with an empty module name");
        }
        imports.insert(Import {std::move(module), std::move(name)});
    }

    if (!section.eof()) {
        raise(Errc::MalformedModule, "import section has trailing bytes");
    }
}

} // namespace

ImportSet parse_binary_imports(ByteView module_bytes)
{
    Reader reader(module_bytes);
    guest::wasm::check_header(reader);

    ImportSet imports;

    while (!reader.eof()) {
        auto id = reader.u8();
        auto size = reader.u32();
        auto section = reader.sub(size);

        if (id == kImportSectionId) {
            read_import_section(section, imports);
        }
    }

    return imports;
}

ImportSet read_imports(const guest::ModuleArtifact& artifact)
{
    if (artifact.is_text()) {
        return scan_text_imports(std::string_view(reinterpret_cast<const char*>(artifact.bytes.data()), artifact.bytes.size()));
    }

    return parse_binary_imports(artifact.bytes);
}

} // namespace cwasi
