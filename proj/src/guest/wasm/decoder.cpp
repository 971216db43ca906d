/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <algorithm>

#include "guest/wasm/module.hpp"
#include "guest/wasm/reader.hpp"

namespace cwasi::guest::wasm {

namespace {

constexpr uint32_t kMaxLocals = 50000;

enum SectionId : uint8_t {
    kCustom = 0,
    kType = 1,
    kImport = 2,
    kFunction = 3,
    kTable = 4,
    kMemory = 5,
    kGlobal = 6,
    kExport = 7,
    kStart = 8,
    kElement = 9,
    kCode = 10,
    kData = 11,
    kDataCount = 12,
};

[[noreturn]] void malformed(const std::string& what)
{
    raise(Errc::MalformedModule, what);
}

[[noreturn]] void unsupported(const std::string& what)
{
    raise(Errc::EngineError, "unsupported feature: " + what);
}

bool is_value_type(uint8_t byte)
{
    return byte == 0x7f || byte == 0x7e || byte == 0x7d || byte == 0x7c || byte == 0x70 || byte == 0x6f;
}

ValueType read_value_type(Reader& r)
{
    auto byte = r.u8();
    if (!is_value_type(byte)) {
        if (byte == 0x7b) {
            unsupported("v128 values");
        }
        malformed("invalid value type 0x" + std::to_string(byte));
    }
    return static_cast<ValueType>(byte);
}

Limits read_limits(Reader& r)
{
    auto flags = r.u8();
    if (flags & 0x04) {
        unsupported("64-bit memories");
    }
    if (flags & 0x02) {
        unsupported("shared memories");
    }
    if (flags > 1) {
        malformed("invalid limits flags");
    }

    Limits limits;
    limits.min = r.u32();
    if (flags & 0x01) {
        limits.max = r.u32();
        if (*limits.max < limits.min) {
            malformed("limits maximum below minimum");
        }
    }
    return limits;
}

ConstExpr read_const_expr(Reader& r)
{
    ConstExpr expr;
    auto op = r.u8();
    switch (op) {
    case 0x41:
        expr.value = static_cast<uint32_t>(r.s32());
        break;
    case 0x42:
        expr.value = static_cast<uint64_t>(r.s64());
        break;
    case 0x43:
        expr.value = r.fixed_u32_le();
        break;
    case 0x44:
        expr.value = r.fixed_u64_le();
        break;
    case 0x23:
        expr.kind = ConstExpr::Kind::GlobalGet;
        expr.index = r.u32();
        break;
    case 0xd0:
        expr.kind = ConstExpr::Kind::RefNull;
        r.u8();
        break;
    case 0xd2:
        expr.kind = ConstExpr::Kind::RefFunc;
        expr.index = r.u32();
        break;
    default:
        unsupported("constant expression opcode " + std::to_string(op));
    }
    if (r.u8() != 0x0b) {
        unsupported("extended constant expressions");
    }
    return expr;
}

size_t bounded(uint32_t count, const Reader& r)
{
    return std::min<size_t>(count, r.remaining());
}

class CodeDecoder {
public:
    CodeDecoder(Module& module, Function& function)
        : module_(module)
        , function_(function)
    {
    }

    void decode(Reader& r)
    {
        auto& code = function_.code;
        std::vector<uint32_t> open; // indices of block/loop/if awaiting their end

        while (true) {
            Instr in;
            auto byte = r.u8();
            in.op = byte;
            auto index = static_cast<uint32_t>(code.size());

            switch (byte) {
            case 0x02: // block
            case 0x03: // loop
            case 0x04: // if
                in.imm = block_type(r);
                open.push_back(index);
                break;
            case 0x05: { // else
                if (open.empty() || code[open.back()].op != 0x04 || code[open.back()].b != 0) {
                    malformed("else without matching if");
                }
                code[open.back()].b = index;
                break;
            }
            case 0x0b: // end
                if (open.empty()) {
                    code.push_back(in);
                    if (!r.eof()) {
                        malformed("bytes after function end");
                    }
                    return;
                }
                {
                    auto& opener = code[open.back()];
                    opener.a = index;
                    if (opener.op == 0x04 && opener.b != 0) {
                        code[opener.b].a = index;
                    }
                    open.pop_back();
                }
                break;
            case 0x0c: // br
            case 0x0d: // br_if
                in.a = r.u32();
                break;
            case 0x0e: { // br_table
                auto count = r.u32();
                in.a = static_cast<uint32_t>(module_.branch_tables.size());
                in.b = count;
                for (uint32_t i = 0; i <= count; ++i) {
                    module_.branch_tables.push_back(r.u32());
                }
                break;
            }
            case 0x10: // call
                in.a = r.u32();
                break;
            case 0x11: // call_indirect
                in.a = r.u32();
                in.b = r.u32();
                break;
            case 0x12:
            case 0x13:
                unsupported("tail calls");
            case 0x1c: { // select t*
                auto count = r.u32();
                if (count != 1) {
                    malformed("typed select needs exactly one type");
                }
                read_value_type(r);
                in.op = 0x1b;
                break;
            }
            case 0x20:
            case 0x21:
            case 0x22:
            case 0x23:
            case 0x24:
                in.a = r.u32();
                break;
            case 0x25:
            case 0x26:
                unsupported("table.get/table.set");
            case 0x3f: // memory.size
            case 0x40: // memory.grow
                if (r.u8() != 0) {
                    unsupported("multiple memories");
                }
                break;
            case 0x41:
                in.imm = static_cast<uint32_t>(r.s32());
                break;
            case 0x42:
                in.imm = static_cast<uint64_t>(r.s64());
                break;
            case 0x43:
                in.imm = r.fixed_u32_le();
                break;
            case 0x44:
                in.imm = r.fixed_u64_le();
                break;
            case 0xd0:
                read_value_type(r);
                break;
            case 0xd2:
                in.a = r.u32();
                break;
            case 0xfc:
                prefixed(r, in);
                break;
            default:
                if (byte >= 0x28 && byte <= 0x3e) {
                    auto align = r.u32();
                    if (align & 0x40) {
                        unsupported("multiple memories");
                    }
                    in.a = r.u32();
                } else if (!plain(byte)) {
                    unsupported("opcode 0x" + hex(byte));
                }
            }

            code.push_back(in);
        }
    }

private:
    static std::string hex(unsigned value)
    {
        static const char* digits = "0123456789abcdef";
        std::string s;
        do {
            s.insert(s.begin(), digits[value & 0xf]);
            value >>= 4;
        } while (value);
        return s;
    }

    static bool plain(uint8_t byte)
    {
        return byte == 0x00 || byte == 0x01 || byte == 0x0f || byte == 0x1a || byte == 0x1b
            || (byte >= 0x45 && byte <= 0xc4) || byte == 0xd1;
    }

    uint64_t block_type(Reader& r)
    {
        auto byte = r.peek();
        if (byte == 0x40) {
            r.u8();
            return 0;
        }
        if (is_value_type(byte)) {
            r.u8();
            return 1;
        }

        auto type_index = r.s33();
        if (type_index < 0 || static_cast<uint64_t>(type_index) >= module_.types.size()) {
            malformed("block type index out of range");
        }
        const auto& type = module_.types[static_cast<size_t>(type_index)];
        return (uint64_t(type.params.size()) << 32) | type.results.size();
    }

    void prefixed(Reader& r, Instr& in)
    {
        auto sub = r.u32();
        in.op = static_cast<uint16_t>(0x100 + sub);
        switch (sub) {
        case 0:
        case 1:
        case 2:
        case 3:
        case 4:
        case 5:
        case 6:
        case 7:
            break;
        case 8: // memory.init
            in.a = r.u32();
            if (r.u8() != 0) {
                unsupported("multiple memories");
            }
            break;
        case 9: // data.drop
            in.a = r.u32();
            break;
        case 10: // memory.copy
            if (r.u8() != 0 || r.u8() != 0) {
                unsupported("multiple memories");
            }
            break;
        case 11: // memory.fill
            if (r.u8() != 0) {
                unsupported("multiple memories");
            }
            break;
        default:
            unsupported("opcode 0xfc " + std::to_string(sub));
        }
    }

    Module& module_;
    Function& function_;
};

void decode_types(Reader r, Module& m)
{
    auto count = r.u32();
    m.types.reserve(bounded(count, r));
    for (uint32_t i = 0; i < count; ++i) {
        if (r.u8() != 0x60) {
            malformed("expected function type");
        }
        FunctionType type;
        auto params = r.u32();
        for (uint32_t p = 0; p < params; ++p) {
            type.params.push_back(read_value_type(r));
        }
        auto results = r.u32();
        for (uint32_t p = 0; p < results; ++p) {
            type.results.push_back(read_value_type(r));
        }
        m.types.push_back(std::move(type));
    }
    if (!r.eof()) {
        malformed("type section has trailing bytes");
    }
}

void decode_imports(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        ImportDesc desc;
        desc.module = r.name();
        desc.name = r.name();
        auto kind = r.u8();
        switch (kind) {
        case 0:
            desc.kind = ExternKind::Func;
            desc.type_index = r.u32();
            if (desc.type_index >= m.types.size()) {
                malformed("import type index out of range");
            }
            m.function_type_indices.push_back(desc.type_index);
            ++m.imported_functions;
            break;
        case 1:
            desc.kind = ExternKind::Table;
            desc.value_type = read_value_type(r);
            desc.limits = read_limits(r);
            ++m.imported_tables;
            break;
        case 2:
            desc.kind = ExternKind::Memory;
            desc.limits = read_limits(r);
            ++m.imported_memories;
            break;
        case 3:
            desc.kind = ExternKind::Global;
            desc.value_type = read_value_type(r);
            desc.is_mutable = r.u8() != 0;
            ++m.imported_globals;
            break;
        case 4:
            unsupported("exception tags");
        default:
            malformed("unknown import kind");
        }
        m.imports.push_back(std::move(desc));
    }
    if (!r.eof()) {
        malformed("import section has trailing bytes");
    }
}

void decode_functions(Reader r, Module& m)
{
    auto count = r.u32();
    m.functions.resize(bounded(count, r));
    if (m.functions.size() != count) {
        raise(Errc::TruncatedSection, "function section truncated");
    }
    for (auto& fn : m.functions) {
        fn.type_index = r.u32();
        if (fn.type_index >= m.types.size()) {
            malformed("function type index out of range");
        }
        m.function_type_indices.push_back(fn.type_index);
    }
    if (!r.eof()) {
        malformed("function section has trailing bytes");
    }
}

void decode_tables(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        TableDef table;
        table.element = read_value_type(r);
        table.limits = read_limits(r);
        m.tables.push_back(table);
    }
}

void decode_memories(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        auto limits = read_limits(r);
        if (limits.min > LinearMemory::kMaxPages || (limits.max && *limits.max > LinearMemory::kMaxPages)) {
            malformed("memory size exceeds 4 GiB");
        }
        m.memories.push_back(limits);
    }
    if (m.memories.size() + m.imported_memories > 1) {
        unsupported("multiple memories");
    }
}

void decode_globals(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        GlobalDef global;
        global.type = read_value_type(r);
        global.is_mutable = r.u8() != 0;
        global.init = read_const_expr(r);
        m.globals.push_back(global);
    }
}

void decode_exports(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        ExportDesc desc;
        desc.name = r.name();
        auto kind = r.u8();
        if (kind > 3) {
            malformed("unknown export kind");
        }
        desc.kind = static_cast<ExternKind>(kind);
        desc.index = r.u32();
        m.exports.push_back(std::move(desc));
    }
}

std::vector<uint32_t> read_function_indices(Reader& r)
{
    std::vector<uint32_t> functions;
    auto count = r.u32();
    functions.reserve(bounded(count, r));
    for (uint32_t i = 0; i < count; ++i) {
        functions.push_back(r.u32());
    }
    return functions;
}

std::vector<uint32_t> read_element_exprs(Reader& r)
{
    std::vector<uint32_t> functions;
    auto count = r.u32();
    functions.reserve(bounded(count, r));
    for (uint32_t i = 0; i < count; ++i) {
        auto expr = read_const_expr(r);
        if (expr.kind == ConstExpr::Kind::RefFunc) {
            functions.push_back(expr.index);
        } else if (expr.kind == ConstExpr::Kind::RefNull) {
            functions.push_back(kNullFunc);
        } else {
            unsupported("element expression");
        }
    }
    return functions;
}

void decode_elements(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        ElementSegment seg;
        auto flags = r.u32();
        switch (flags) {
        case 0:
            seg.offset = read_const_expr(r);
            seg.functions = read_function_indices(r);
            break;
        case 1:
        case 3:
            seg.mode = flags == 1 ? ElementSegment::Mode::Passive : ElementSegment::Mode::Declarative;
            r.u8(); // elemkind
            seg.functions = read_function_indices(r);
            break;
        case 2:
            seg.table = r.u32();
            seg.offset = read_const_expr(r);
            r.u8();
            seg.functions = read_function_indices(r);
            break;
        case 4:
            seg.offset = read_const_expr(r);
            seg.functions = read_element_exprs(r);
            break;
        case 5:
        case 7:
            seg.mode = flags == 5 ? ElementSegment::Mode::Passive : ElementSegment::Mode::Declarative;
            read_value_type(r);
            seg.functions = read_element_exprs(r);
            break;
        case 6:
            seg.table = r.u32();
            seg.offset = read_const_expr(r);
            read_value_type(r);
            seg.functions = read_element_exprs(r);
            break;
        default:
            malformed("invalid element segment flags");
        }
        m.elements.push_back(std::move(seg));
    }
}

void decode_code(Reader r, Module& m)
{
    auto count = r.u32();
    if (count != m.functions.size()) {
        malformed("function and code section counts differ");
    }

    for (auto& fn : m.functions) {
        auto body = r.sub(r.u32());

        uint64_t total = 0;
        auto groups = body.u32();
        for (uint32_t g = 0; g < groups; ++g) {
            auto n = body.u32();
            auto type = read_value_type(body);
            total += n;
            if (total > kMaxLocals) {
                unsupported("more than 50000 locals");
            }
            fn.locals.insert(fn.locals.end(), n, type);
        }

        CodeDecoder(m, fn).decode(body);
    }
}

void decode_data(Reader r, Module& m)
{
    auto count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        DataSegment seg;
        auto flags = r.u32();
        switch (flags) {
        case 0:
            seg.offset = read_const_expr(r);
            break;
        case 1:
            seg.mode = DataSegment::Mode::Passive;
            break;
        case 2:
            seg.memory = r.u32();
            seg.offset = read_const_expr(r);
            break;
        default:
            malformed("invalid data segment flags");
        }
        auto size = r.u32();
        auto bytes = r.bytes(size);
        seg.bytes.assign(bytes.begin(), bytes.end());
        m.data.push_back(std::move(seg));
    }
}

} // namespace

Module decode_module(ByteView bytes)
{
    Reader reader(bytes);
    check_header(reader);

    Module m;
    uint8_t last_id = 0;

    while (!reader.eof()) {
        auto id = reader.u8();
        auto section = reader.sub(reader.u32());

        if (id != kCustom) {
            // Data count (12) sits between element and code sections.
            auto order = [](uint8_t s) { return s == kDataCount ? 9.5 : double(s); };
            if (last_id != 0 && order(id) <= order(last_id)) {
                malformed("section " + std::to_string(id) + " out of order");
            }
            last_id = id;
        }

        switch (id) {
        case kCustom:
        case kDataCount:
            break;
        case kType:
            decode_types(section, m);
            break;
        case kImport:
            decode_imports(section, m);
            break;
        case kFunction:
            decode_functions(section, m);
            break;
        case kTable:
            decode_tables(section, m);
            break;
        case kMemory:
            decode_memories(section, m);
            break;
        case kGlobal:
            decode_globals(section, m);
            break;
        case kExport:
            decode_exports(section, m);
            break;
        case kStart:
            m.start = section.u32();
            break;
        case kElement:
            decode_elements(section, m);
            break;
        case kCode:
            decode_code(section, m);
            break;
        case kData:
            decode_data(section, m);
            break;
        default:
            malformed("unknown section id " + std::to_string(id));
        }
    }

    if (m.imported_memories + m.memories.size() > 1) {
        unsupported("multiple memories");
    }
    for (const auto& fn : m.functions) {
        if (fn.code.empty()) {
            malformed("function without body");
        }
    }
    for (const auto& e : m.exports) {
        if (e.kind == ExternKind::Func && e.index >= m.function_count()) {
            malformed("export references a missing function");
        }
    }
    if (m.start && *m.start >= m.function_count()) {
        malformed("start function index out of range");
    }

    return m;
}

} // namespace cwasi::guest::wasm
