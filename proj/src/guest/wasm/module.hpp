/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_WASM_MODULE_HPP_
#define CWASI_GUEST_WASM_MODULE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cwasi/guest/engine.hpp"

namespace cwasi::guest::wasm {

enum class ExternKind : uint8_t { Func = 0, Table = 1, Memory = 2, Global = 3, Tag = 4 };

struct Limits {
    uint32_t min = 0;
    std::optional<uint32_t> max;
};

struct ConstExpr {
    enum class Kind { Value, GlobalGet, RefFunc, RefNull } kind = Kind::Value;
    uint64_t value = 0;
    uint32_t index = 0;
};

struct ImportDesc {
    std::string module;
    std::string name;
    ExternKind kind = ExternKind::Func;
    uint32_t type_index = 0; // func
    Limits limits;           // table, memory
    ValueType value_type = ValueType::I32; // global, table element
    bool is_mutable = false;
};

struct GlobalDef {
    ValueType type = ValueType::I32;
    bool is_mutable = false;
    ConstExpr init;
};

struct TableDef {
    ValueType element = ValueType::FuncRef;
    Limits limits;
};

struct ExportDesc {
    std::string name;
    ExternKind kind = ExternKind::Func;
    uint32_t index = 0;
};

inline constexpr uint32_t kNullFunc = UINT32_MAX;

struct ElementSegment {
    enum class Mode { Active, Passive, Declarative } mode = Mode::Active;
    uint32_t table = 0;
    ConstExpr offset;
    std::vector<uint32_t> functions; // kNullFunc for ref.null
};

struct DataSegment {
    enum class Mode { Active, Passive } mode = Mode::Active;
    uint32_t memory = 0;
    ConstExpr offset;
    Bytes bytes;
};

/**
 * Pre-decoded instruction. Opcodes with the 0xFC prefix are stored as
 * 0x100 + sub-opcode. Block-like instructions carry their matching end index
 * in `a` (and the else index in `b` for if); `imm` packs the block type as
 * (param count << 32) | result count.
 */
struct Instr {
    uint16_t op = 0;
    uint32_t a = 0;
    uint32_t b = 0;
    uint64_t imm = 0;
};

struct Function {
    uint32_t type_index = 0;
    std::vector<ValueType> locals; // declared locals, excluding params
    std::vector<Instr> code;
};

struct Module {
    std::vector<FunctionType> types;
    std::vector<ImportDesc> imports;
    std::vector<TableDef> tables;
    std::vector<Limits> memories;
    std::vector<GlobalDef> globals;
    std::vector<ExportDesc> exports;
    std::optional<uint32_t> start;
    std::vector<ElementSegment> elements;
    std::vector<DataSegment> data;
    std::vector<Function> functions;
    std::vector<uint32_t> branch_tables; // br_table targets: a = offset, b = count, default follows
    std::vector<uint32_t> function_type_indices; // whole function index space, imports first

    uint32_t imported_functions = 0;
    uint32_t imported_tables = 0;
    uint32_t imported_memories = 0;
    uint32_t imported_globals = 0;

    uint32_t function_count() const { return imported_functions + static_cast<uint32_t>(functions.size()); }

    const ExportDesc* find_export(std::string_view name, ExternKind kind) const
    {
        for (const auto& e : exports) {
            if (e.name == name && e.kind == kind) {
                return &e;
            }
        }
        return nullptr;
    }
};

/// Decodes and structurally checks a binary module.
Module decode_module(ByteView bytes);

} // namespace cwasi::guest::wasm

#endif
