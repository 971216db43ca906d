/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_WASM_INTERPRETER_HPP_
#define CWASI_GUEST_WASM_INTERPRETER_HPP_

#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "guest/wasm/module.hpp"

namespace cwasi::guest::wasm {

struct GlobalCell {
    ValueType type = ValueType::I32;
    bool is_mutable = false;
    uint64_t value = 0;
};

class Instance;

/// A function reference: owner == nullptr is the null reference.
struct TableEntry {
    Instance* owner = nullptr;
    uint32_t index = 0;
};

struct Table {
    std::vector<TableEntry> elements;
    std::optional<uint32_t> max;
};

struct FunctionSlot {
    enum class Kind { Defined, Forward, Host } kind = Kind::Defined;
    Instance* owner = nullptr; // Forward: instance that defines or imports the function
    uint32_t index = 0;        // Forward: index in owner's space
    const HostFunction* host = nullptr;
    const FunctionType* type = nullptr;
};

/// One instantiated module inside a guest.
class Instance {
public:
    std::string name;
    std::shared_ptr<const Module> module;
    std::vector<FunctionSlot> functions;
    std::vector<std::shared_ptr<GlobalCell>> globals;
    std::vector<std::shared_ptr<Table>> tables;
    std::shared_ptr<LinearMemory> memory;
    std::vector<bool> dropped_data;
    std::vector<bool> dropped_elements;
};

/**
 * Stack interpreter shared by all modules of one guest. Re-entrant on the
 * executor thread (host calls may call back into the guest); not thread-safe.
 */
class Machine {
public:
    static constexpr uint32_t kMaxCallDepth = 1000;
    static constexpr size_t kMaxStackSlots = size_t(1) << 24;

    Machine(GuestInstance& owner, const std::atomic<bool>& interrupt)
        : owner_(owner)
        , interrupt_(interrupt)
    {
        stack_.resize(4096);
    }

    std::vector<uint64_t> invoke(Instance& instance, uint32_t function_index, std::span<const uint64_t> args);

private:
    struct Label {
        size_t height;
        uint32_t cont;
        uint32_t arity;
        bool loop;
    };

    void call(Instance& instance, uint32_t function_index);
    void call_host(const FunctionSlot& slot);
    void execute(Instance& instance, const Function& function, const FunctionType& type);

    [[noreturn]] static void trap(const char* what);

    void push(uint64_t value)
    {
        if (sp_ == stack_.size()) {
            grow_stack();
        }
        stack_[sp_++] = value;
    }

    uint64_t pop()
    {
        if (sp_ <= floor_) {
            trap("value stack underflow");
        }
        return stack_[--sp_];
    }

    uint64_t& top()
    {
        if (sp_ <= floor_) {
            trap("value stack underflow");
        }
        return stack_[sp_ - 1];
    }

    void grow_stack();

    GuestInstance& owner_;
    const std::atomic<bool>& interrupt_;
    std::vector<uint64_t> stack_;
    size_t sp_ = 0;
    size_t floor_ = 0;
    std::vector<Label> labels_;
    uint32_t depth_ = 0;
};

/// Evaluates a constant expression against an instance's globals.
uint64_t evaluate(const ConstExpr& expr, const Instance& instance);

} // namespace cwasi::guest::wasm

#endif
