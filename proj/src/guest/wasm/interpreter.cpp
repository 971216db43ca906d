/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "guest/wasm/interpreter.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "cwasi/error.hpp"

namespace cwasi::guest::wasm {

static_assert(std::endian::native == std::endian::little, "the interpreter assumes a little-endian host");

namespace {

float as_f32(uint64_t v)
{
    return std::bit_cast<float>(static_cast<uint32_t>(v));
}

double as_f64(uint64_t v)
{
    return std::bit_cast<double>(v);
}

uint64_t from_f32(float f)
{
    return std::bit_cast<uint32_t>(f);
}

uint64_t from_f64(double d)
{
    return std::bit_cast<uint64_t>(d);
}

template <typename F>
F wasm_min(F a, F b)
{
    if (std::isnan(a) || std::isnan(b)) {
        return std::numeric_limits<F>::quiet_NaN();
    }
    if (a == b) {
        return std::signbit(a) ? a : b;
    }
    return a < b ? a : b;
}

template <typename F>
F wasm_max(F a, F b)
{
    if (std::isnan(a) || std::isnan(b)) {
        return std::numeric_limits<F>::quiet_NaN();
    }
    if (a == b) {
        return std::signbit(a) ? b : a;
    }
    return a > b ? a : b;
}

template <typename I, typename F>
I truncate(F x)
{
    if (std::isnan(x)) {
        raise(Errc::Trap, "invalid conversion to integer");
    }
    long double t = std::trunc(static_cast<long double>(x));
    if (t < static_cast<long double>(std::numeric_limits<I>::min())
        || t > static_cast<long double>(std::numeric_limits<I>::max())) {
        raise(Errc::Trap, "integer overflow");
    }
    return static_cast<I>(t);
}

template <typename I, typename F>
I truncate_saturating(F x)
{
    if (std::isnan(x)) {
        return 0;
    }
    long double t = std::trunc(static_cast<long double>(x));
    if (t < static_cast<long double>(std::numeric_limits<I>::min())) {
        return std::numeric_limits<I>::min();
    }
    if (t > static_cast<long double>(std::numeric_limits<I>::max())) {
        return std::numeric_limits<I>::max();
    }
    return static_cast<I>(t);
}

uint64_t u32v(uint32_t v)
{
    return v;
}

// Result counts of a block type: imm = (params << 32) | results.
uint32_t block_params(const Instr& in)
{
    return static_cast<uint32_t>(in.imm >> 32);
}

uint32_t block_results(const Instr& in)
{
    return static_cast<uint32_t>(in.imm);
}

struct DepthGuard {
    explicit DepthGuard(uint32_t& depth)
        : depth_(depth)
    {
        ++depth_;
    }
    ~DepthGuard() { --depth_; }
    uint32_t& depth_;
};

} // namespace

uint64_t evaluate(const ConstExpr& expr, const Instance& instance)
{
    switch (expr.kind) {
    case ConstExpr::Kind::Value:
        return expr.value;
    case ConstExpr::Kind::GlobalGet:
        if (expr.index >= instance.globals.size()) {
            raise(Errc::MalformedModule, "constant expression references a missing global");
        }
        return instance.globals[expr.index]->value;
    case ConstExpr::Kind::RefFunc:
        return expr.index;
    case ConstExpr::Kind::RefNull:
        return kNullFunc;
    }
    return 0;
}

void Machine::trap(const char* what)
{
    raise(Errc::Trap, what);
}

void Machine::grow_stack()
{
    if (stack_.size() >= kMaxStackSlots) {
        trap("value stack exhausted");
    }
    stack_.resize(stack_.size() * 2);
}

std::vector<uint64_t> Machine::invoke(Instance& instance, uint32_t function_index, std::span<const uint64_t> args)
{
    if (function_index >= instance.functions.size()) {
        raise(Errc::LinkError, "function index out of range");
    }
    const auto& type = *instance.functions[function_index].type;
    if (args.size() != type.params.size()) {
        raise(Errc::InvalidArgument,
            "expected " + std::to_string(type.params.size()) + " arguments, got " + std::to_string(args.size()));
    }

    auto saved_sp = sp_;
    auto saved_floor = floor_;
    auto saved_labels = labels_.size();

    try {
        floor_ = sp_;
        for (auto arg : args) {
            push(arg);
        }
        call(instance, function_index);

        std::vector<uint64_t> results(stack_.begin() + static_cast<ptrdiff_t>(sp_ - type.results.size()),
            stack_.begin() + static_cast<ptrdiff_t>(sp_));

        sp_ = saved_sp;
        floor_ = saved_floor;
        return results;
    } catch (...) {
        sp_ = saved_sp;
        floor_ = saved_floor;
        labels_.resize(saved_labels);
        throw;
    }
}

void Machine::call_host(const FunctionSlot& slot)
{
    const auto& type = *slot.type;
    auto nparams = type.params.size();
    if (sp_ - floor_ < nparams) {
        trap("value stack underflow");
    }

    std::vector<uint64_t> args(stack_.begin() + static_cast<ptrdiff_t>(sp_ - nparams),
        stack_.begin() + static_cast<ptrdiff_t>(sp_));
    sp_ -= nparams;

    std::vector<uint64_t> results(type.results.size());
    slot.host->callback(owner_, args, results);

    for (size_t i = 0; i < results.size(); ++i) {
        auto value = results[i];
        if (type.results[i] == ValueType::I32 || type.results[i] == ValueType::F32) {
            value = static_cast<uint32_t>(value);
        }
        push(value);
    }
}

void Machine::call(Instance& instance, uint32_t function_index)
{
    if (function_index >= instance.functions.size()) {
        trap("call to a missing function");
    }
    if (interrupt_.load(std::memory_order_relaxed)) {
        trap("interrupted");
    }

    const auto& slot = instance.functions[function_index];
    switch (slot.kind) {
    case FunctionSlot::Kind::Host:
        call_host(slot);
        return;
    case FunctionSlot::Kind::Forward:
        call(*slot.owner, slot.index);
        return;
    case FunctionSlot::Kind::Defined: {
        const auto& fn = instance.module->functions[function_index - instance.module->imported_functions];
        execute(instance, fn, *slot.type);
        return;
    }
    }
}

void Machine::execute(Instance& inst, const Function& fn, const FunctionType& type)
{
    DepthGuard guard(depth_);
    if (depth_ > kMaxCallDepth) {
        trap("call stack exhausted");
    }

    const size_t nparams = type.params.size();
    const size_t nresults = type.results.size();
    if (sp_ - floor_ < nparams) {
        trap("value stack underflow");
    }

    const size_t base = sp_ - nparams;
    const size_t nlocals = nparams + fn.locals.size();
    for (size_t i = 0; i < fn.locals.size(); ++i) {
        push(0);
    }

    const size_t saved_floor = floor_;
    floor_ = base + nlocals;
    const size_t label_base = labels_.size();

    const Instr* code = fn.code.data();
    const Module& module = *inst.module;
    uint32_t pc = 0;

    auto memory = [&]() -> LinearMemory& {
        if (!inst.memory) {
            trap("no linear memory");
        }
        return *inst.memory;
    };

    auto effective = [&](const Instr& in, size_t size) -> uint8_t* {
        uint64_t addr = uint64_t(static_cast<uint32_t>(pop())) + in.a;
        auto& mem = memory();
        if (!mem.contains(addr, size)) {
            trap("out of bounds memory access");
        }
        return mem.data() + addr;
    };

    auto do_return = [&]() {
        if (sp_ - floor_ < nresults) {
            trap("value stack underflow");
        }
        std::memmove(&stack_[base], &stack_[sp_ - nresults], nresults * sizeof(uint64_t));
        sp_ = base + nresults;
        labels_.resize(label_base);
        floor_ = saved_floor;
    };

    // Returns true when the branch leaves the function.
    auto branch = [&](uint32_t depth) -> bool {
        size_t open = labels_.size() - label_base;
        if (depth > open) {
            trap("branch depth out of range");
        }
        if (depth == open) {
            do_return();
            return true;
        }

        size_t index = labels_.size() - 1 - depth;
        const Label label = labels_[index];
        if (sp_ < label.height + label.arity) {
            trap("value stack underflow");
        }
        if (label.arity) {
            std::memmove(&stack_[label.height], &stack_[sp_ - label.arity], label.arity * sizeof(uint64_t));
        }
        sp_ = label.height + label.arity;

        if (label.loop) {
            labels_.resize(index + 1);
            if (interrupt_.load(std::memory_order_relaxed)) {
                trap("interrupted");
            }
        } else {
            labels_.resize(index);
        }
        pc = label.cont;
        return false;
    };

    auto check_local = [&](uint32_t index) {
        if (index >= nlocals) {
            trap("local index out of range");
        }
    };

    auto check_global = [&](uint32_t index) {
        if (index >= inst.globals.size()) {
            trap("global index out of range");
        }
    };

#define I32_UNARY(expr)                                                                                                \
    {                                                                                                                  \
        uint32_t a = static_cast<uint32_t>(top());                                                                     \
        top() = u32v(expr);                                                                                            \
        break;                                                                                                         \
    }
#define I32_BINARY(expr)                                                                                               \
    {                                                                                                                  \
        uint32_t b = static_cast<uint32_t>(pop());                                                                     \
        uint32_t a = static_cast<uint32_t>(top());                                                                     \
        top() = u32v(expr);                                                                                            \
        break;                                                                                                         \
    }
#define I64_UNARY(expr)                                                                                                \
    {                                                                                                                  \
        uint64_t a = top();                                                                                            \
        top() = static_cast<uint64_t>(expr);                                                                           \
        break;                                                                                                         \
    }
#define I64_BINARY(expr)                                                                                               \
    {                                                                                                                  \
        uint64_t b = pop();                                                                                            \
        uint64_t a = top();                                                                                            \
        top() = static_cast<uint64_t>(expr);                                                                           \
        break;                                                                                                         \
    }
#define F32_UNARY(expr)                                                                                                \
    {                                                                                                                  \
        float a = as_f32(top());                                                                                       \
        top() = from_f32(expr);                                                                                        \
        break;                                                                                                         \
    }
#define F32_BINARY(expr)                                                                                               \
    {                                                                                                                  \
        float b = as_f32(pop());                                                                                       \
        float a = as_f32(top());                                                                                       \
        top() = from_f32(expr);                                                                                        \
        break;                                                                                                         \
    }
#define F32_COMPARE(expr)                                                                                              \
    {                                                                                                                  \
        float b = as_f32(pop());                                                                                       \
        float a = as_f32(top());                                                                                       \
        top() = (expr) ? 1 : 0;                                                                                        \
        break;                                                                                                         \
    }
#define F64_UNARY(expr)                                                                                                \
    {                                                                                                                  \
        double a = as_f64(top());                                                                                      \
        top() = from_f64(expr);                                                                                        \
        break;                                                                                                         \
    }
#define F64_BINARY(expr)                                                                                               \
    {                                                                                                                  \
        double b = as_f64(pop());                                                                                      \
        double a = as_f64(top());                                                                                      \
        top() = from_f64(expr);                                                                                        \
        break;                                                                                                         \
    }
#define F64_COMPARE(expr)                                                                                              \
    {                                                                                                                  \
        double b = as_f64(pop());                                                                                      \
        double a = as_f64(top());                                                                                      \
        top() = (expr) ? 1 : 0;                                                                                        \
        break;                                                                                                         \
    }
#define LOAD(T, convert)                                                                                               \
    {                                                                                                                  \
        T value;                                                                                                       \
        std::memcpy(&value, effective(in, sizeof(T)), sizeof(T));                                                      \
        push(convert);                                                                                                 \
        break;                                                                                                         \
    }
#define STORE(T)                                                                                                       \
    {                                                                                                                  \
        T value = static_cast<T>(pop());                                                                               \
        std::memcpy(effective(in, sizeof(T)), &value, sizeof(T));                                                      \
        break;                                                                                                         \
    }

    labels_.push_back(Label {floor_, static_cast<uint32_t>(fn.code.size()), static_cast<uint32_t>(nresults), false});

    for (;;) {
        const Instr& in = code[pc++];

        switch (in.op) {
        case 0x00:
            trap("unreachable executed");
        case 0x01:
            break;
        case 0x02: // block
            labels_.push_back(Label {sp_ - block_params(in), in.a + 1, block_results(in), false});
            if (labels_.back().height < floor_) {
                trap("value stack underflow");
            }
            break;
        case 0x03: // loop
            labels_.push_back(Label {sp_ - block_params(in), pc, block_params(in), true});
            if (labels_.back().height < floor_) {
                trap("value stack underflow");
            }
            break;
        case 0x04: { // if
            auto cond = static_cast<uint32_t>(pop());
            labels_.push_back(Label {sp_ - block_params(in), in.a + 1, block_results(in), false});
            if (labels_.back().height < floor_) {
                trap("value stack underflow");
            }
            if (!cond) {
                pc = in.b ? in.b + 1 : in.a;
            }
            break;
        }
        case 0x05: // else: the then-branch is done
            pc = in.a;
            break;
        case 0x0b: // end
            if (labels_.size() - label_base == 1) {
                do_return();
                return;
            }
            labels_.pop_back();
            break;
        case 0x0c:
            if (branch(in.a)) {
                return;
            }
            break;
        case 0x0d:
            if (static_cast<uint32_t>(pop()) && branch(in.a)) {
                return;
            }
            break;
        case 0x0e: {
            auto index = static_cast<uint32_t>(pop());
            auto target = module.branch_tables[in.a + std::min(index, in.b)];
            if (branch(target)) {
                return;
            }
            break;
        }
        case 0x0f:
            do_return();
            return;
        case 0x10:
            call(inst, in.a);
            break;
        case 0x11: {
            if (in.b >= inst.tables.size() || in.a >= module.types.size()) {
                trap("call_indirect references a missing table or type");
            }
            auto index = static_cast<uint32_t>(pop());
            const auto& table = *inst.tables[in.b];
            if (index >= table.elements.size()) {
                trap("undefined table element");
            }
            auto target = table.elements[index];
            if (!target.owner || target.index >= target.owner->functions.size()) {
                trap("uninitialized table element");
            }
            if (*target.owner->functions[target.index].type != module.types[in.a]) {
                trap("indirect call type mismatch");
            }
            call(*target.owner, target.index);
            break;
        }
        case 0x1a:
            pop();
            break;
        case 0x1b: {
            auto cond = static_cast<uint32_t>(pop());
            auto b = pop();
            if (!cond) {
                top() = b;
            } else {
                top();
            }
            break;
        }
        case 0x20:
            check_local(in.a);
            push(stack_[base + in.a]);
            break;
        case 0x21:
            check_local(in.a);
            stack_[base + in.a] = pop();
            break;
        case 0x22:
            check_local(in.a);
            stack_[base + in.a] = top();
            break;
        case 0x23:
            check_global(in.a);
            push(inst.globals[in.a]->value);
            break;
        case 0x24:
            check_global(in.a);
            inst.globals[in.a]->value = pop();
            break;

        case 0x28:
            LOAD(uint32_t, u32v(value))
        case 0x29:
            LOAD(uint64_t, value)
        case 0x2a:
            LOAD(uint32_t, u32v(value))
        case 0x2b:
            LOAD(uint64_t, value)
        case 0x2c:
            LOAD(int8_t, u32v(static_cast<uint32_t>(static_cast<int32_t>(value))))
        case 0x2d:
            LOAD(uint8_t, u32v(value))
        case 0x2e:
            LOAD(int16_t, u32v(static_cast<uint32_t>(static_cast<int32_t>(value))))
        case 0x2f:
            LOAD(uint16_t, u32v(value))
        case 0x30:
            LOAD(int8_t, static_cast<uint64_t>(static_cast<int64_t>(value)))
        case 0x31:
            LOAD(uint8_t, uint64_t(value))
        case 0x32:
            LOAD(int16_t, static_cast<uint64_t>(static_cast<int64_t>(value)))
        case 0x33:
            LOAD(uint16_t, uint64_t(value))
        case 0x34:
            LOAD(int32_t, static_cast<uint64_t>(static_cast<int64_t>(value)))
        case 0x35:
            LOAD(uint32_t, uint64_t(value))
        case 0x36:
            STORE(uint32_t)
        case 0x37:
            STORE(uint64_t)
        case 0x38:
            STORE(uint32_t)
        case 0x39:
            STORE(uint64_t)
        case 0x3a:
            STORE(uint8_t)
        case 0x3b:
            STORE(uint16_t)
        case 0x3c:
            STORE(uint8_t)
        case 0x3d:
            STORE(uint16_t)
        case 0x3e:
            STORE(uint32_t)
        case 0x3f:
            push(memory().pages());
            break;
        case 0x40: {
            auto delta = static_cast<uint32_t>(pop());
            auto old = memory().grow(delta);
            push(u32v(static_cast<uint32_t>(old)));
            break;
        }
        case 0x41:
        case 0x42:
        case 0x43:
        case 0x44:
            push(in.imm);
            break;

        case 0x45:
            I32_UNARY(a == 0)
        case 0x46:
            I32_BINARY(a == b)
        case 0x47:
            I32_BINARY(a != b)
        case 0x48:
            I32_BINARY(static_cast<int32_t>(a) < static_cast<int32_t>(b))
        case 0x49:
            I32_BINARY(a < b)
        case 0x4a:
            I32_BINARY(static_cast<int32_t>(a) > static_cast<int32_t>(b))
        case 0x4b:
            I32_BINARY(a > b)
        case 0x4c:
            I32_BINARY(static_cast<int32_t>(a) <= static_cast<int32_t>(b))
        case 0x4d:
            I32_BINARY(a <= b)
        case 0x4e:
            I32_BINARY(static_cast<int32_t>(a) >= static_cast<int32_t>(b))
        case 0x4f:
            I32_BINARY(a >= b)

        case 0x50:
            I64_UNARY(a == 0)
        case 0x51:
            I64_BINARY(a == b)
        case 0x52:
            I64_BINARY(a != b)
        case 0x53:
            I64_BINARY(static_cast<int64_t>(a) < static_cast<int64_t>(b))
        case 0x54:
            I64_BINARY(a < b)
        case 0x55:
            I64_BINARY(static_cast<int64_t>(a) > static_cast<int64_t>(b))
        case 0x56:
            I64_BINARY(a > b)
        case 0x57:
            I64_BINARY(static_cast<int64_t>(a) <= static_cast<int64_t>(b))
        case 0x58:
            I64_BINARY(a <= b)
        case 0x59:
            I64_BINARY(static_cast<int64_t>(a) >= static_cast<int64_t>(b))
        case 0x5a:
            I64_BINARY(a >= b)

        case 0x5b:
            F32_COMPARE(a == b)
        case 0x5c:
            F32_COMPARE(a != b)
        case 0x5d:
            F32_COMPARE(a < b)
        case 0x5e:
            F32_COMPARE(a > b)
        case 0x5f:
            F32_COMPARE(a <= b)
        case 0x60:
            F32_COMPARE(a >= b)
        case 0x61:
            F64_COMPARE(a == b)
        case 0x62:
            F64_COMPARE(a != b)
        case 0x63:
            F64_COMPARE(a < b)
        case 0x64:
            F64_COMPARE(a > b)
        case 0x65:
            F64_COMPARE(a <= b)
        case 0x66:
            F64_COMPARE(a >= b)

        case 0x67:
            I32_UNARY(std::countl_zero(a))
        case 0x68:
            I32_UNARY(std::countr_zero(a))
        case 0x69:
            I32_UNARY(std::popcount(a))
        case 0x6a:
            I32_BINARY(a + b)
        case 0x6b:
            I32_BINARY(a - b)
        case 0x6c:
            I32_BINARY(a * b)
        case 0x6d: {
            auto b = static_cast<int32_t>(pop());
            auto a = static_cast<int32_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            if (a == std::numeric_limits<int32_t>::min() && b == -1) {
                trap("integer overflow");
            }
            top() = u32v(static_cast<uint32_t>(a / b));
            break;
        }
        case 0x6e: {
            auto b = static_cast<uint32_t>(pop());
            auto a = static_cast<uint32_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = u32v(a / b);
            break;
        }
        case 0x6f: {
            auto b = static_cast<int32_t>(pop());
            auto a = static_cast<int32_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = u32v(b == -1 ? 0 : static_cast<uint32_t>(a % b));
            break;
        }
        case 0x70: {
            auto b = static_cast<uint32_t>(pop());
            auto a = static_cast<uint32_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = u32v(a % b);
            break;
        }
        case 0x71:
            I32_BINARY(a & b)
        case 0x72:
            I32_BINARY(a | b)
        case 0x73:
            I32_BINARY(a ^ b)
        case 0x74:
            I32_BINARY(a << (b & 31))
        case 0x75:
            I32_BINARY(static_cast<uint32_t>(static_cast<int32_t>(a) >> (b & 31)))
        case 0x76:
            I32_BINARY(a >> (b & 31))
        case 0x77:
            I32_BINARY(std::rotl(a, static_cast<int>(b & 31)))
        case 0x78:
            I32_BINARY(std::rotr(a, static_cast<int>(b & 31)))

        case 0x79:
            I64_UNARY(std::countl_zero(a))
        case 0x7a:
            I64_UNARY(std::countr_zero(a))
        case 0x7b:
            I64_UNARY(std::popcount(a))
        case 0x7c:
            I64_BINARY(a + b)
        case 0x7d:
            I64_BINARY(a - b)
        case 0x7e:
            I64_BINARY(a * b)
        case 0x7f: {
            auto b = static_cast<int64_t>(pop());
            auto a = static_cast<int64_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            if (a == std::numeric_limits<int64_t>::min() && b == -1) {
                trap("integer overflow");
            }
            top() = static_cast<uint64_t>(a / b);
            break;
        }
        case 0x80: {
            auto b = pop();
            auto a = top();
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = a / b;
            break;
        }
        case 0x81: {
            auto b = static_cast<int64_t>(pop());
            auto a = static_cast<int64_t>(top());
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = b == -1 ? 0 : static_cast<uint64_t>(a % b);
            break;
        }
        case 0x82: {
            auto b = pop();
            auto a = top();
            if (b == 0) {
                trap("integer divide by zero");
            }
            top() = a % b;
            break;
        }
        case 0x83:
            I64_BINARY(a & b)
        case 0x84:
            I64_BINARY(a | b)
        case 0x85:
            I64_BINARY(a ^ b)
        case 0x86:
            I64_BINARY(a << (b & 63))
        case 0x87:
            I64_BINARY(static_cast<uint64_t>(static_cast<int64_t>(a) >> (b & 63)))
        case 0x88:
            I64_BINARY(a >> (b & 63))
        case 0x89:
            I64_BINARY(std::rotl(a, static_cast<int>(b & 63)))
        case 0x8a:
            I64_BINARY(std::rotr(a, static_cast<int>(b & 63)))

        case 0x8b:
            F32_UNARY(std::fabs(a))
        case 0x8c:
            F32_UNARY(-a)
        case 0x8d:
            F32_UNARY(std::ceil(a))
        case 0x8e:
            F32_UNARY(std::floor(a))
        case 0x8f:
            F32_UNARY(std::trunc(a))
        case 0x90:
            F32_UNARY(std::nearbyint(a))
        case 0x91:
            F32_UNARY(std::sqrt(a))
        case 0x92:
            F32_BINARY(a + b)
        case 0x93:
            F32_BINARY(a - b)
        case 0x94:
            F32_BINARY(a * b)
        case 0x95:
            F32_BINARY(a / b)
        case 0x96:
            F32_BINARY(wasm_min(a, b))
        case 0x97:
            F32_BINARY(wasm_max(a, b))
        case 0x98:
            F32_BINARY(std::copysign(a, b))

        case 0x99:
            F64_UNARY(std::fabs(a))
        case 0x9a:
            F64_UNARY(-a)
        case 0x9b:
            F64_UNARY(std::ceil(a))
        case 0x9c:
            F64_UNARY(std::floor(a))
        case 0x9d:
            F64_UNARY(std::trunc(a))
        case 0x9e:
            F64_UNARY(std::nearbyint(a))
        case 0x9f:
            F64_UNARY(std::sqrt(a))
        case 0xa0:
            F64_BINARY(a + b)
        case 0xa1:
            F64_BINARY(a - b)
        case 0xa2:
            F64_BINARY(a * b)
        case 0xa3:
            F64_BINARY(a / b)
        case 0xa4:
            F64_BINARY(wasm_min(a, b))
        case 0xa5:
            F64_BINARY(wasm_max(a, b))
        case 0xa6:
            F64_BINARY(std::copysign(a, b))

        case 0xa7:
            top() = u32v(static_cast<uint32_t>(top()));
            break;
        case 0xa8:
            top() = u32v(static_cast<uint32_t>(truncate<int32_t>(as_f32(top()))));
            break;
        case 0xa9:
            top() = u32v(truncate<uint32_t>(as_f32(top())));
            break;
        case 0xaa:
            top() = u32v(static_cast<uint32_t>(truncate<int32_t>(as_f64(top()))));
            break;
        case 0xab:
            top() = u32v(truncate<uint32_t>(as_f64(top())));
            break;
        case 0xac:
            top() = static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(top())));
            break;
        case 0xad:
            top() = static_cast<uint32_t>(top());
            break;
        case 0xae:
            top() = static_cast<uint64_t>(truncate<int64_t>(as_f32(top())));
            break;
        case 0xaf:
            top() = truncate<uint64_t>(as_f32(top()));
            break;
        case 0xb0:
            top() = static_cast<uint64_t>(truncate<int64_t>(as_f64(top())));
            break;
        case 0xb1:
            top() = truncate<uint64_t>(as_f64(top()));
            break;
        case 0xb2:
            top() = from_f32(static_cast<float>(static_cast<int32_t>(top())));
            break;
        case 0xb3:
            top() = from_f32(static_cast<float>(static_cast<uint32_t>(top())));
            break;
        case 0xb4:
            top() = from_f32(static_cast<float>(static_cast<int64_t>(top())));
            break;
        case 0xb5:
            top() = from_f32(static_cast<float>(top()));
            break;
        case 0xb6:
            top() = from_f32(static_cast<float>(as_f64(top())));
            break;
        case 0xb7:
            top() = from_f64(static_cast<double>(static_cast<int32_t>(top())));
            break;
        case 0xb8:
            top() = from_f64(static_cast<double>(static_cast<uint32_t>(top())));
            break;
        case 0xb9:
            top() = from_f64(static_cast<double>(static_cast<int64_t>(top())));
            break;
        case 0xba:
            top() = from_f64(static_cast<double>(top()));
            break;
        case 0xbb:
            top() = from_f64(static_cast<double>(as_f32(top())));
            break;
        case 0xbc: // reinterpretations keep the bits
        case 0xbd:
        case 0xbe:
        case 0xbf:
            top();
            break;
        case 0xc0:
            I32_UNARY(static_cast<uint32_t>(static_cast<int32_t>(static_cast<int8_t>(a))))
        case 0xc1:
            I32_UNARY(static_cast<uint32_t>(static_cast<int32_t>(static_cast<int16_t>(a))))
        case 0xc2:
            I64_UNARY(static_cast<int64_t>(static_cast<int8_t>(a)))
        case 0xc3:
            I64_UNARY(static_cast<int64_t>(static_cast<int16_t>(a)))
        case 0xc4:
            I64_UNARY(static_cast<int64_t>(static_cast<int32_t>(a)))

        case 0xd0:
            push(kNullFunc);
            break;
        case 0xd1:
            top() = top() == kNullFunc ? 1 : 0;
            break;
        case 0xd2:
            push(in.a);
            break;

        case 0x100:
            top() = u32v(static_cast<uint32_t>(truncate_saturating<int32_t>(as_f32(top()))));
            break;
        case 0x101:
            top() = u32v(truncate_saturating<uint32_t>(as_f32(top())));
            break;
        case 0x102:
            top() = u32v(static_cast<uint32_t>(truncate_saturating<int32_t>(as_f64(top()))));
            break;
        case 0x103:
            top() = u32v(truncate_saturating<uint32_t>(as_f64(top())));
            break;
        case 0x104:
            top() = static_cast<uint64_t>(truncate_saturating<int64_t>(as_f32(top())));
            break;
        case 0x105:
            top() = truncate_saturating<uint64_t>(as_f32(top()));
            break;
        case 0x106:
            top() = static_cast<uint64_t>(truncate_saturating<int64_t>(as_f64(top())));
            break;
        case 0x107:
            top() = truncate_saturating<uint64_t>(as_f64(top()));
            break;
        case 0x108: { // memory.init
            auto n = static_cast<uint32_t>(pop());
            auto src = static_cast<uint32_t>(pop());
            auto dst = static_cast<uint32_t>(pop());
            if (in.a >= module.data.size()) {
                trap("data segment index out of range");
            }
            const auto& seg = module.data[in.a];
            uint64_t seg_size = inst.dropped_data[in.a] ? 0 : seg.bytes.size();
            auto& mem = memory();
            if (uint64_t(src) + n > seg_size || !mem.contains(dst, n)) {
                trap("out of bounds memory access");
            }
            if (n) {
                std::memcpy(mem.data() + dst, seg.bytes.data() + src, n);
            }
            break;
        }
        case 0x109:
            if (in.a >= inst.dropped_data.size()) {
                trap("data segment index out of range");
            }
            inst.dropped_data[in.a] = true;
            break;
        case 0x10a: { // memory.copy
            auto n = static_cast<uint32_t>(pop());
            auto src = static_cast<uint32_t>(pop());
            auto dst = static_cast<uint32_t>(pop());
            auto& mem = memory();
            if (!mem.contains(src, n) || !mem.contains(dst, n)) {
                trap("out of bounds memory access");
            }
            if (n) {
                std::memmove(mem.data() + dst, mem.data() + src, n);
            }
            break;
        }
        case 0x10b: { // memory.fill
            auto n = static_cast<uint32_t>(pop());
            auto value = static_cast<uint8_t>(pop());
            auto dst = static_cast<uint32_t>(pop());
            auto& mem = memory();
            if (!mem.contains(dst, n)) {
                trap("out of bounds memory access");
            }
            if (n) {
                std::memset(mem.data() + dst, value, n);
            }
            break;
        }
        default:
            trap("unsupported instruction");
        }
    }

#undef I32_UNARY
#undef I32_BINARY
#undef I64_UNARY
#undef I64_BINARY
#undef F32_UNARY
#undef F32_BINARY
#undef F32_COMPARE
#undef F64_UNARY
#undef F64_BINARY
#undef F64_COMPARE
#undef LOAD
#undef STORE
}

} // namespace cwasi::guest::wasm
