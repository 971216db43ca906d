/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/guest/wasm_engine.hpp"

#include <algorithm>
#include <cstring>

#include "cwasi/error.hpp"
#include "guest/wasm/interpreter.hpp"

namespace cwasi::guest {

namespace {

using wasm::ExternKind;
using wasm::Instance;
using wasm::Machine;
using wasm::Module;

constexpr uint64_t kMinimumHeapBase = 16;
constexpr std::string_view kHeapBaseExport = "__heap_base";

struct Decoded {
    std::string name;
    std::shared_ptr<const Module> module;
};

uint64_t mask_to_type(uint64_t value, ValueType type)
{
    if (type == ValueType::I32 || type == ValueType::F32) {
        return static_cast<uint32_t>(value);
    }
    return value;
}

std::shared_ptr<LinearMemory> shared_memory(const std::vector<Decoded>& modules)
{
    uint32_t initial = 0;
    std::optional<uint32_t> max;
    bool unbounded = false;
    bool any = false;

    auto visit = [&](const wasm::Limits& limits) {
        any = true;
        initial = std::max(initial, limits.min);
        if (limits.max) {
            max = std::max(max.value_or(0), *limits.max);
        } else {
            unbounded = true;
        }
    };

    for (const auto& entry : modules) {
        for (const auto& import : entry.module->imports) {
            if (import.kind == ExternKind::Memory) {
                visit(import.limits);
            }
        }
        for (const auto& limits : entry.module->memories) {
            visit(limits);
        }
    }

    if (!any || unbounded) {
        max.reset();
    }
    return std::make_shared<LinearMemory>(initial, max);
}

class WasmGuest final : public GuestInstance {
public:
    WasmGuest(const std::vector<Decoded>& modules, std::span<const HostFunction> host_functions)
        : GuestInstance("wasm", modules.size())
        , machine_(*this, interrupt_flag())
        , memory_(shared_memory(modules))
    {
        hosts_.assign(host_functions.begin(), host_functions.end());
        for (auto& fn : standard_host_functions()) {
            hosts_.push_back(std::move(fn));
        }

        for (const auto& entry : modules) {
            auto instance = std::make_unique<Instance>();
            instance->name = entry.name;
            instance->module = entry.module;
            instance->memory = memory_;
            link(*instance);
            instances_.push_back(std::move(instance));
        }
        primary_ = instances_.back().get();

        for (auto& instance : instances_) {
            initialize(*instance);
        }

        set_heap_base(heap_base());
    }

    ~WasmGuest() override { stop_executor(); }

protected:
    LinearMemory& memory() override { return *memory_; }
    const LinearMemory& memory() const override { return *memory_; }

    std::vector<uint64_t> invoke_export(std::string_view name, std::span<const uint64_t> args) override
    {
        const auto* e = primary_->module->find_export(name, ExternKind::Func);
        if (!e) {
            raise(Errc::LinkError, "no exported function named " + std::string(name));
        }
        return invoke(*primary_, e->index, args);
    }

    std::vector<uint64_t> invoke_import(
        std::string_view module, std::string_view name, std::span<const uint64_t> args) override
    {
        uint32_t func_index = 0;
        for (const auto& import : primary_->module->imports) {
            if (import.kind != ExternKind::Func) {
                continue;
            }
            if (import.module == module && import.name == name) {
                return invoke(*primary_, func_index, args);
            }
            ++func_index;
        }
        raise(Errc::LinkError, "primary does not import " + std::string(module) + "." + std::string(name));
    }

    bool export_exists(std::string_view name) const override
    {
        return primary_->module->find_export(name, ExternKind::Func) != nullptr;
    }

private:
    std::vector<uint64_t> invoke(Instance& instance, uint32_t func_index, std::span<const uint64_t> args)
    {
        const auto& type = *instance.functions.at(func_index).type;
        std::vector<uint64_t> masked(args.begin(), args.end());
        for (size_t i = 0; i < masked.size() && i < type.params.size(); ++i) {
            masked[i] = mask_to_type(masked[i], type.params[i]);
        }

        std::lock_guard lock(machine_mutex_);
        return machine_.invoke(instance, func_index, masked);
    }

    Instance* find_instance(std::string_view name, const Instance& self)
    {
        for (auto& candidate : instances_) {
            if (candidate->name == name && candidate.get() != &self) {
                return candidate.get();
            }
        }
        return nullptr;
    }

    const HostFunction* find_host(std::string_view module, std::string_view name) const
    {
        for (const auto& fn : hosts_) {
            if (fn.module == module && fn.name == name) {
                return &fn;
            }
        }
        return nullptr;
    }

    const wasm::ExportDesc& find_export(
        Instance& self, const wasm::ImportDesc& import, Instance*& owner, const char* what)
    {
        owner = find_instance(import.module, self);
        const wasm::ExportDesc* e = owner ? owner->module->find_export(import.name, import.kind) : nullptr;
        if (!e) {
            raise(Errc::LinkError,
                self.name + ": unresolved " + what + " import " + import.module + "." + import.name);
        }
        return *e;
    }

    void link(Instance& instance)
    {
        const Module& module = *instance.module;

        for (const auto& import : module.imports) {
            switch (import.kind) {
            case ExternKind::Func: {
                const auto& expected = module.types.at(import.type_index);
                wasm::FunctionSlot slot;

                if (const auto* host = find_host(import.module, import.name)) {
                    slot.kind = wasm::FunctionSlot::Kind::Host;
                    slot.host = host;
                    slot.type = &host->type;
                } else {
                    Instance* owner = nullptr;
                    const auto& e = find_export(instance, import, owner, "function");
                    slot.kind = wasm::FunctionSlot::Kind::Forward;
                    slot.owner = owner;
                    slot.index = e.index;
                    slot.type = owner->functions.at(e.index).type;
                }

                if (*slot.type != expected) {
                    raise(Errc::LinkError,
                        instance.name + ": import " + import.module + "." + import.name + " expects "
                            + to_string(expected) + " but resolves to " + to_string(*slot.type));
                }
                instance.functions.push_back(slot);
                break;
            }
            case ExternKind::Memory:
                if (memory_->pages() < import.limits.min) {
                    raise(Errc::LinkError, instance.name + ": imported memory is smaller than required");
                }
                break;
            case ExternKind::Global: {
                Instance* owner = nullptr;
                const auto& e = find_export(instance, import, owner, "global");
                auto cell = owner->globals.at(e.index);
                if (cell->type != import.value_type || cell->is_mutable != import.is_mutable) {
                    raise(Errc::LinkError, instance.name + ": global import " + import.name + " has the wrong type");
                }
                instance.globals.push_back(std::move(cell));
                break;
            }
            case ExternKind::Table: {
                Instance* owner = nullptr;
                const auto& e = find_export(instance, import, owner, "table");
                auto table = owner->tables.at(e.index);
                if (table->elements.size() < import.limits.min) {
                    raise(Errc::LinkError, instance.name + ": imported table is smaller than required");
                }
                instance.tables.push_back(std::move(table));
                break;
            }
            case ExternKind::Tag:
                raise(Errc::EngineError, "exception tags are not supported");
            }
        }

        for (const auto& fn : module.functions) {
            wasm::FunctionSlot slot;
            slot.type = &module.types.at(fn.type_index);
            instance.functions.push_back(slot);
        }

        for (const auto& def : module.globals) {
            auto cell = std::make_shared<wasm::GlobalCell>();
            cell->type = def.type;
            cell->is_mutable = def.is_mutable;
            cell->value = mask_to_type(wasm::evaluate(def.init, instance), def.type);
            instance.globals.push_back(std::move(cell));
        }

        for (const auto& def : module.tables) {
            auto table = std::make_shared<wasm::Table>();
            table->elements.resize(def.limits.min);
            table->max = def.limits.max;
            instance.tables.push_back(std::move(table));
        }

        instance.dropped_data.assign(module.data.size(), false);
        instance.dropped_elements.assign(module.elements.size(), false);
    }

    void initialize(Instance& instance)
    {
        const Module& module = *instance.module;

        for (size_t i = 0; i < module.elements.size(); ++i) {
            const auto& seg = module.elements[i];
            if (seg.mode == wasm::ElementSegment::Mode::Passive) {
                continue;
            }
            instance.dropped_elements[i] = true;
            if (seg.mode == wasm::ElementSegment::Mode::Declarative) {
                continue;
            }

            if (seg.table >= instance.tables.size()) {
                raise(Errc::EngineError, instance.name + ": element segment names a missing table");
            }
            auto& table = *instance.tables[seg.table];
            uint64_t offset = static_cast<uint32_t>(wasm::evaluate(seg.offset, instance));
            if (offset + seg.functions.size() > table.elements.size()) {
                raise(Errc::EngineError, instance.name + ": element segment does not fit its table");
            }
            for (size_t j = 0; j < seg.functions.size(); ++j) {
                auto index = seg.functions[j];
                table.elements[offset + j]
                    = index == wasm::kNullFunc ? wasm::TableEntry {} : wasm::TableEntry {&instance, index};
            }
        }

        for (size_t i = 0; i < module.data.size(); ++i) {
            const auto& seg = module.data[i];
            if (seg.mode == wasm::DataSegment::Mode::Passive) {
                continue;
            }
            instance.dropped_data[i] = true;
            uint64_t offset = static_cast<uint32_t>(wasm::evaluate(seg.offset, instance));
            if (!memory_->contains(offset, seg.bytes.size())) {
                raise(Errc::EngineError, instance.name + ": data segment does not fit memory");
            }
            if (!seg.bytes.empty()) {
                std::memcpy(memory_->data() + offset, seg.bytes.data(), seg.bytes.size());
            }
        }

        if (module.start) {
            try {
                invoke(instance, *module.start, {});
            } catch (const Error& e) {
                if (e.code() != Errc::Trap) {
                    throw;
                }
                raise(Errc::EngineError, instance.name + ": start function trapped: " + e.what());
            }
        }
    }

    uint64_t heap_base() const
    {
        uint64_t base = kMinimumHeapBase;

        for (const auto& instance : instances_) {
            const Module& module = *instance->module;
            if (const auto* e = module.find_export(kHeapBaseExport, ExternKind::Global)) {
                base = std::max<uint64_t>(base, static_cast<uint32_t>(instance->globals.at(e->index)->value));
                continue;
            }
            for (const auto& seg : module.data) {
                if (seg.mode == wasm::DataSegment::Mode::Active) {
                    uint64_t offset = static_cast<uint32_t>(wasm::evaluate(seg.offset, *instance));
                    base = std::max(base, offset + seg.bytes.size());
                }
            }
        }

        return base;
    }

    Machine machine_;
    std::recursive_mutex machine_mutex_;
    std::shared_ptr<LinearMemory> memory_;
    std::vector<HostFunction> hosts_;
    std::vector<std::unique_ptr<Instance>> instances_;
    Instance* primary_ = nullptr;
};

Decoded decode(const ModuleArtifact& artifact)
{
    if (artifact.is_text()) {
        raise(Errc::EngineError, artifact.name + ": text modules must be compiled to binary first");
    }

    try {
        return Decoded {artifact.name, std::make_shared<const Module>(wasm::decode_module(artifact.bytes))};
    } catch (const Error& e) {
        if (e.code() == Errc::EngineError) {
            throw;
        }
        raise(Errc::EngineError, artifact.name + ": " + e.what());
    }
}

} // namespace

std::unique_ptr<GuestInstance> WasmEngine::instantiate(
    const ModuleArtifact& primary, std::span<const ModuleArtifact> extras, std::span<const HostFunction> host_functions)
{
    std::vector<Decoded> modules;
    modules.reserve(extras.size() + 1);
    for (const auto& extra : extras) {
        modules.push_back(decode(extra));
    }
    modules.push_back(decode(primary));

    return std::make_unique<WasmGuest>(modules, host_functions);
}

} // namespace cwasi::guest
