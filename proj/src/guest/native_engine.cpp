/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/guest/native_engine.hpp"

#include "cwasi/error.hpp"

namespace cwasi::guest {

namespace {

constexpr uint32_t kInitialPages = 1;
constexpr uint64_t kHeapBase = 16;

using ImportKey = std::pair<std::string, std::string>;

struct Target {
    FunctionType type;
    NativeFunction native;
    HostCallback host;
};

std::vector<uint64_t> invoke_target(const Target& target, GuestInstance& instance, std::span<const uint64_t> args)
{
    if (args.size() != target.type.params.size()) {
        raise(Errc::InvalidArgument,
            "expected " + std::to_string(target.type.params.size()) + " arguments, got " + std::to_string(args.size()));
    }

    if (target.native) {
        auto results = target.native(instance, args);
        if (results.size() != target.type.results.size()) {
            raise(Errc::Trap, "native function returned the wrong number of results");
        }
        return results;
    }

    std::vector<uint64_t> results(target.type.results.size());
    target.host(instance, args, results);

    return results;
}

class NativeInstance final : public GuestInstance {
public:
    NativeInstance(size_t module_count, std::shared_ptr<const NativeModule> primary,
        std::map<ImportKey, Target> imports)
        : GuestInstance("native", module_count)
        , memory_(kInitialPages)
        , primary_(std::move(primary))
        , imports_(std::move(imports))
    {
        set_heap_base(kHeapBase);
    }

    ~NativeInstance() override { stop_executor(); }

protected:
    LinearMemory& memory() override { return memory_; }
    const LinearMemory& memory() const override { return memory_; }

    std::vector<uint64_t> invoke_export(std::string_view name, std::span<const uint64_t> args) override
    {
        auto it = primary_->exports.find(name);
        if (it == primary_->exports.end()) {
            raise(Errc::LinkError, "no export named " + std::string(name));
        }

        return invoke_target(Target {it->second.type, it->second.function, {}}, *this, args);
    }

    std::vector<uint64_t> invoke_import(
        std::string_view module, std::string_view name, std::span<const uint64_t> args) override
    {
        auto it = imports_.find(ImportKey {std::string(module), std::string(name)});
        if (it == imports_.end()) {
            raise(Errc::LinkError, "no linked import " + std::string(module) + "." + std::string(name));
        }

        return invoke_target(it->second, *this, args);
    }

    bool export_exists(std::string_view name) const override { return primary_->exports.contains(name); }

private:
    LinearMemory memory_;
    std::shared_ptr<const NativeModule> primary_;
    std::map<ImportKey, Target> imports_;
};

} // namespace

void NativeEngine::define(std::string module_name, NativeModule module)
{
    std::lock_guard lock(mutex_);
    modules_[std::move(module_name)] = std::make_shared<const NativeModule>(std::move(module));
}

bool NativeEngine::defines(std::string_view module_name) const
{
    std::lock_guard lock(mutex_);
    return modules_.contains(module_name);
}

std::shared_ptr<const NativeModule> NativeEngine::lookup(const std::string& name) const
{
    std::lock_guard lock(mutex_);

    auto it = modules_.find(name);
    if (it == modules_.end()) {
        raise(Errc::EngineError, "no native module named " + name);
    }

    return it->second;
}

std::unique_ptr<GuestInstance> NativeEngine::instantiate(
    const ModuleArtifact& primary, std::span<const ModuleArtifact> extras, std::span<const HostFunction> host_functions)
{
    auto primary_module = lookup(primary.name);

    std::vector<std::pair<std::string, std::shared_ptr<const NativeModule>>> linked;
    for (const auto& extra : extras) {
        linked.emplace_back(extra.name, lookup(extra.name));
    }

    auto standard = standard_host_functions();
    auto find_host = [&](const NativeImport& import) -> const HostFunction* {
        for (const auto& fn : host_functions) {
            if (fn.module == import.module && fn.name == import.name) {
                return &fn;
            }
        }
        for (const auto& fn : standard) {
            if (fn.module == import.module && fn.name == import.name) {
                return &fn;
            }
        }
        return nullptr;
    };

    std::map<ImportKey, Target> resolved;
    auto resolve = [&](const NativeModule& module, const std::string& owner) {
        for (const auto& import : module.imports) {
            Target target;

            if (const auto* host = find_host(import)) {
                target = Target {host->type, {}, host->callback};
            } else {
                const NativeExport* found = nullptr;
                for (const auto& [name, candidate] : linked) {
                    if (name == import.module && candidate.get() != &module) {
                        auto it = candidate->exports.find(import.name);
                        if (it != candidate->exports.end()) {
                            found = &it->second;
                            break;
                        }
                    }
                }
                if (!found) {
                    raise(Errc::LinkError,
                        owner + ": unresolved import " + import.module + "." + import.name);
                }
                target = Target {found->type, found->function, {}};
            }

            if (target.type != import.type) {
                raise(Errc::LinkError,
                    owner + ": import " + import.module + "." + import.name + " expects " + to_string(import.type)
                        + " but resolves to " + to_string(target.type));
            }

            resolved.emplace(ImportKey {import.module, import.name}, std::move(target));
        }
    };

    for (const auto& [name, module] : linked) {
        resolve(*module, name);
    }
    resolve(*primary_module, primary.name);

    return std::make_unique<NativeInstance>(1 + extras.size(), std::move(primary_module), std::move(resolved));
}

} // namespace cwasi::guest
