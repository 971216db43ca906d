/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_NATIVE_ENGINE_HPP_
#define CWASI_GUEST_NATIVE_ENGINE_HPP_

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cwasi/guest/engine.hpp"

namespace cwasi::guest {

using NativeFunction = std::function<std::vector<uint64_t>(GuestInstance&, std::span<const uint64_t>)>;

struct NativeExport {
    FunctionType type;
    NativeFunction function;
};

struct NativeImport {
    std::string module;
    std::string name;
    FunctionType type;
};

/// In-process stand-in for a compiled module: named callables plus the imports they use.
struct NativeModule {
    std::map<std::string, NativeExport, std::less<>> exports;
    std::vector<NativeImport> imports;
};

/**
 * Backend whose guests are C++ callables registered by module name. An
 * artifact is matched to a definition by its file stem; the artifact bytes
 * are only consulted by import discovery, never executed.
 */
class NativeEngine final : public GuestEngine {
public:
    void define(std::string module_name, NativeModule module);
    bool defines(std::string_view module_name) const;

    std::string_view name() const noexcept override { return "native"; }

    std::unique_ptr<GuestInstance> instantiate(const ModuleArtifact& primary, std::span<const ModuleArtifact> extras,
        std::span<const HostFunction> host_functions) override;

private:
    std::shared_ptr<const NativeModule> lookup(const std::string& name) const;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const NativeModule>, std::less<>> modules_;
};

} // namespace cwasi::guest

#endif
