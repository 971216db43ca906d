/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_GUEST_WASM_ENGINE_HPP_
#define CWASI_GUEST_WASM_ENGINE_HPP_

#include "cwasi/guest/engine.hpp"

namespace cwasi::guest {

/**
 * WebAssembly backend running binary modules (MVP plus sign extension,
 * saturating truncation, bulk memory and multi-value) on a bundled
 * interpreter.
 *
 * All modules of one guest bind to a single linear memory, whether they
 * define it or import it. Text artifacts are rejected with EngineError.
 */
class WasmEngine final : public GuestEngine {
public:
    std::string_view name() const noexcept override { return "wasm"; }

    std::unique_ptr<GuestInstance> instantiate(const ModuleArtifact& primary, std::span<const ModuleArtifact> extras,
        std::span<const HostFunction> host_functions) override;
};

} // namespace cwasi::guest

#endif
