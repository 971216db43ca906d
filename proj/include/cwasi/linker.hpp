/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_LINKER_HPP_
#define CWASI_LINKER_HPP_

#include <compare>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "cwasi/bytes.hpp"
#include "cwasi/guest/engine.hpp"

namespace cwasi {

inline constexpr std::string_view kDefaultSnapshotRoot = "/var/lib/cwasi/snapshot";

struct Import {
    std::string module;
    std::string name;

    auto operator<=>(const Import&) const = default;
};

using ImportSet = std::set<Import>;

/// Bundle artifact paths, kept in lexicographic order.
using BundlePathSet = std::set<std::filesystem::path>;

/// Directory of module bundles available for embedding.
class SnapshotStore {
public:
    /// Throws Error(ScanFailure) if root is not an existing directory.
    explicit SnapshotStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

/**
 * Collects every (module, name) pair of the import clauses in WebAssembly
 * text, both `(import "m" "n" ...)` fields and inline `(func (import "m"
 * "n") ...)` forms. Comments and string contents are skipped. Throws
 * Error(UnparsableText) for unbalanced parentheses, unterminated strings or
 * comments, and text without any s-expression.
 */
ImportSet scan_text_imports(std::string_view module_text);

/**
 * Decodes the import section of a binary module. Throws Error(BadMagic),
 * Error(TruncatedSection), Error(MalformedLeb128) or Error(MalformedModule).
 */
ImportSet parse_binary_imports(ByteView module_bytes);

/// Dispatches on the artifact: ".wat" files are scanned as text, anything else decoded as binary.
ImportSet read_imports(const guest::ModuleArtifact& artifact);

/**
 * Walks the store recursively and returns each module artifact (.wasm or
 * .wat file) whose file stem equals the module name of some import.
 * Imports from the host modules are ignored.
 */
BundlePathSet discover_embeddings(const ImportSet& imports, const SnapshotStore& store,
    std::span<const std::string_view> host_modules = std::span<const std::string_view>(&guest::kHostModule, 1));

/**
 * Instantiates primary_module with every artifact in extras linked into the
 * same guest instance.
 */
std::unique_ptr<guest::GuestInstance> embed_modules(const guest::ModuleArtifact& primary_module,
    const BundlePathSet& extras, guest::GuestEngine& engine, std::span<const guest::HostFunction> host_functions = {});

} // namespace cwasi

#endif
