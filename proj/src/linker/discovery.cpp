/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <algorithm>
#include <vector>

#include "cwasi/error.hpp"
#include "cwasi/linker.hpp"

namespace fs = std::filesystem;

namespace cwasi {

namespace {

bool is_module_artifact(const fs::path& path)
{
    auto ext = path.extension();
    return ext == ".wasm" || ext == ".wat";
}

} // namespace

SnapshotStore::SnapshotStore(fs::path root)
    : root_(std::move(root))
{
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) {
        raise(Errc::ScanFailure, "snapshot root " + root_.string() + " is not a directory");
    }
}

BundlePathSet discover_embeddings(
    const ImportSet& imports, const SnapshotStore& store, std::span<const std::string_view> host_modules)
{
    BundlePathSet bundles;

    std::set<std::string> wanted;
    for (const auto& import : imports) {
        if (std::find(host_modules.begin(), host_modules.end(), import.module) == host_modules.end()) {
            wanted.insert(import.module);
        }
    }
    if (wanted.empty()) {
        return bundles;
    }

    std::error_code ec;
    fs::recursive_directory_iterator it(store.root(), fs::directory_options::skip_permission_denied, ec);
    if (ec) {
        raise(Errc::ScanFailure, "cannot read snapshot " + store.root().string() + ": " + ec.message());
    }

    for (auto end = fs::recursive_directory_iterator(); it != end; it.increment(ec)) {
        if (ec) {
            raise(Errc::ScanFailure, "snapshot walk failed: " + ec.message());
        }

        std::error_code entry_ec;
        if (!it->is_regular_file(entry_ec) || !is_module_artifact(it->path())) {
            continue;
        }
        if (wanted.contains(it->path().stem().string())) {
            bundles.insert(it->path());
        }
    }

    return bundles;
}

std::unique_ptr<guest::GuestInstance> embed_modules(const guest::ModuleArtifact& primary_module,
    const BundlePathSet& extras, guest::GuestEngine& engine, std::span<const guest::HostFunction> host_functions)
{
    std::vector<guest::ModuleArtifact> artifacts;
    std::set<std::string> stems;
    artifacts.reserve(extras.size());
    for (const auto& path : extras) {
        if (!stems.insert(path.stem().string()).second) {
            raise(Errc::LinkError, "two snapshot bundles provide module " + path.stem().string());
        }
        artifacts.push_back(guest::ModuleArtifact::load(path));
    }

    return engine.instantiate(primary_module, artifacts, host_functions);
}

} // namespace cwasi
