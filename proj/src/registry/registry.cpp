/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/registry.hpp"

#include <algorithm>
#include <fstream>

#include "cwasi/error.hpp"

namespace fs = std::filesystem;

namespace cwasi {

RunningRegistry::RunningRegistry(fs::path running_path)
    : running_path_(std::move(running_path))
{
    std::error_code ec;
    if (!fs::is_directory(running_path_, ec)) {
        raise(Errc::IoFailure, "running path " + running_path_.string() + " is not a directory");
    }
}

RunningRegistry RunningRegistry::create(const fs::path& running_path)
{
    std::error_code ec;
    fs::create_directories(running_path, ec);
    if (ec) {
        raise(Errc::IoFailure, "cannot create " + running_path.string() + ": " + ec.message());
    }

    return RunningRegistry(running_path);
}

fs::path RunningRegistry::register_function(const FunctionSpec& spec)
{
    auto name = spec.bundle_name();
    if (name.empty() || name == "." || name == "..") {
        raise(Errc::InvalidArgument, "spec has no usable bundle name");
    }

    auto entry = function_path(name);

    std::error_code ec;
    if (!fs::create_directory(entry, ec)) {
        if (ec) {
            raise(Errc::IoFailure, "cannot create " + entry.string() + ": " + ec.message());
        }
        raise(Errc::DuplicateFunction, "function " + name + " is already registered");
    }

    // Write-then-rename so concurrent scans never parse a partial document.
    auto data = serialize_spec(spec);
    auto tmp = entry / (std::string(kConfigFileName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!out) {
            fs::remove_all(entry, ec);
            raise(Errc::IoFailure, "cannot write " + tmp.string());
        }
    }

    fs::rename(tmp, entry / kConfigFileName, ec);
    if (ec) {
        fs::remove_all(entry, ec);
        raise(Errc::IoFailure, "cannot publish config for " + name);
    }

    return entry;
}

void RunningRegistry::unregister_function(std::string_view name)
{
    auto entry = function_path(name);

    std::error_code ec;
    if (!fs::is_directory(entry, ec)) {
        raise(Errc::NotFound, "function " + std::string(name) + " is not registered");
    }

    fs::remove_all(entry, ec);
    if (ec) {
        raise(Errc::IoFailure, "cannot remove " + entry.string() + ": " + ec.message());
    }
}

std::vector<std::string> RunningRegistry::list() const
{
    std::vector<std::string> names;

    std::error_code ec;
    fs::directory_iterator it(running_path_, ec);
    if (ec) {
        raise(Errc::ScanFailure, "cannot read " + running_path_.string() + ": " + ec.message());
    }

    for (const auto& entry : it) {
        std::error_code entry_ec;
        if (entry.is_directory(entry_ec)) {
            names.push_back(entry.path().filename().string());
        }
    }

    std::sort(names.begin(), names.end());

    return names;
}

std::optional<RunningRegistry::Match> RunningRegistry::find(std::string_view target_type) const
{
    if (target_type.empty()) {
        raise(Errc::InvalidArgument, "target function type is empty");
    }

    for (const auto& name : list()) {
        auto entry = function_path(name);

        FunctionSpec spec;
        try {
            spec = load_spec(entry);
        } catch (const Error&) {
            // A broken neighbour must not break selection.
            continue;
        }

        if (std::find(spec.args.begin(), spec.args.end(), target_type) != spec.args.end()) {
            return Match {entry, std::move(spec)};
        }
    }

    return std::nullopt;
}

std::optional<SocketPath> RunningRegistry::ifc_selection(std::string_view target_type) const
{
    auto match = find(target_type);
    if (!match) {
        return std::nullopt;
    }

    return SocketPath::for_function(match->function_path);
}

} // namespace cwasi
