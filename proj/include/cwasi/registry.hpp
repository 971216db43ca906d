/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_REGISTRY_HPP_
#define CWASI_REGISTRY_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cwasi/spec.hpp"

namespace cwasi {

inline constexpr std::string_view kSocketSuffix = ".sock";
inline constexpr std::string_view kDefaultRunningPath = "/run/cwasi";

/// Local buffer receiver address: <function path>.sock.
struct SocketPath {
    std::filesystem::path value;

    static SocketPath for_function(const std::filesystem::path& function_path)
    {
        return SocketPath {function_path.string() + std::string(kSocketSuffix)};
    }

    std::string string() const { return value.string(); }

    bool operator==(const SocketPath&) const = default;
};

/**
 * View of the functions running on this host. Every immediate subdirectory
 * of running_path holding a config.json is one live function. Nothing is
 * cached: each query re-reads the directory.
 */
class RunningRegistry {
public:
    /// Throws Error(IoFailure) if running_path is not an existing directory.
    explicit RunningRegistry(std::filesystem::path running_path);

    /// Creates running_path (and parents) first.
    static RunningRegistry create(const std::filesystem::path& running_path);

    const std::filesystem::path& running_path() const noexcept { return running_path_; }

    std::filesystem::path function_path(std::string_view name) const { return running_path_ / name; }

    SocketPath socket_path(std::string_view name) const { return SocketPath::for_function(function_path(name)); }

    /**
     * Materializes <running_path>/<spec.bundle_name()>/config.json and returns
     * the function path. Throws Error(DuplicateFunction) if the entry exists.
     */
    std::filesystem::path register_function(const FunctionSpec& spec);

    /// Removes the entry. Throws Error(NotFound) if absent.
    void unregister_function(std::string_view name);

    /// Names of the entries, lexicographically ordered.
    std::vector<std::string> list() const;

    struct Match {
        std::filesystem::path function_path;
        FunctionSpec spec;
    };

    /// First entry (lexicographic order) whose args contain target_type exactly.
    std::optional<Match> find(std::string_view target_type) const;

    /// Socket path of the co-located target, or nullopt when not local.
    std::optional<SocketPath> ifc_selection(std::string_view target_type) const;

private:
    std::filesystem::path running_path_;
};

} // namespace cwasi

#endif
