/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CWASI_SPEC_HPP_
#define CWASI_SPEC_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cwasi/bytes.hpp"

namespace cwasi {

inline constexpr std::string_view kConfigFileName = "config.json";
inline constexpr std::string_view kRoleAnnotation = "cwasi/role";
inline constexpr std::string_view kRoleSecondary = "secondary";
inline constexpr std::string_view kNamespaceAnnotation = "cwasi/namespace";
inline constexpr std::string_view kModeAnnotation = "cwasi/mode";
inline constexpr std::string_view kDefaultNamespace = "default";

/**
 * Function specification read from an OCI-style bundle.
 *
 * args[0] names the function and doubles as the module artifact file name
 * inside bundle_path. Top-level config keys other than "args" and
 * "annotations" are kept verbatim in extra_fields.
 */
struct FunctionSpec {
    std::vector<std::string> args;
    std::map<std::string, std::string> annotations;
    std::filesystem::path bundle_path;
    std::map<std::string, nlohmann::json> extra_fields;

    const std::string& name() const { return args.front(); }

    /// Directory name of the bundle, used as the registry entry name.
    std::string bundle_name() const { return bundle_path.filename().string(); }

    /// Trust domain; "default" when the namespace annotation is absent.
    std::string namespace_name() const;

    /**
     * Module artifact in the bundle. args[0] names it directly when it carries
     * a .wasm or .wat extension; a bare name resolves to <name>.wasm, falling
     * back to <name>.wat when only the text form exists.
     */
    std::filesystem::path artifact_path() const;

    bool operator==(const FunctionSpec&) const = default;
};

enum class Role { Primary, Secondary };

std::string_view role_name(Role role) noexcept;

/**
 * Parses a config document. Relative bundle paths are made absolute.
 *
 * Throws Error(MalformedConfig) for documents that are not a JSON object or
 * carry mistyped "args"/"annotations", and Error(MissingArgs) when args is
 * absent, empty, or args[0] is empty.
 */
FunctionSpec parse_spec(ByteView config, const std::filesystem::path& bundle_path);

/// Reads <bundle_path>/config.json.
FunctionSpec load_spec(const std::filesystem::path& bundle_path);

Bytes serialize_spec(const FunctionSpec& spec);

/// Writes config.json into spec.bundle_path, creating the directory if needed.
void write_spec(const FunctionSpec& spec);

/// Secondary iff the role annotation key is present.
Role classify(const FunctionSpec& spec) noexcept;

} // namespace cwasi

#endif
