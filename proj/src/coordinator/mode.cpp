/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/coordinator.hpp"
#include "cwasi/error.hpp"

namespace cwasi {

std::string_view mode_name(CommunicationMode mode) noexcept
{
    switch (mode) {
    case CommunicationMode::Embedded:
        return "embedded";
    case CommunicationMode::LocalBuffer:
        return "local";
    case CommunicationMode::NetworkedBuffer:
        return "network";
    }
    return "unknown";
}

CommunicationMode parse_mode(std::string_view name)
{
    if (name == "embedded" || name == "embed") {
        return CommunicationMode::Embedded;
    }
    if (name == "local") {
        return CommunicationMode::LocalBuffer;
    }
    if (name == "network" || name == "networked") {
        return CommunicationMode::NetworkedBuffer;
    }
    raise(Errc::InvalidArgument, "unknown communication mode '" + std::string(name) + "'");
}

ModeHint read_hint(const FunctionSpec& spec)
{
    auto it = spec.annotations.find(std::string(kModeAnnotation));
    if (it == spec.annotations.end()) {
        return ModeHint::None;
    }
    if (it->second == "local") {
        return ModeHint::ForceLocal;
    }
    if (it->second == "network") {
        return ModeHint::ForceNetwork;
    }
    if (it->second == "embed") {
        return ModeHint::ForceEmbed;
    }
    return ModeHint::None;
}

CommunicationMode select_mode(const FunctionSpec& source, std::string_view target_type,
    const RunningRegistry& registry, ModeHint hint, bool embeddable)
{
    // An unreadable target config is skipped by find(), so such a target is
    // neither co-located nor trusted.
    auto match = target_type.empty() ? std::nullopt : registry.find(target_type);
    bool colocated = match.has_value();

    switch (hint) {
    case ModeHint::ForceEmbed:
        if (embeddable) {
            return CommunicationMode::Embedded;
        }
        break;
    case ModeHint::ForceLocal:
        if (colocated) {
            return CommunicationMode::LocalBuffer;
        }
        break;
    case ModeHint::ForceNetwork:
        return CommunicationMode::NetworkedBuffer;
    case ModeHint::None:
        break;
    }

    if (embeddable && colocated && match->spec.namespace_name() == source.namespace_name()) {
        return CommunicationMode::Embedded;
    }
    return colocated ? CommunicationMode::LocalBuffer : CommunicationMode::NetworkedBuffer;
}

} // namespace cwasi
