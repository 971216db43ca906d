/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "cwasi/error.hpp"

namespace cwasi {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::Ok:
        return "Ok";
    case Errc::MalformedConfig:
        return "MalformedConfig";
    case Errc::MissingArgs:
        return "MissingArgs";
    case Errc::DuplicateFunction:
        return "DuplicateFunction";
    case Errc::IoFailure:
        return "IoFailure";
    case Errc::ScanFailure:
        return "ScanFailure";
    case Errc::UnparsableText:
        return "UnparsableText";
    case Errc::BadMagic:
        return "BadMagic";
    case Errc::TruncatedSection:
        return "TruncatedSection";
    case Errc::MalformedLeb128:
        return "MalformedLeb128";
    case Errc::MalformedModule:
        return "MalformedModule";
    case Errc::LinkError:
        return "LinkError";
    case Errc::EngineError:
        return "EngineError";
    case Errc::OutOfBounds:
        return "OutOfBounds";
    case Errc::BadState:
        return "BadState";
    case Errc::AllocationFailure:
        return "AllocationFailure";
    case Errc::TruncatedEnvelope:
        return "TruncatedEnvelope";
    case Errc::EmptyName:
        return "EmptyName";
    case Errc::BadTransition:
        return "BadTransition";
    case Errc::Trap:
        return "Trap";
    case Errc::AddressInUse:
        return "AddressInUse";
    case Errc::ConnectRefused:
        return "ConnectRefused";
    case Errc::Timeout:
        return "Timeout";
    case Errc::FrameTooLarge:
        return "FrameTooLarge";
    case Errc::ProtocolError:
        return "ProtocolError";
    case Errc::BindFailure:
        return "BindFailure";
    case Errc::BrokerUnreachable:
        return "BrokerUnreachable";
    case Errc::DecodeError:
        return "DecodeError";
    case Errc::StartupFailure:
        return "StartupFailure";
    case Errc::InfraUnavailable:
        return "InfraUnavailable";
    case Errc::ZeroElapsed:
        return "ZeroElapsed";
    case Errc::Unsupported:
        return "Unsupported";
    case Errc::InvalidArgument:
        return "InvalidArgument";
    case Errc::NotFound:
        return "NotFound";
    case Errc::Internal:
        return "Internal";
    }
    return "Unknown";
}

} // namespace cwasi
