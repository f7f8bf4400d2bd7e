#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lens {

enum class ErrorCode {
    invalid_geometry,
    ambiguous_input,
    invalid_input,
    invalid_comparison,
    ingest,
    empty_document,
    parse,
    detection,
    backend_unavailable,
    not_found,
    extraction,
    pack,
    render,
    empty_dataset,
    conflict,
    io,
};

/// Stable snake_case name used in CLI output and HTTP error envelopes.
constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_geometry: return "invalid_geometry";
    case ErrorCode::ambiguous_input: return "ambiguous_input";
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::invalid_comparison: return "invalid_comparison";
    case ErrorCode::ingest: return "ingest_error";
    case ErrorCode::empty_document: return "empty_document";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::detection: return "detection_error";
    case ErrorCode::backend_unavailable: return "backend_unavailable";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::extraction: return "extraction_error";
    case ErrorCode::pack: return "pack_error";
    case ErrorCode::render: return "render_error";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io_error";
    }
    return "unknown";
}

/**
 * @brief Base exception for every failure raised by the engine.
 *
 * Each error carries a machine-readable code so the CLI and the HTTP
 * facade can map failures without string matching.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace lens
