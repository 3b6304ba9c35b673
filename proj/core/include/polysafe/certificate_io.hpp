#pragma once

// JSON (de)serialization of certificates. Polynomials are written with
// shortest round-trip coefficients, Gram matrices as dense row-major arrays.

#include <filesystem>
#include <string>
#include <string_view>

#include "polysafe/safety.hpp"

namespace polysafe {

/// `indent` < 0 writes a single line.
std::string certificate_to_json(const Certificate& cert, int indent = 2);
/// Throws SchemaError, ParseError or UnknownIdentifierError.
Certificate certificate_from_json(std::string_view text);

void save_certificate(const Certificate& cert, const std::filesystem::path& file);
Certificate load_certificate(const std::filesystem::path& file);

/// Canonical one-line trace rendering, used for reproducibility checks.
std::string trace_to_json(const AlternationTrace& trace);

}  // namespace polysafe
