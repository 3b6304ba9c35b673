#pragma once

#include <span>
#include <string_view>

#include "polysafe/polynomial.hpp"

namespace polysafe {

/// Parses a polynomial expression over the given universe.
///
/// Grammar: signed decimal literals (optional exponent part), identifiers
/// from `universe`, binary `+ - * ^`, unary `+ -`, and parentheses. Powers
/// take non-negative integer literals. Juxtaposition is rejected, so `2x1`
/// and `x1 x2` are syntax errors.
///
/// Throws ParseError (with byte offset) or UnknownIdentifierError.
Polynomial parse_poly(std::string_view expr, std::span<const Variable> universe);

}  // namespace polysafe
