#pragma once

#include <optional>
#include <string_view>

#include "ov/ast.hpp"
#include "ov/diagnostic.hpp"

namespace ov {

struct ParseResult {
  std::optional<Program> program;  // empty on E-PARSE
  Diagnostics diags;               // errors and normalization warnings
};

ParseResult parse_program(std::string_view source);

// `<ctx,ctx>`; invalidity top becomes bot. Throws DiagnosticError(E-PARSE).
Contract parse_contract(std::string_view text, Diagnostics* warnings = nullptr);

}  // namespace ov
