#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ov/ast.hpp"
#include "ov/diagnostic.hpp"
#include "ov/runtime.hpp"

namespace ov {

// Parse, desugar and check one source text.
struct Compiled {
  std::optional<Program> surface;
  std::optional<CoreProgram> core;  // set whenever parsing succeeded
  Diagnostics diags;                // parse warnings, then checker output
  bool ok() const { return core && !has_errors(diags); }
};
Compiled compile_source(std::string_view source);

// Throws std::runtime_error when the file cannot be read.
std::string read_file(const std::string& path);

// {"lemma3":..,"objects":..,"valid":..,"pre_checks":..,"post_checks":..,"invariant_evals":..,
//  "events":[..],"state_hash":..} plus outcome, failures and invalid objects.
std::string report_json(const FinalReport& r);
std::string report_text(const FinalReport& r);

}  // namespace ov
