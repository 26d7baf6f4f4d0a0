#pragma once

#include <string>
#include <vector>

#include "ov/ast.hpp"
#include "ov/diagnostic.hpp"

namespace ov {

enum class EmitStyle { OVValidity, PrePost };

struct EmitterConfig {
  EmitStyle style = EmitStyle::OVValidity;
  std::string pragma = ">=0.5.16 <0.7.0";
  std::string import_prefix = "../";
};

struct SolFile {
  std::string name;
  std::string text;
};

// Which validity checks a method contract implies on the Solidity side.
struct CheckPlan {
  bool pre = false;
  bool post = false;
};

// Contexts must be this or bot; anything else throws E-TRANSPILE-CTX.
CheckPlan checks_for(const Contract& d);
// Modifier invocation text: thisThis() etc., or preValid()/postValid() in pre-post style; "" when no check applies.
std::string modifier_for(const Contract& d, EmitStyle style = EmitStyle::OVValidity);

// Works on the surface AST (compound assignments and bare field names are kept as written).
// Throws DiagnosticError with E-TRANSPILE-CTX or E-TRANSPILE-EXPR.
std::string emit_is_valid(const ClassDecl& c, const EmitterConfig& cfg);
std::string transpile_class(const ClassDecl& c, const EmitterConfig& cfg);
std::vector<SolFile> transpile_program(const Program& p, const EmitterConfig& cfg);

// Ownable.sol, Validity.sol, OVValidity.sol.
std::vector<SolFile> bundle_api(const EmitterConfig& cfg);

// Starts with a pragma; braces, parens and brackets balance outside strings and comments; no `;;`.
bool solidity_well_formed(const std::string& text);

}  // namespace ov
