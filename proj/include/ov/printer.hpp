#pragma once

#include <string>

#include "ov/ast.hpp"

namespace ov {

// Canonical OV text; parse_program(pretty_print(p)) yields p again.
std::string pretty_print(const Program& p);
std::string pretty_print(const CoreProgram& p);
std::string pretty_print(const ExprPtr& e);

}  // namespace ov
