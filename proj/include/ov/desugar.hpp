#pragma once

#include "ov/ast.hpp"

namespace ov {

// Total on parsed programs. Bare field names become this.f, compound receivers
// are bound to fresh __tN temporaries, `x op= e` and `throw` are expanded. For an
// atomic without a contract, receiver and argument temporaries are evaluated
// before the transaction starts so the contract can be read off the call.
CoreProgram desugar(const Program& p);

// Structural scan: true iff every FieldGet/FieldSet/Call/Valid receiver is a value
// and no surface-only node remains.
bool is_core(const Program& p);

bool is_value(const ExprPtr& e);  // Var or This

}  // namespace ov
