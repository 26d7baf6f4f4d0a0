#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "ov/ast.hpp"
#include "ov/class_table.hpp"
#include "ov/diagnostic.hpp"
#include "ov/ownership.hpp"

namespace ov {

struct TypeEnv {
  ContextEnv ctx;
  std::map<std::string, TypeExpr> vars;
  std::optional<TypeExpr> this_type;  // empty in main
  bool in_atomic = false;
  bool in_ctor = false;
  bool fork_allowed = false;  // main, or a method whose frame is <top,top>
};

bool contract_wf(const ContextEnv& env, const Contract& d);
bool subcontract(const ContextEnv& env, const Contract& child, const Contract& parent);
bool subtype(const ClassTable& ct, const ContextEnv& env, const TypeExpr& t, const TypeExpr& t2);
bool abstracts(const ContextEnv& env, const Context& k, const Context& k2);
bool bindable(const ClassTable& ct, const ContextEnv& env, const TypeExpr& t, const TypeExpr& t2);
bool mentions_existential(const TypeExpr& t);

class TypeChecker {
 public:
  explicit TypeChecker(const Program& p);

  const ClassTable& table() const { return table_; }

  // Types e under frame, extending env with new locals; problems go to out.
  TypeExpr type_expr(TypeEnv& env, const Contract& frame, const ExprPtr& e, Diagnostics& out);
  // Throws DiagnosticError(E-NEED-CONTRACT) when e is not a single call or field write.
  Contract deduce_contract(TypeEnv& env, const ExprPtr& e);

  Diagnostics check_method(const ClassDecl& c, const MethodDecl& m);
  Diagnostics check_ctor(const ClassDecl& c, const CtorDecl& k);
  Diagnostics check_invariant_clause(const ClassDecl& c);
  Diagnostics check_class(const ClassDecl& c);
  Diagnostics check_main(const ExprPtr& main);
  Diagnostics check();

  // Methods that may spawn a thread when called (by name; an over-approximation).
  const std::set<std::string>& forking_methods() const { return forking_; }

 private:
  TypeExpr type_of_node(TypeEnv& env, const Contract& frame, const ExprPtr& e, Diagnostics& out);
  bool check_type_wf(const ContextEnv& env, const TypeExpr& t, Span s, bool allow_void, Diagnostics& out);
  void bind_check(const TypeEnv& env, const TypeExpr& from, const TypeExpr& to, Span s,
                  const std::string& what, Diagnostics& out);
  TypeEnv class_env(const ClassDecl& c) const;

  const Program& program_;
  ClassTable table_;
  std::set<std::string> forking_;
};

Diagnostics check_program(const CoreProgram& p);

}  // namespace ov
