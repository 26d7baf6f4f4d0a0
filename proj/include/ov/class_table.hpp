#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ov/ast.hpp"

namespace ov {

// Lookup over a program's classes. Does not validate; cycles are cut.
class ClassTable {
 public:
  explicit ClassTable(const Program& p);

  const ClassDecl* find(const std::string& name) const;

  struct Step {
    const ClassDecl* decl;
    std::vector<Context> args;  // the class's formals as seen from the start type
  };
  // t itself, then its superclass with substituted arguments, and so on.
  std::vector<Step> chain(const TypeExpr& t) const;

  struct FieldInfo {
    const ClassDecl* owner;
    const FieldDecl* decl;
    TypeExpr type;  // substituted; This replaced by this_image
  };
  std::optional<FieldInfo> field(const TypeExpr& t, const std::string& f, const Context& this_image) const;

  struct MethodInfo {
    const ClassDecl* owner;
    const MethodDecl* decl;
    std::vector<Context> args;  // owner's formals as seen from t
  };
  std::optional<MethodInfo> method(const TypeExpr& t, const std::string& m) const;

  // Superclass fields first, each class in declaration order.
  std::vector<std::pair<const ClassDecl*, const FieldDecl*>> all_fields(const std::string& cls) const;

  // The class applied to its own formals: C<X1..Xn>.
  TypeExpr self_type(const ClassDecl& c) const;

 private:
  std::map<std::string, const ClassDecl*> classes_;
};

}  // namespace ov
