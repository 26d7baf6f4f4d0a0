#include "ov/class_table.hpp"

#include <set>

#include "ov/ownership.hpp"

namespace ov {

ClassTable::ClassTable(const Program& p) {
  for (const auto& c : p.classes) classes_.emplace(c.name, &c);
}

const ClassDecl* ClassTable::find(const std::string& name) const {
  auto it = classes_.find(name);
  return it == classes_.end() ? nullptr : it->second;
}

std::vector<ClassTable::Step> ClassTable::chain(const TypeExpr& t) const {
  std::vector<Step> out;
  if (!t.is_class()) return out;
  std::set<std::string> seen;
  const ClassDecl* c = find(t.name);
  std::vector<Context> args = t.args;
  while (c && seen.insert(c->name).second && args.size() == c->formals.size()) {
    out.push_back({c, args});
    if (!c->superclass) break;
    const TypeExpr& sup = *c->superclass;
    std::vector<Context> next;
    for (const auto& k : sup.args) next.push_back(substitute(k, c->formals, args, Context::this_()));
    c = find(sup.name);
    args = std::move(next);
  }
  return out;
}

std::optional<ClassTable::FieldInfo> ClassTable::field(const TypeExpr& t, const std::string& f,
                                                        const Context& this_image) const {
  for (const auto& step : chain(t)) {
    for (const auto& fd : step.decl->fields) {
      if (fd.name != f) continue;
      return FieldInfo{step.decl, &fd, substitute(fd.type, step.decl->formals, step.args, this_image)};
    }
  }
  return std::nullopt;
}

std::optional<ClassTable::MethodInfo> ClassTable::method(const TypeExpr& t, const std::string& m) const {
  for (const auto& step : chain(t)) {
    for (const auto& md : step.decl->methods)
      if (md.name == m) return MethodInfo{step.decl, &md, step.args};
  }
  return std::nullopt;
}

std::vector<std::pair<const ClassDecl*, const FieldDecl*>> ClassTable::all_fields(const std::string& cls) const {
  std::vector<std::pair<const ClassDecl*, const FieldDecl*>> out;
  const ClassDecl* c = find(cls);
  if (!c) return out;
  auto steps = chain(self_type(*c));
  for (auto it = steps.rbegin(); it != steps.rend(); ++it)
    for (const auto& fd : it->decl->fields) out.push_back({it->decl, &fd});
  return out;
}

TypeExpr ClassTable::self_type(const ClassDecl& c) const {
  std::vector<Context> args;
  for (const auto& f : c.formals) args.push_back(Context::param(f));
  return TypeExpr::cls(c.name, args);
}

}  // namespace ov
