#include "ov/desugar.hpp"

#include <functional>
#include <set>

namespace ov {

bool is_value(const ExprPtr& e) { return e->is<node::Var>() || e->is<node::This>(); }

namespace {

bool is_literal(const ExprPtr& e) {
  return e->is<node::IntLit>() || e->is<node::BoolLit>() || e->is<node::NullLit>() ||
         e->is<node::UnitLit>();
}

void collect_names(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::Var>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, node::Assign>) {
          out.insert(n.name);
          collect_names(n.rhs, out);
        } else if constexpr (std::is_same_v<T, node::New>) {
          for (const auto& a : n.args) collect_names(a, out);
        } else if constexpr (std::is_same_v<T, node::FieldGet>) {
          collect_names(n.receiver, out);
        } else if constexpr (std::is_same_v<T, node::FieldSet>) {
          collect_names(n.receiver, out);
          collect_names(n.rhs, out);
        } else if constexpr (std::is_same_v<T, node::Call>) {
          collect_names(n.receiver, out);
          for (const auto& a : n.args) collect_names(a, out);
        } else if constexpr (std::is_same_v<T, node::Seq>) {
          collect_names(n.first, out);
          collect_names(n.second, out);
        } else if constexpr (std::is_same_v<T, node::Atomic> || std::is_same_v<T, node::Fork>) {
          collect_names(n.body, out);
        } else if constexpr (std::is_same_v<T, node::Valid>) {
          collect_names(n.target, out);
        } else if constexpr (std::is_same_v<T, node::Require>) {
          collect_names(n.cond, out);
        } else if constexpr (std::is_same_v<T, node::Emit>) {
          for (const auto& a : n.args) collect_names(a, out);
        } else if constexpr (std::is_same_v<T, node::Prim>) {
          for (const auto& a : n.operands) collect_names(a, out);
        } else if constexpr (std::is_same_v<T, node::OpAssign>) {
          collect_names(n.target, out);
          collect_names(n.rhs, out);
        }
      },
      e->node);
}

class Desugarer {
 public:
  Desugarer(std::set<std::string> fields, std::set<std::string> locals, const std::set<std::string>& used,
            int& counter)
      : fields_(std::move(fields)), locals_(std::move(locals)), used_(used), counter_(counter) {}

  ExprPtr run(const ExprPtr& e) {
    Span s = e->span;
    return std::visit(
        [&](const auto& n) -> ExprPtr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, node::Var>) {
            if (!locals_.count(n.name) && fields_.count(n.name))
              return make(node::FieldGet{this_(s), n.name}, s);
            return e;
          } else if constexpr (std::is_same_v<T, node::New>) {
            return make(node::New{n.type, map(n.args)}, s);
          } else if constexpr (std::is_same_v<T, node::Assign>) {
            ExprPtr r = run(n.rhs);
            if (n.declared || locals_.count(n.name) || !fields_.count(n.name)) {
              locals_.insert(n.name);
              return make(node::Assign{n.name, n.declared, r}, s);
            }
            return make(node::FieldSet{this_(s), n.name, r}, s);
          } else if constexpr (std::is_same_v<T, node::FieldGet>) {
            return with_value(run(n.receiver), s,
                              [&](ExprPtr v) { return make(node::FieldGet{v, n.field}, s); });
          } else if constexpr (std::is_same_v<T, node::FieldSet>) {
            ExprPtr recv = run(n.receiver);
            return with_value(recv, s, [&](ExprPtr v) {
              return make(node::FieldSet{v, n.field, run(n.rhs)}, s);
            });
          } else if constexpr (std::is_same_v<T, node::Call>) {
            ExprPtr recv = run(n.receiver);
            return with_value(recv, s, [&](ExprPtr v) { return make(node::Call{v, n.method, map(n.args)}, s); });
          } else if constexpr (std::is_same_v<T, node::Seq>) {
            ExprPtr a = run(n.first);
            return seq(a, run(n.second), s);
          } else if constexpr (std::is_same_v<T, node::Atomic>) {
            ExprPtr b = run(n.body);
            if (n.contract) return make(node::Atomic{n.contract, b}, s);
            return hoist_atomic(b, s);
          } else if constexpr (std::is_same_v<T, node::Fork>) {
            return make(node::Fork{run(n.body)}, s);
          } else if constexpr (std::is_same_v<T, node::Valid>) {
            return with_value(run(n.target), s, [&](ExprPtr v) { return make(node::Valid{v}, s); });
          } else if constexpr (std::is_same_v<T, node::Require>) {
            return make(node::Require{run(n.cond)}, s);
          } else if constexpr (std::is_same_v<T, node::Emit>) {
            return make(node::Emit{n.event, map(n.args)}, s);
          } else if constexpr (std::is_same_v<T, node::Prim>) {
            return make(node::Prim{n.op, map(n.operands)}, s);
          } else if constexpr (std::is_same_v<T, node::OpAssign>) {
            return op_assign(n, s);
          } else if constexpr (std::is_same_v<T, node::Throw>) {
            return make(node::Require{make(node::BoolLit{false}, s)}, s);
          } else {
            return e;
          }
        },
        e->node);
  }

 private:
  static ExprPtr this_(Span s) { return make(node::This{}, s); }

  std::vector<ExprPtr> map(const std::vector<ExprPtr>& es) {
    std::vector<ExprPtr> out;
    for (const auto& a : es) out.push_back(run(a));
    return out;
  }

  std::string fresh() {
    for (;;) {
      std::string n = "__t" + std::to_string(counter_++);
      if (!used_.count(n) && !locals_.count(n) && !fields_.count(n)) {
        locals_.insert(n);
        return n;
      }
    }
  }

  ExprPtr with_value(ExprPtr recv, Span s, const std::function<ExprPtr(ExprPtr)>& k) {
    if (is_value(recv)) return k(recv);
    std::string t = fresh();
    ExprPtr bind = make(node::Assign{t, std::nullopt, recv}, s);
    return seq(bind, k(make(node::Var{t}, s)), s);
  }

  ExprPtr op_assign(const node::OpAssign& n, Span s) {
    if (const auto* v = n.target->as<node::Var>()) {
      ExprPtr rhs = run(n.rhs);
      if (!locals_.count(v->name) && fields_.count(v->name)) {
        ExprPtr cur = make(node::FieldGet{this_(s), v->name}, s);
        return make(node::FieldSet{this_(s), v->name, make(node::Prim{n.op, {cur, rhs}}, s)}, s);
      }
      ExprPtr cur = make(node::Var{v->name}, s);
      return make(node::Assign{v->name, std::nullopt, make(node::Prim{n.op, {cur, rhs}}, s)}, s);
    }
    const auto* g = n.target->as<node::FieldGet>();
    ExprPtr recv = run(g->receiver);
    return with_value(recv, s, [&](ExprPtr v) {
      ExprPtr cur = make(node::FieldGet{v, g->field}, s);
      return make(node::FieldSet{v, g->field, make(node::Prim{n.op, {cur, run(n.rhs)}}, s)}, s);
    });
  }

  // Pull temporaries for the receiver (and non-trivial operands) out of an
  // uncontracted atomic so its body is a single call or field write on values.
  ExprPtr hoist_atomic(ExprPtr body, Span s) {
    std::vector<ExprPtr> prefix;
    ExprPtr cur = body;
    while (const auto* sq = cur->as<node::Seq>()) {
      const auto* a = sq->first->as<node::Assign>();
      if (!a || a->declared || a->name.rfind("__t", 0) != 0) break;
      prefix.push_back(sq->first);
      cur = sq->second;
    }
    auto operand = [&](const ExprPtr& x) -> ExprPtr {
      if (is_value(x) || is_literal(x)) return x;
      std::string t = fresh();
      prefix.push_back(make(node::Assign{t, std::nullopt, x}, x->span));
      return make(node::Var{t}, x->span);
    };
    ExprPtr core;
    if (const auto* c = cur->as<node::Call>(); c && is_value(c->receiver)) {
      std::vector<ExprPtr> args;
      for (const auto& a : c->args) args.push_back(operand(a));
      core = make(node::Call{c->receiver, c->method, args}, cur->span);
    } else if (const auto* f = cur->as<node::FieldSet>(); f && is_value(f->receiver)) {
      core = make(node::FieldSet{f->receiver, f->field, operand(f->rhs)}, cur->span);
    } else {
      return make(node::Atomic{std::nullopt, body}, s);
    }
    ExprPtr out = make(node::Atomic{std::nullopt, core}, s);
    for (size_t i = prefix.size(); i-- > 0;) out = seq(prefix[i], out, s);
    return out;
  }

  std::set<std::string> fields_;
  std::set<std::string> locals_;
  const std::set<std::string>& used_;
  int& counter_;
};

std::set<std::string> all_fields(const Program& p, const ClassDecl& c) {
  std::set<std::string> out;
  const ClassDecl* cur = &c;
  std::set<std::string> seen;
  while (cur && seen.insert(cur->name).second) {
    for (const auto& f : cur->fields) out.insert(f.name);
    cur = cur->superclass ? p.find_class(cur->superclass->name) : nullptr;
  }
  return out;
}

std::set<std::string> param_names(const std::vector<Param>& ps) {
  std::set<std::string> out;
  for (const auto& p : ps) out.insert(p.name);
  return out;
}

bool core_expr(const ExprPtr& e) {
  if (!e) return true;
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::OpAssign> || std::is_same_v<T, node::Throw>) {
          return false;
        } else if constexpr (std::is_same_v<T, node::New>) {
          for (const auto& a : n.args)
            if (!core_expr(a)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, node::Assign>) {
          return core_expr(n.rhs);
        } else if constexpr (std::is_same_v<T, node::FieldGet>) {
          return is_value(n.receiver);
        } else if constexpr (std::is_same_v<T, node::FieldSet>) {
          return is_value(n.receiver) && core_expr(n.rhs);
        } else if constexpr (std::is_same_v<T, node::Call>) {
          if (!is_value(n.receiver)) return false;
          for (const auto& a : n.args)
            if (!core_expr(a)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, node::Seq>) {
          return core_expr(n.first) && core_expr(n.second);
        } else if constexpr (std::is_same_v<T, node::Atomic> || std::is_same_v<T, node::Fork>) {
          return core_expr(n.body);
        } else if constexpr (std::is_same_v<T, node::Valid>) {
          return is_value(n.target);
        } else if constexpr (std::is_same_v<T, node::Require>) {
          return core_expr(n.cond);
        } else if constexpr (std::is_same_v<T, node::Emit>) {
          for (const auto& a : n.args)
            if (!core_expr(a)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, node::Prim>) {
          for (const auto& a : n.operands)
            if (!core_expr(a)) return false;
          return true;
        } else {
          return true;
        }
      },
      e->node);
}

}  // namespace

CoreProgram desugar(const Program& p) {
  CoreProgram out{p};
  for (auto& c : out.ast.classes) {
    std::set<std::string> used;
    for (const auto& f : c.fields) collect_names(f.init, used);
    collect_names(c.invariant, used);
    for (const auto& k : c.ctors) collect_names(k.body, used);
    for (const auto& m : c.methods) collect_names(m.body, used);
    std::set<std::string> fields = all_fields(p, c);
    int counter = 0;
    for (auto& f : c.fields)
      if (f.init) f.init = Desugarer(fields, {}, used, counter).run(f.init);
    if (c.invariant) c.invariant = Desugarer(fields, {}, used, counter).run(c.invariant);
    for (auto& k : c.ctors) k.body = Desugarer(fields, param_names(k.params), used, counter).run(k.body);
    for (auto& m : c.methods)
      m.body = Desugarer(fields, param_names(m.params), used, counter).run(m.body);
  }
  if (out.ast.main) {
    std::set<std::string> used;
    collect_names(out.ast.main, used);
    int counter = 0;
    out.ast.main = Desugarer({}, {}, used, counter).run(out.ast.main);
  }
  return out;
}

bool is_core(const Program& p) {
  for (const auto& c : p.classes) {
    for (const auto& f : c.fields)
      if (!core_expr(f.init)) return false;
    if (!core_expr(c.invariant)) return false;
    for (const auto& k : c.ctors)
      if (!core_expr(k.body)) return false;
    for (const auto& m : c.methods)
      if (!core_expr(m.body)) return false;
  }
  return core_expr(p.main);
}

}  // namespace ov
