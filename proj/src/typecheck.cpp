#include "ov/typecheck.hpp"

#include <algorithm>

#include "ov/desugar.hpp"

namespace ov {

bool contract_wf(const ContextEnv& env, const Contract& d) {
  return ctx_wf(env, d.validity) && ctx_wf(env, d.invalidity);
}

bool subcontract(const ContextEnv& env, const Contract& child, const Contract& parent) {
  return inside(env, child.validity, parent.validity) && inside(env, child.invalidity, parent.invalidity);
}

bool subtype(const ClassTable& ct, const ContextEnv&, const TypeExpr& t, const TypeExpr& t2) {
  if (!t.is_class() || !t2.is_class()) return same_type(t, t2);
  for (const auto& step : ct.chain(t))
    if (step.decl->name == t2.name && step.args == t2.args) return true;
  return false;
}

bool abstracts(const ContextEnv& env, const Context& k, const Context& k2) {
  if (k2.is(CtxKind::Any)) return true;
  return k == k2 && ctx_wf(env, k);
}

bool mentions_existential(const TypeExpr& t) {
  for (const auto& a : t.args)
    if (a.is(CtxKind::Existential)) return true;
  return false;
}

bool bindable(const ClassTable& ct, const ContextEnv& env, const TypeExpr& t, const TypeExpr& t2) {
  using K = TypeExpr::Kind;
  if (t.kind == K::Error || t2.kind == K::Error) return true;
  if (mentions_existential(t2)) return false;
  if (t.kind == K::Null) return t2.is_class();
  if (!t.is_class() || !t2.is_class()) return same_type(t, t2);
  for (const auto& step : ct.chain(t)) {
    if (step.decl->name != t2.name || step.args.size() != t2.args.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < t2.args.size() && ok; ++i) ok = abstracts(env, step.args[i], t2.args[i]);
    if (ok) return true;
  }
  return false;
}

namespace {

bool is_temp(const std::string& n) { return n.rfind("__t", 0) == 0; }

template <typename F>
void walk(const ExprPtr& e, const F& f) {
  if (!e) return;
  f(e);
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::New> || std::is_same_v<T, node::Emit>) {
          for (const auto& a : n.args) walk(a, f);
        } else if constexpr (std::is_same_v<T, node::Assign>) {
          walk(n.rhs, f);
        } else if constexpr (std::is_same_v<T, node::FieldGet>) {
          walk(n.receiver, f);
        } else if constexpr (std::is_same_v<T, node::FieldSet>) {
          walk(n.receiver, f);
          walk(n.rhs, f);
        } else if constexpr (std::is_same_v<T, node::Call>) {
          walk(n.receiver, f);
          for (const auto& a : n.args) walk(a, f);
        } else if constexpr (std::is_same_v<T, node::Seq>) {
          walk(n.first, f);
          walk(n.second, f);
        } else if constexpr (std::is_same_v<T, node::Atomic> || std::is_same_v<T, node::Fork>) {
          walk(n.body, f);
        } else if constexpr (std::is_same_v<T, node::Valid>) {
          walk(n.target, f);
        } else if constexpr (std::is_same_v<T, node::Require>) {
          walk(n.cond, f);
        } else if constexpr (std::is_same_v<T, node::Prim>) {
          for (const auto& a : n.operands) walk(a, f);
        } else if constexpr (std::is_same_v<T, node::OpAssign>) {
          walk(n.target, f);
          walk(n.rhs, f);
        }
      },
      e->node);
}

const Contract kTopTop{Context::top(), Context::top()};

}  // namespace

TypeChecker::TypeChecker(const Program& p) : program_(p), table_(p) {
  for (const auto& c : p.classes)
    for (const auto& m : c.methods) {
      bool forks = false;
      walk(m.body, [&](const ExprPtr& e) { forks = forks || e->is<node::Fork>(); });
      if (forks) forking_.insert(m.name);
    }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : p.classes)
      for (const auto& m : c.methods) {
        if (forking_.count(m.name)) continue;
        bool calls = false;
        walk(m.body, [&](const ExprPtr& e) {
          if (const auto* call = e->as<node::Call>()) calls = calls || forking_.count(call->method);
        });
        if (calls) changed = forking_.insert(m.name).second || changed;
      }
  }
}

TypeEnv TypeChecker::class_env(const ClassDecl& c) const {
  TypeEnv env;
  env.ctx = ContextEnv::for_class(c);
  env.this_type = table_.self_type(c);
  return env;
}

bool TypeChecker::check_type_wf(const ContextEnv& env, const TypeExpr& t, Span s, bool allow_void,
                                Diagnostics& out) {
  if (t.kind == TypeExpr::Kind::Void) {
    if (!allow_void) out.push_back(error("E-TYPE", s, "'void' is not a value type"));
    return allow_void;
  }
  if (!t.is_class()) return true;
  const ClassDecl* c = table_.find(t.name);
  if (!c) {
    out.push_back(error("E-TYPE", s, "unknown class '" + t.name + "'"));
    return false;
  }
  if (c->formals.size() != t.args.size()) {
    out.push_back(error("E-CTX-ARITY", s,
                        "'" + t.name + "' expects " + std::to_string(c->formals.size()) +
                            " context arguments, got " + std::to_string(t.args.size())));
    return false;
  }
  for (const auto& k : t.args) {
    if (!k.is(CtxKind::Any) && !ctx_wf(env, k)) {
      out.push_back(error("E-CTX-WF", s, "context '" + to_string(k) + "' is not declared here"));
      return false;
    }
  }
  return true;
}

void TypeChecker::bind_check(const TypeEnv& env, const TypeExpr& from, const TypeExpr& to, Span s,
                             const std::string& what, Diagnostics& out) {
  if (bindable(table_, env.ctx, from, to)) return;
  std::string msg = "cannot bind " + to_string(from) + " to " + to_string(to) + " in " + what;
  if (mentions_existential(from) || mentions_existential(to))
    out.push_back(error("E-BIND-EXIST", s, msg));
  else
    out.push_back(error("E-TYPE", s, msg));
}

TypeExpr TypeChecker::type_expr(TypeEnv& env, const Contract& frame, const ExprPtr& e, Diagnostics& out) {
  try {
    return type_of_node(env, frame, e, out);
  } catch (const DiagnosticError& d) {
    Diagnostic diag = d.diag();
    if (diag.span.line == 0) diag.span = e->span;
    out.push_back(diag);
    return TypeExpr::error();
  }
}

Contract TypeChecker::deduce_contract(TypeEnv& env, const ExprPtr& e) {
  auto receiver_type = [&](const ExprPtr& v) -> std::optional<TypeExpr> {
    if (v->is<node::This>()) return env.this_type;
    if (const auto* var = v->as<node::Var>()) {
      auto it = env.vars.find(var->name);
      if (it != env.vars.end()) return it->second;
    }
    return std::nullopt;
  };
  auto need = [&]() {
    return DiagnosticError(error("E-NEED-CONTRACT", e->span,
                                 "atomic body is not a single call or field write; give an explicit <V,I>"));
  };
  if (const auto* c = e->as<node::Call>(); c && is_value(c->receiver)) {
    auto tv = receiver_type(c->receiver);
    if (!tv || !tv->is_class()) throw need();
    auto mi = table_.method(*tv, c->method);
    if (!mi) throw need();
    Context img = c->receiver->is<node::This>() ? Context::this_() : owner_bound(*tv);
    return substitute(mi->decl->contract, mi->owner->formals, mi->args, img);
  }
  if (const auto* f = e->as<node::FieldSet>(); f && is_value(f->receiver)) {
    auto tv = receiver_type(f->receiver);
    if (!tv || !tv->is_class()) throw need();
    Context target = f->receiver->is<node::This>() ? Context::this_() : owner_bound(*tv);
    return {Context::bot(), target};
  }
  throw need();
}

TypeExpr TypeChecker::type_of_node(TypeEnv& env, const Contract& frame, const ExprPtr& e, Diagnostics& out) {
  using K = TypeExpr::Kind;
  Span s = e->span;
  auto fail = [&](const char* code, std::string msg) {
    out.push_back(error(code, s, std::move(msg)));
    return TypeExpr::error();
  };
  auto receiver = [&](const ExprPtr& v, TypeExpr& tv) -> bool {
    tv = type_expr(env, frame, v, out);
    if (tv.kind == K::Error) return false;
    if (tv.kind == K::Null) {
      fail("E-TYPE", "dereference of null");
      return false;
    }
    if (!tv.is_class()) {
      fail("E-NOT-CLASS", "'" + to_string(tv) + "' is not a class type");
      return false;
    }
    return true;
  };
  auto is_int = [](const TypeExpr& t) { return t.kind == K::Int || t.kind == K::Error; };
  auto is_bool = [](const TypeExpr& t) { return t.kind == K::Bool || t.kind == K::Error; };

  return std::visit(
      [&](const auto& n) -> TypeExpr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::IntLit>) {
          return TypeExpr::int_();
        } else if constexpr (std::is_same_v<T, node::BoolLit>) {
          return TypeExpr::bool_();
        } else if constexpr (std::is_same_v<T, node::NullLit>) {
          return TypeExpr::null_();
        } else if constexpr (std::is_same_v<T, node::UnitLit>) {
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::Var>) {
          auto it = env.vars.find(n.name);
          if (it == env.vars.end()) return fail("E-TYPE", "unknown variable '" + n.name + "'");
          return it->second;
        } else if constexpr (std::is_same_v<T, node::This>) {
          if (!env.this_type) return fail("E-TYPE", "'this' is not available in main");
          return *env.this_type;
        } else if constexpr (std::is_same_v<T, node::New>) {
          std::vector<TypeExpr> arg_types;
          for (const auto& a : n.args) arg_types.push_back(type_expr(env, frame, a, out));
          for (const auto& k : n.type.args)
            if (k.is(CtxKind::Any)) return fail("E-TYPE", "cannot instantiate '" + to_string(n.type) + "'");
          if (!n.type.is_class()) return fail("E-NOT-CLASS", "'new' needs a class type");
          if (!check_type_wf(env.ctx, n.type, s, false, out)) return TypeExpr::error();
          if (n.type.owner().is(CtxKind::Bot)) return fail("E-TYPE", "'bot' cannot own an object");
          const ClassDecl* c = table_.find(n.type.name);
          for (const auto& w : c->where) {
            Context l = substitute(w.lhs, c->formals, n.type.args, Context::existential());
            Context r = substitute(w.rhs, c->formals, n.type.args, Context::existential());
            bool ok = w.rel == Relation::Strict ? strictly_inside(env.ctx, l, r) : inside(env.ctx, l, r);
            if (!ok)
              return fail("E-CTX-WF", "constraint " + to_string(w.lhs) + (w.rel == Relation::Strict ? " << " : " <= ") +
                                          to_string(w.rhs) + " of '" + c->name + "' does not hold");
          }
          std::vector<Param> params;
          if (!c->ctors.empty()) params = c->ctors.front().params;
          if (params.size() != n.args.size())
            return fail("E-TYPE", "constructor of '" + c->name + "' expects " + std::to_string(params.size()) +
                                      " arguments");
          for (size_t i = 0; i < params.size(); ++i) {
            TypeExpr pt = substitute(params[i].type, c->formals, n.type.args, Context::existential());
            bind_check(env, arg_types[i], pt, n.args[i]->span, "constructor argument", out);
          }
          return n.type;
        } else if constexpr (std::is_same_v<T, node::Assign>) {
          TypeExpr tr = type_expr(env, frame, n.rhs, out);
          if (n.declared) {
            check_type_wf(env.ctx, *n.declared, s, false, out);
            if (env.vars.count(n.name)) return fail("E-TYPE", "variable '" + n.name + "' is bound twice");
            bind_check(env, tr, *n.declared, s, "declaration of '" + n.name + "'", out);
            env.vars[n.name] = *n.declared;
          } else if (auto it = env.vars.find(n.name); it != env.vars.end()) {
            bind_check(env, tr, it->second, s, "assignment to '" + n.name + "'", out);
          } else {
            if (tr.kind == K::Null || tr.kind == K::Void)
              return fail("E-TYPE", "cannot infer a type for '" + n.name + "'");
            if (mentions_existential(tr) && !is_temp(n.name))
              return fail("E-BIND-EXIST", "cannot bind " + to_string(tr) + " to new variable '" + n.name + "'");
            env.vars[n.name] = tr;
          }
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::FieldGet>) {
          TypeExpr tv;
          if (!receiver(n.receiver, tv)) return TypeExpr::error();
          Context img = n.receiver->template is<node::This>() ? Context::this_() : Context::existential();
          auto fi = table_.field(tv, n.field, img);
          if (!fi) return fail("E-TYPE", "no field '" + n.field + "' in " + to_string(tv));
          return fi->type;
        } else if constexpr (std::is_same_v<T, node::FieldSet>) {
          TypeExpr tv;
          bool ok = receiver(n.receiver, tv);
          TypeExpr tr = type_expr(env, frame, n.rhs, out);
          if (!ok) return TypeExpr::error();
          bool self = n.receiver->template is<node::This>();
          auto fi = table_.field(tv, n.field, self ? Context::this_() : Context::existential());
          if (!fi) return fail("E-TYPE", "no field '" + n.field + "' in " + to_string(tv));
          if (fi->decl->is_final && !(self && env.in_ctor))
            return fail("E-TYPE", "final field '" + n.field + "' can only be set by its constructor");
          Context target = self ? Context::this_() : owner_bound(tv);
          if (target.is(CtxKind::Existential) || target.is(CtxKind::Any) ||
              !inside(env.ctx, target, frame.invalidity))
            return fail("E-EFFECT", "write to '" + n.field + "' in context " + to_string(target) +
                                        " is outside the invalidity set " + to_string(frame.invalidity));
          bind_check(env, tr, fi->type, s, "write to '" + n.field + "'", out);
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::Call>) {
          TypeExpr tv;
          bool ok = receiver(n.receiver, tv);
          std::vector<TypeExpr> arg_types;
          for (const auto& a : n.args) arg_types.push_back(type_expr(env, frame, a, out));
          if (!ok) return TypeExpr::error();
          auto mi = table_.method(tv, n.method);
          if (!mi) return fail("E-TYPE", "no method '" + n.method + "' in " + to_string(tv));
          bool self = n.receiver->template is<node::This>();
          Context img_types = self ? Context::this_() : Context::existential();
          Context img_contract = self ? Context::this_() : owner_bound(tv);
          const auto& formals = mi->owner->formals;
          const MethodDecl& md = *mi->decl;
          if (md.params.size() != n.args.size())
            return fail("E-TYPE", "'" + n.method + "' expects " + std::to_string(md.params.size()) + " arguments");
          for (size_t i = 0; i < md.params.size(); ++i) {
            TypeExpr pt = substitute(md.params[i].type, formals, mi->args, img_types);
            bind_check(env, arg_types[i], pt, n.args[i]->span, "argument '" + md.params[i].name + "'", out);
          }
          TypeExpr ret = substitute(md.ret, formals, mi->args, img_types);
          Contract callee = substitute(md.contract, formals, mi->args, img_contract);
          if (!callee.invalidity.is(CtxKind::Bot)) {
            Context current = env.this_type ? Context::this_() : Context::top();
            bool from_owner = self || (!img_contract.is(CtxKind::Existential) && !img_contract.is(CtxKind::Any) &&
                                       inside(env.ctx, img_contract, current));
            if (!from_owner) {
              fail("E-OWNER-CALL", "'" + n.method + "' may invalidate an object whose owner " +
                                       to_string(img_contract) + " is not inside the caller");
              return ret;
            }
          }
          if (!subcontract(env.ctx, callee, frame)) {
            fail("E-SUBCONTRACT", "contract " + to_string(callee) + " of '" + n.method +
                                      "' is not a subcontract of " + to_string(frame));
            return ret;
          }
          if (env.in_atomic && forking_.count(n.method))
            fail("E-FORK-IN-ATOMIC", "'" + n.method + "' may fork and is called inside a transaction");
          return ret;
        } else if constexpr (std::is_same_v<T, node::Seq>) {
          type_expr(env, frame, n.first, out);
          return type_expr(env, frame, n.second, out);
        } else if constexpr (std::is_same_v<T, node::Atomic>) {
          Contract delta;
          bool deduced = !n.contract;
          if (n.contract) {
            delta = *n.contract;
            if (!contract_wf(env.ctx, delta))
              return fail("E-CTX-WF", "contract " + to_string(delta) + " is not well-formed here");
            if (!subcontract(env.ctx, delta, frame))
              fail("E-SUBCONTRACT", "transaction contract " + to_string(delta) + " is not a subcontract of " +
                                        to_string(frame));
          } else {
            try {
              delta = deduce_contract(env, n.body);
            } catch (const DiagnosticError& d) {
              out.push_back(d.diag());
              type_expr(env, frame, n.body, out);
              return TypeExpr::error();
            }
          }
          bool saved = env.in_atomic;
          env.in_atomic = true;
          size_t before = out.size();
          TypeExpr t = type_expr(env, delta, n.body, out);
          env.in_atomic = saved;
          if (deduced && out.size() == before && !subcontract(env.ctx, delta, frame))
            fail("E-SUBCONTRACT", "deduced transaction contract " + to_string(delta) +
                                      " is not a subcontract of " + to_string(frame));
          return t;
        } else if constexpr (std::is_same_v<T, node::Fork>) {
          if (env.in_atomic) return fail("E-FORK-IN-ATOMIC", "fork inside a transaction");
          if (!env.fork_allowed)
            return fail("E-FORK-IN-ATOMIC", "fork is only allowed at top level (main or a <top,top> method)");
          TypeEnv inner = env;
          type_expr(inner, kTopTop, n.body, out);
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::Valid>) {
          TypeExpr tv;
          if (!receiver(n.target, tv)) return TypeExpr::error();
          return TypeExpr::bool_();
        } else if constexpr (std::is_same_v<T, node::Require>) {
          TypeExpr t = type_expr(env, frame, n.cond, out);
          if (!is_bool(t)) fail("E-TYPE", "require needs a bool, got " + to_string(t));
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::Emit>) {
          for (const auto& a : n.args) {
            TypeExpr t = type_expr(env, frame, a, out);
            if (t.kind == K::Void) fail("E-TYPE", "event argument has no value");
          }
          return TypeExpr::void_();
        } else if constexpr (std::is_same_v<T, node::Prim>) {
          std::vector<TypeExpr> ts;
          for (const auto& a : n.operands) ts.push_back(type_expr(env, frame, a, out));
          switch (n.op) {
            case PrimOp::Add:
            case PrimOp::Sub:
            case PrimOp::Mul:
            case PrimOp::Div:
            case PrimOp::Mod:
            case PrimOp::Neg:
              for (const auto& t : ts)
                if (!is_int(t)) return fail("E-TYPE", std::string("operator '") + spelling(n.op) + "' needs ints");
              return TypeExpr::int_();
            case PrimOp::Lt:
            case PrimOp::Le:
            case PrimOp::Gt:
            case PrimOp::Ge:
              for (const auto& t : ts)
                if (!is_int(t)) return fail("E-TYPE", std::string("operator '") + spelling(n.op) + "' needs ints");
              return TypeExpr::bool_();
            case PrimOp::And:
            case PrimOp::Or:
            case PrimOp::Not:
              for (const auto& t : ts)
                if (!is_bool(t)) return fail("E-TYPE", std::string("operator '") + spelling(n.op) + "' needs bools");
              return TypeExpr::bool_();
            case PrimOp::Eq:
            case PrimOp::Ne: {
              const TypeExpr& a = ts[0];
              const TypeExpr& b = ts[1];
              auto refish = [](const TypeExpr& t) { return t.is_class() || t.kind == K::Null; };
              bool ok = a.kind == K::Error || b.kind == K::Error || (refish(a) && refish(b)) ||
                        (a.kind == b.kind && (a.kind == K::Int || a.kind == K::Bool));
              if (!ok) return fail("E-TYPE", "cannot compare " + to_string(a) + " with " + to_string(b));
              return TypeExpr::bool_();
            }
          }
          return TypeExpr::error();
        } else {
          return fail("E-TYPE", "surface construct left after desugaring");
        }
      },
      e->node);
}

Diagnostics TypeChecker::check_method(const ClassDecl& c, const MethodDecl& m) {
  Diagnostics out;
  TypeEnv env = class_env(c);
  if (!contract_wf(env.ctx, m.contract)) {
    out.push_back(error("E-CTX-WF", m.span, "contract " + to_string(m.contract) + " of '" + m.name +
                                                 "' mentions an undeclared context"));
    return out;
  }
  check_type_wf(env.ctx, m.ret, m.span, true, out);
  for (const auto& p : m.params) {
    check_type_wf(env.ctx, p.type, m.span, false, out);
    if (!env.vars.emplace(p.name, p.type).second)
      out.push_back(error("E-TYPE", m.span, "parameter '" + p.name + "' declared twice"));
  }
  env.fork_allowed = m.contract == kTopTop;
  TypeExpr t = type_expr(env, m.contract, m.body, out);
  if (m.ret.kind != TypeExpr::Kind::Void) bind_check(env, t, m.ret, m.span, "result of '" + m.name + "'", out);
  return out;
}

Diagnostics TypeChecker::check_ctor(const ClassDecl& c, const CtorDecl& k) {
  Diagnostics out;
  TypeEnv env = class_env(c);
  env.in_ctor = true;
  for (const auto& p : k.params) {
    check_type_wf(env.ctx, p.type, k.span, false, out);
    if (!env.vars.emplace(p.name, p.type).second)
      out.push_back(error("E-TYPE", k.span, "parameter '" + p.name + "' declared twice"));
  }
  type_expr(env, {Context::bot(), Context::this_()}, k.body, out);
  return out;
}

namespace {

struct Owned {
  bool owned = false;
  std::string cls;
};

class EscapeScan {
 public:
  EscapeScan(const ClassTable& ct, const ClassDecl& c, Diagnostics& out) : ct_(ct), c_(c), out_(out) {}

  Owned scan(const ExprPtr& e) {
    if (e->is<node::This>()) return {true, c_.name};
    if (const auto* v = e->as<node::Var>()) {
      auto it = temps_.find(v->name);
      return it == temps_.end() ? Owned{} : it->second;
    }
    if (const auto* a = e->as<node::Assign>()) {
      temps_[a->name] = scan(a->rhs);
      return {};
    }
    if (const auto* s = e->as<node::Seq>()) {
      scan(s->first);
      return scan(s->second);
    }
    if (const auto* p = e->as<node::Prim>()) {
      for (const auto& o : p->operands) scan(o);
      return {};
    }
    if (const auto* g = e->as<node::FieldGet>()) {
      Owned r = scan(g->receiver);
      if (!r.owned) {
        out_.push_back(error("E-INV-ESCAPE", e->span,
                             "invariant reads '" + g->field + "' through a reference not owned by this object"));
        return {};
      }
      const ClassDecl* rc = ct_.find(r.cls);
      if (!rc) return {};
      auto fi = ct_.field(ct_.self_type(*rc), g->field, Context::this_());
      if (!fi) return {};
      const TypeExpr& declared = fi->decl->type;
      if (declared.is_class() && !declared.args.empty() && declared.owner().is(CtxKind::This))
        return {true, declared.name};
      return {};
    }
    return {};
  }

 private:
  const ClassTable& ct_;
  const ClassDecl& c_;
  Diagnostics& out_;
  std::map<std::string, Owned> temps_;
};

}  // namespace

Diagnostics TypeChecker::check_invariant_clause(const ClassDecl& c) {
  Diagnostics out;
  if (!c.invariant) return out;
  walk(c.invariant, [&](const ExprPtr& e) {
    bool pure = e->is<node::IntLit>() || e->is<node::BoolLit>() || e->is<node::NullLit>() ||
                e->is<node::Var>() || e->is<node::This>() || e->is<node::FieldGet>() || e->is<node::Prim>() ||
                e->is<node::Seq>();
    if (const auto* a = e->as<node::Assign>()) pure = !a->declared && is_temp(a->name);
    if (!pure) out.push_back(error("E-INV-IMPURE", e->span, "invariant must be a side-effect free expression"));
  });
  if (!out.empty()) return out;
  EscapeScan(table_, c, out).scan(c.invariant);
  if (!out.empty()) return out;
  TypeEnv env = class_env(c);
  TypeExpr t = type_expr(env, {Context::bot(), Context::bot()}, c.invariant, out);
  if (t.kind != TypeExpr::Kind::Bool && t.kind != TypeExpr::Kind::Error)
    out.push_back(error("E-TYPE", c.inv_span, "invariant must be bool, got " + to_string(t)));
  return out;
}

Diagnostics TypeChecker::check_class(const ClassDecl& c) {
  Diagnostics out;
  ContextEnv cenv = ContextEnv::for_class(c);
  std::set<std::string> formals;
  for (const auto& f : c.formals)
    if (!formals.insert(f).second) out.push_back(error("E-CTX-WF", c.span, "context parameter '" + f + "' repeated"));
  for (const auto& w : c.where)
    for (const auto& k : {w.lhs, w.rhs})
      if (!ctx_wf(cenv, k))
        out.push_back(error("E-CTX-WF", c.span, "constraint mentions undeclared context '" + to_string(k) + "'"));

  if (c.superclass) {
    const TypeExpr& sup = *c.superclass;
    if (check_type_wf(cenv, sup, c.span, false, out)) {
      if (!sup.is_class() || sup.args.empty() || sup.owner() != Context::param(c.formals[0]))
        out.push_back(error("E-CTX-WF", c.span, "superclass must be owned by '" + c.formals[0] + "'"));
      std::set<std::string> seen{c.name};
      for (const ClassDecl* s = table_.find(sup.name); s;
           s = s->superclass ? table_.find(s->superclass->name) : nullptr) {
        if (!seen.insert(s->name).second) {
          out.push_back(error("E-TYPE", c.span, "inheritance cycle through '" + c.name + "'"));
          break;
        }
      }
    }
  }

  std::set<std::string> field_names;
  auto all = table_.all_fields(c.name);
  for (const auto& [owner, fd] : all)
    if (owner != &c) field_names.insert(fd->name);
  for (const auto& f : c.fields) {
    if (!field_names.insert(f.name).second)
      out.push_back(error("E-TYPE", f.span, "field '" + f.name + "' declared twice"));
    check_type_wf(cenv, f.type, f.span, false, out);
    if (f.init) {
      TypeEnv env = class_env(c);
      env.in_ctor = true;
      TypeExpr t = type_expr(env, {Context::bot(), Context::this_()}, f.init, out);
      bind_check(env, t, f.type, f.span, "initializer of '" + f.name + "'", out);
    }
  }

  if (c.ctors.size() > 1) out.push_back(error("E-TYPE", c.ctors[1].span, "only one constructor is allowed"));
  for (const auto& k : c.ctors) {
    auto d = check_ctor(c, k);
    out.insert(out.end(), d.begin(), d.end());
  }

  std::set<std::string> method_names;
  for (const auto& m : c.methods) {
    if (!method_names.insert(m.name).second) {
      out.push_back(error("E-TYPE", m.span, "method '" + m.name + "' declared twice"));
      continue;
    }
    if (c.superclass) {
      TypeExpr self = table_.self_type(c);
      auto steps = table_.chain(self);
      for (size_t i = 1; i < steps.size(); ++i) {
        const MethodDecl* base = nullptr;
        for (const auto& bm : steps[i].decl->methods)
          if (bm.name == m.name) base = &bm;
        if (!base) continue;
        const auto& bf = steps[i].decl->formals;
        const auto& ba = steps[i].args;
        Contract bc = substitute(base->contract, bf, ba, Context::this_());
        if (bc != m.contract)
          out.push_back(error("E-SUBCONTRACT", m.span, "override of '" + m.name + "' must keep contract " +
                                                           to_string(bc)));
        bool sig = base->params.size() == m.params.size() &&
                   same_type(substitute(base->ret, bf, ba, Context::this_()), m.ret);
        for (size_t p = 0; sig && p < m.params.size(); ++p)
          sig = same_type(substitute(base->params[p].type, bf, ba, Context::this_()), m.params[p].type);
        if (!sig) out.push_back(error("E-TYPE", m.span, "override of '" + m.name + "' changes its signature"));
        break;
      }
    }
    auto d = check_method(c, m);
    out.insert(out.end(), d.begin(), d.end());
  }

  auto inv = check_invariant_clause(c);
  out.insert(out.end(), inv.begin(), inv.end());
  return out;
}

Diagnostics TypeChecker::check_main(const ExprPtr& main) {
  Diagnostics out;
  if (!main) return out;
  TypeEnv env;
  env.ctx = ContextEnv::for_main();
  env.fork_allowed = true;
  type_expr(env, kTopTop, main, out);
  return out;
}

Diagnostics TypeChecker::check() {
  Diagnostics out;
  std::set<std::string> names;
  for (const auto& c : program_.classes) {
    if (!names.insert(c.name).second) {
      out.push_back(error("E-TYPE", c.span, "class '" + c.name + "' declared twice"));
      continue;
    }
    auto d = check_class(c);
    out.insert(out.end(), d.begin(), d.end());
  }
  auto d = check_main(program_.main);
  out.insert(out.end(), d.begin(), d.end());
  std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return std::tie(a.span.line, a.span.col) < std::tie(b.span.line, b.span.col);
  });
  return out;
}

Diagnostics check_program(const CoreProgram& p) { return TypeChecker(p.ast).check(); }

}  // namespace ov
