#include "ov/runtime.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "ov/desugar.hpp"

namespace ov {

bool operator==(const Value& a, const Value& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Value::Kind::Int: return a.i == b.i;
    case Value::Kind::Bool: return a.b == b.b;
    case Value::Kind::Ref: return a.ref == b.ref;
    case Value::Kind::Fail: return a.reason == b.reason;
    default: return true;
  }
}

std::string to_string(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Unit: return "()";
    case Value::Kind::Int: return v.i.str();
    case Value::Kind::Bool: return v.b ? "true" : "false";
    case Value::Kind::Null: return "null";
    case Value::Kind::Ref: return to_string(RtCtx::at(v.ref));
    case Value::Kind::Fail: return "fail(" + v.reason + ")";
  }
  return "?";
}

namespace {

[[noreturn]] void stuck(const std::string& msg, Span s = {}) {
  throw RuntimeFault(error("E-STUCK", s, msg));
}

struct ClassInfo {
  std::shared_ptr<const std::vector<std::string>> names;
  std::vector<std::pair<const ClassDecl*, const FieldDecl*>> fields;
  std::map<std::string, int> index;
  std::vector<ClassTable::Step> chain;  // from the class applied to its own formals
};

struct Activation {
  std::optional<Loc> self;
  std::map<std::string, Value> locals;
  const ClassDecl* code_class = nullptr;  // class whose code is running; formals resolve via code_args
  std::vector<RtCtx> code_args;
};

struct LogEntry {
  Loc loc;
  int idx;
  Value old;
};

struct TxFrame {
  RtContract contract;
  std::vector<LogEntry> log;
  std::vector<Loc> created;
  std::set<Loc> sigma_before;
  std::size_t kont_depth = 0;
  std::size_t act_depth = 0;
  std::map<std::string, Value> locals_before;
  std::size_t events_mark = 0;
};

namespace k {
struct Seq {
  ExprPtr second;
};
struct Assign {
  std::string name;
};
struct FieldSet {
  Loc target;
  int idx;
};
struct Call {
  Value recv;
  std::string method;
  std::vector<ExprPtr> args;
  std::vector<Value> done;
};
struct New {
  const ClassDecl* cls;
  std::vector<RtCtx> ctx;
  std::vector<ExprPtr> args;
  std::vector<Value> done;
};
struct Prim {
  PrimOp op;
  std::vector<ExprPtr> operands;
  std::vector<Value> done;
};
struct Require {};
struct Emit {
  std::string name;
  std::vector<ExprPtr> args;
  std::vector<Value> done;
};
struct Return {
  Loc self;
};
struct Init {
  Loc obj;
  std::size_t pos;
  std::vector<Value> ctor_args;
  std::size_t mark;
};
struct CtorBody {
  Loc obj;
  std::size_t mark;
};
struct InAtomic {};
}  // namespace k

using Kont = std::variant<k::Seq, k::Assign, k::FieldSet, k::Call, k::New, k::Prim, k::Require, k::Emit,
                          k::Return, k::Init, k::CtorBody, k::InAtomic>;

struct Thread {
  int id = 0;
  bool has_value = false;  // control holds a value (else an expression)
  ExprPtr expr;
  Value value;
  std::vector<Kont> konts;
  std::vector<Activation> acts;
  std::vector<TxFrame> frames;
  std::vector<Loc> allocated;
  bool done = false;
};

std::vector<Loc> intersect(const std::vector<Loc>& a, const std::vector<Loc>& b) {
  std::vector<Loc> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

struct Machine::Impl {
  Machine& m;
  std::map<const ClassDecl*, ClassInfo> infos;
  std::deque<Thread> threads;
  std::optional<int> lock;
  std::size_t current = 0;
  std::uint64_t quantum_left = 0;
  std::mt19937_64 rng;

  explicit Impl(Machine& mm) : m(mm), rng(mm.opts_.seed) {}

  State& st() { return m.state_; }
  Counters& ctr() { return m.state_.counters; }

  void rd(Loc l, int slot) {
    if (m.opts_.access) m.opts_.access->reads.insert({l, slot});
  }
  void wr(Loc l, int slot) {
    if (m.opts_.access) m.opts_.access->writes.insert({l, slot});
  }

  const ClassInfo& info(const ClassDecl* c) {
    auto it = infos.find(c);
    if (it != infos.end()) return it->second;
    ClassInfo ci;
    ci.fields = m.table_.all_fields(c->name);
    auto names = std::make_shared<std::vector<std::string>>();
    for (std::size_t i = 0; i < ci.fields.size(); ++i) {
      names->push_back(ci.fields[i].second->name);
      ci.index[ci.fields[i].second->name] = static_cast<int>(i);
    }
    ci.names = names;
    ci.chain = m.table_.chain(m.table_.self_type(*c));
    return infos.emplace(c, std::move(ci)).first->second;
  }

  ObjectRec& obj(Loc l) {
    auto it = st().heap.find(l);
    if (it == st().heap.end())
      throw RuntimeFault(error("E-DANGLING", {}, "location " + to_string(RtCtx::at(l)) + " is not allocated"));
    return it->second;
  }

  int field_index(const ObjectRec& o, const std::string& f) {
    const auto& ci = info(o.cls);
    auto it = ci.index.find(f);
    if (it == ci.index.end()) stuck("no field '" + f + "' in " + o.cls->name);
    return it->second;
  }

  // Contexts written in terms of the object's own class formals.
  RtCtx resolve_obj(const Context& k, Loc self, const ObjectRec& o) {
    switch (k.kind) {
      case CtxKind::This: return RtCtx::at(self);
      case CtxKind::Top: return RtCtx::top();
      case CtxKind::Bot: return RtCtx::bot();
      case CtxKind::Param:
        for (std::size_t i = 0; i < o.cls->formals.size(); ++i)
          if (o.cls->formals[i] == k.name) return o.args[i];
        break;
      default: break;
    }
    stuck("cannot resolve context '" + to_string(k) + "'");
  }

  std::vector<RtCtx> resolve_step(const std::vector<Context>& args, Loc self, const ObjectRec& o) {
    std::vector<RtCtx> out;
    for (const auto& k : args) out.push_back(resolve_obj(k, self, o));
    return out;
  }

  RtCtx resolve(const Activation& a, const Context& k) {
    switch (k.kind) {
      case CtxKind::This:
        if (!a.self) stuck("'this' outside an object");
        return RtCtx::at(*a.self);
      case CtxKind::Top: return RtCtx::top();
      case CtxKind::Bot: return RtCtx::bot();
      case CtxKind::Param:
        if (a.code_class)
          for (std::size_t i = 0; i < a.code_class->formals.size(); ++i)
            if (a.code_class->formals[i] == k.name) return a.code_args[i];
        break;
      default: break;
    }
    stuck("cannot resolve context '" + to_string(k) + "'");
  }

  RtContract method_contract(Loc target, const std::string& name) {
    ObjectRec& o = obj(target);
    auto mi = m.table_.method(m.table_.self_type(*o.cls), name);
    if (!mi) stuck("no method '" + name + "' in " + o.cls->name);
    Activation a{target, {}, mi->owner, resolve_step(mi->args, target, o)};
    return {resolve(a, mi->decl->contract.validity), resolve(a, mi->decl->contract.invalidity)};
  }

  // ---- invariants

  std::optional<Value> inv_eval(const ExprPtr& e, Loc self, std::map<std::string, Value>& temps) {
    if (const auto* n = e->as<node::IntLit>()) return Value::int_(n->value);
    if (const auto* n = e->as<node::BoolLit>()) return Value::bool_(n->value);
    if (e->is<node::NullLit>()) return Value::null();
    if (e->is<node::This>()) return Value::ref_(self);
    if (const auto* n = e->as<node::Var>()) {
      auto it = temps.find(n->name);
      if (it == temps.end()) return std::nullopt;
      return it->second;
    }
    if (const auto* n = e->as<node::Assign>()) {
      auto v = inv_eval(n->rhs, self, temps);
      if (!v) return std::nullopt;
      temps[n->name] = *v;
      return Value::unit();
    }
    if (const auto* n = e->as<node::Seq>()) {
      if (!inv_eval(n->first, self, temps)) return std::nullopt;
      return inv_eval(n->second, self, temps);
    }
    if (const auto* n = e->as<node::FieldGet>()) {
      auto r = inv_eval(n->receiver, self, temps);
      if (!r || !r->is(Value::Kind::Ref)) return std::nullopt;
      auto it = st().heap.find(r->ref);
      if (it == st().heap.end()) return std::nullopt;
      int idx = field_index(it->second, n->field);
      rd(r->ref, idx);
      return it->second.fields[idx];
    }
    if (const auto* n = e->as<node::Prim>()) {
      if (n->op == PrimOp::And || n->op == PrimOp::Or) {
        auto a = inv_eval(n->operands[0], self, temps);
        if (!a || !a->is(Value::Kind::Bool)) return std::nullopt;
        if (a->b == (n->op == PrimOp::Or)) return a;
        auto b = inv_eval(n->operands[1], self, temps);
        if (!b || !b->is(Value::Kind::Bool)) return std::nullopt;
        return b;
      }
      std::vector<Value> vs;
      for (const auto& o : n->operands) {
        auto v = inv_eval(o, self, temps);
        if (!v) return std::nullopt;
        vs.push_back(*v);
      }
      std::string err;
      auto r = prim(n->op, vs, err);
      if (!r) return std::nullopt;
      return r;
    }
    return std::nullopt;
  }

  bool invariant_holds(Loc l) {
    ObjectRec& o = obj(l);
    for (const auto& step : info(o.cls).chain) {
      if (!step.decl->invariant) continue;
      std::map<std::string, Value> temps;
      auto v = inv_eval(step.decl->invariant, l, temps);
      if (!v || !v->is(Value::Kind::Bool) || !v->b) return false;
    }
    return true;
  }

  bool eval_invariant(Loc l) {
    ++ctr().invariant_evals;
    return invariant_holds(l);
  }

  bool assert_valid(Loc l) {
    obj(l);
    bool all = true;
    for (Loc x : st().tree.subtree(RtCtx::at(l))) {
      bool ok = eval_invariant(x);
      if (ok)
        st().sigma.insert(x);
      else
        st().sigma.erase(x);
      wr(x, kValidSlot);
      all = all && ok;
    }
    return all;
  }

  void debug_check_sigma() {
    if (!m.opts_.debug_sigma) return;
    for (Loc l : st().sigma)
      if (!invariant_holds(l))
        throw std::logic_error("quiescent soundness violated at " + to_string(RtCtx::at(l)));
  }

  void naive_checks(const std::vector<Loc>& locs, bool entry) {
    for (Loc x : locs) {
      if (entry)
        ++ctr().pre_checks;
      else
        ++ctr().post_checks;
      eval_invariant(x);
    }
  }

  // ---- primitive operations

  static std::optional<Value> prim(PrimOp op, const std::vector<Value>& v, std::string& err) {
    auto ints = [&]() {
      for (const auto& x : v)
        if (!x.is(Value::Kind::Int)) return false;
      return true;
    };
    auto bools = [&]() {
      for (const auto& x : v)
        if (!x.is(Value::Kind::Bool)) return false;
      return true;
    };
    switch (op) {
      case PrimOp::Add:
      case PrimOp::Sub:
      case PrimOp::Mul:
      case PrimOp::Div:
      case PrimOp::Mod:
      case PrimOp::Lt:
      case PrimOp::Le:
      case PrimOp::Gt:
      case PrimOp::Ge:
        if (!ints()) {
          err = "type";
          return std::nullopt;
        }
        break;
      case PrimOp::Neg:
        if (!ints()) {
          err = "type";
          return std::nullopt;
        }
        return Value::int_(-v[0].i);
      case PrimOp::Not:
        if (!bools()) {
          err = "type";
          return std::nullopt;
        }
        return Value::bool_(!v[0].b);
      case PrimOp::And:
      case PrimOp::Or:
        if (!bools()) {
          err = "type";
          return std::nullopt;
        }
        return Value::bool_(op == PrimOp::And ? v[0].b && v[1].b : v[0].b || v[1].b);
      case PrimOp::Eq:
      case PrimOp::Ne: {
        auto refish = [](const Value& x) { return x.is(Value::Kind::Ref) || x.is(Value::Kind::Null); };
        bool comparable = (refish(v[0]) && refish(v[1])) || v[0].kind == v[1].kind;
        if (!comparable || v[0].is(Value::Kind::Unit) || v[0].is(Value::Kind::Fail)) {
          err = "type";
          return std::nullopt;
        }
        bool eq = v[0] == v[1];
        return Value::bool_(op == PrimOp::Eq ? eq : !eq);
      }
    }
    const BigInt& a = v[0].i;
    const BigInt& b = v[1].i;
    switch (op) {
      case PrimOp::Add: return Value::int_(a + b);
      case PrimOp::Sub: return Value::int_(a - b);
      case PrimOp::Mul: return Value::int_(a * b);
      case PrimOp::Div:
      case PrimOp::Mod:
        if (b == 0) {
          err = "div0";
          return std::nullopt;
        }
        return Value::int_(op == PrimOp::Div ? BigInt(a / b) : BigInt(a % b));
      case PrimOp::Lt: return Value::bool_(a < b);
      case PrimOp::Le: return Value::bool_(a <= b);
      case PrimOp::Gt: return Value::bool_(a > b);
      case PrimOp::Ge: return Value::bool_(a >= b);
      default: break;
    }
    err = "type";
    return std::nullopt;
  }

  // ---- control helpers

  static void ret(Thread& t, Value v) {
    t.has_value = true;
    t.value = std::move(v);
  }
  static void eval(Thread& t, ExprPtr e) {
    t.has_value = false;
    t.expr = std::move(e);
  }

  Value value_of(Thread& t, const ExprPtr& v) {
    if (v->is<node::This>()) {
      const auto& a = t.acts.back();
      if (!a.self) stuck("'this' outside an object", v->span);
      return Value::ref_(*a.self);
    }
    if (const auto* var = v->as<node::Var>()) {
      auto& locals = t.acts.back().locals;
      auto it = locals.find(var->name);
      if (it == locals.end()) stuck("unbound variable '" + var->name + "'", v->span);
      return it->second;
    }
    stuck("receiver is not a value", v->span);
  }

  void raise(Thread& t, const std::string& reason) {
    if (!t.frames.empty()) {
      abort_top(t, reason);
      return;
    }
    m.failures_.push_back("t" + std::to_string(t.id) + ":" + reason);
    t.konts.clear();
    ret(t, Value::fail(reason));
    t.done = true;
  }

  // ---- transactions

  void begin(Thread& t, const RtContract& d, const ExprPtr& body) {
    if (m.opts_.before_begin) m.opts_.before_begin(m, t.id, d);
    auto& tree = st().tree;
    std::vector<Loc> full_v = tree.subtree(d.validity);
    std::vector<Loc> start = full_v;
    if (!t.frames.empty()) start = intersect(start, tree.subtree(t.frames.back().contract.invalidity));
    if (m.opts_.naive) naive_checks(full_v, true);
    std::set<Loc> before = st().sigma;
    bool ok = true;
    for (Loc x : start) {
      rd(x, kValidSlot);
      if (st().sigma.count(x)) continue;
      ++ctr().pre_checks;
      if (!eval_invariant(x)) {
        ok = false;
        break;
      }
      st().sigma.insert(x);
      wr(x, kValidSlot);
    }
    if (!ok) {
      st().sigma = std::move(before);
      m.failures_.push_back("t" + std::to_string(t.id) + ":" + kPreFail);
      if (m.opts_.after_abort) m.opts_.after_abort(m, t.id, kPreFail);
      ret(t, Value::fail(kPreFail));
      return;
    }
    TxFrame f;
    f.contract = d;
    f.sigma_before = std::move(before);
    f.kont_depth = t.konts.size();
    f.act_depth = t.acts.size();
    f.locals_before = t.acts.back().locals;
    f.events_mark = st().events.size();
    t.frames.push_back(std::move(f));
    if (t.frames.size() == 1) lock = t.id;
    t.konts.push_back(k::InAtomic{});
    eval(t, body);
  }

  void commit(Thread& t, Value v) {
    TxFrame& f = t.frames.back();
    auto& tree = st().tree;
    std::vector<Loc> sv = tree.subtree(f.contract.validity);
    std::vector<Loc> si = tree.subtree(f.contract.invalidity);
    std::set<Loc> reval;
    for (Loc x : intersect(sv, si)) reval.insert(x);
    for (Loc x : f.created) reval.insert(x);
    if (m.opts_.naive) {
      std::set<Loc> all(sv.begin(), sv.end());
      all.insert(si.begin(), si.end());
      all.insert(f.created.begin(), f.created.end());
      naive_checks(std::vector<Loc>(all.begin(), all.end()), false);
    }
    for (Loc x : reval) {
      ++ctr().post_checks;
      if (!eval_invariant(x)) {
        abort_top(t, kPostFail);
        return;
      }
    }
    for (Loc x : reval) {
      st().sigma.insert(x);
      wr(x, kValidSlot);
    }
    TxFrame done = std::move(t.frames.back());
    t.frames.pop_back();
    if (!t.frames.empty()) {
      auto& parent = t.frames.back();
      parent.log.insert(parent.log.end(), done.log.begin(), done.log.end());
      parent.created.insert(parent.created.end(), done.created.begin(), done.created.end());
    } else {
      lock.reset();
      debug_check_sigma();
    }
    ret(t, std::move(v));
    if (m.opts_.after_commit) m.opts_.after_commit(m, t.id);
  }

  void abort_top(Thread& t, const std::string& reason) {
    TxFrame f = std::move(t.frames.back());
    t.frames.pop_back();
    for (auto it = f.log.rbegin(); it != f.log.rend(); ++it) obj(it->loc).fields[it->idx] = it->old;
    for (auto it = f.created.rbegin(); it != f.created.rend(); ++it) {
      st().heap.erase(*it);
      st().tree.remove(*it);
    }
    st().sigma = std::move(f.sigma_before);
    st().events.resize(f.events_mark);
    t.konts.resize(f.kont_depth);
    t.acts.resize(f.act_depth);
    t.acts.back().locals = std::move(f.locals_before);
    if (t.frames.empty()) {
      lock.reset();
      debug_check_sigma();
    }
    m.failures_.push_back("t" + std::to_string(t.id) + ":" + reason);
    ret(t, Value::fail(reason));
    if (m.opts_.after_abort) m.opts_.after_abort(m, t.id, reason);
  }

  void write(Thread& t, Loc r, int idx, Value v) {
    ObjectRec& o = obj(r);
    if (!t.frames.empty()) {
      TxFrame& f = t.frames.back();
      bool fresh = false;
      for (const auto& fr : t.frames)
        if (std::find(fr.created.begin(), fr.created.end(), r) != fr.created.end()) fresh = true;
      if (!fresh && !st().tree.inside(r, f.contract.invalidity))
        throw RuntimeFault(error("E-EFFECT", {}, "write to " + to_string(RtCtx::at(r)) +
                                                      " outside the invalidity set " +
                                                      to_string(f.contract.invalidity)));
      f.log.push_back({r, idx, o.fields[idx]});
    }
    o.fields[idx] = std::move(v);
    wr(r, idx);
    for (Loc a : st().tree.ancestors(r)) {
      st().sigma.erase(a);
      wr(a, kValidSlot);
    }
  }

  // ---- objects

  void instantiate(Thread& t, const ClassDecl* c, const std::vector<RtCtx>& ctx, std::vector<Value> args) {
    if (ctx.empty() || ctx[0].is_bot()) stuck("object without a usable owner");
    Loc l = make_loc(st().epoch, st().next_seq++);
    const ClassInfo& ci = info(c);
    ObjectRec o;
    o.cls = c;
    o.args = ctx;
    o.field_names = ci.names;
    for (const auto& [decl, fd] : ci.fields) {
      switch (fd->type.kind) {
        case TypeExpr::Kind::Int: o.fields.push_back(Value::int_(0)); break;
        case TypeExpr::Kind::Bool: o.fields.push_back(Value::bool_(false)); break;
        default: o.fields.push_back(Value::null()); break;
      }
    }
    st().tree.add(l, ctx[0]);
    st().heap.emplace(l, std::move(o));
    if (!t.frames.empty()) t.frames.back().created.push_back(l);
    std::size_t mark = t.allocated.size();
    t.allocated.push_back(l);
    start_init(t, l, 0, std::move(args), mark);
  }

  void start_init(Thread& t, Loc l, std::size_t pos, std::vector<Value> args, std::size_t mark) {
    ObjectRec& o = obj(l);
    const ClassInfo& ci = info(o.cls);
    for (; pos < ci.fields.size(); ++pos) {
      const auto& [decl, fd] = ci.fields[pos];
      if (!fd->init) continue;
      std::vector<RtCtx> code_args;
      for (const auto& step : ci.chain)
        if (step.decl == decl) code_args = resolve_step(step.args, l, o);
      t.acts.push_back(Activation{l, {}, decl, code_args});
      t.konts.push_back(k::Init{l, pos, std::move(args), mark});
      eval(t, fd->init);
      return;
    }
    if (!o.cls->ctors.empty()) {
      const CtorDecl& ctor = o.cls->ctors.front();
      Activation a{l, {}, o.cls, o.args};
      for (std::size_t i = 0; i < ctor.params.size(); ++i) a.locals[ctor.params[i].name] = args.at(i);
      t.acts.push_back(std::move(a));
      t.konts.push_back(k::CtorBody{l, mark});
      eval(t, ctor.body);
      return;
    }
    finish_ctor(t, l, mark);
  }

  void finish_ctor(Thread& t, Loc l, std::size_t mark) {
    std::vector<Loc> check{l};
    for (std::size_t i = mark + 1; i < t.allocated.size(); ++i) {
      Loc x = t.allocated[i];
      if (st().heap.count(x) && !st().sigma.count(x)) check.push_back(x);
    }
    for (Loc x : check) {
      ++ctr().post_checks;
      if (!eval_invariant(x)) {
        raise(t, kPostFail);
        return;
      }
    }
    for (Loc x : check) {
      st().sigma.insert(x);
      wr(x, kValidSlot);
    }
    ret(t, Value::ref_(l));
  }

  void invoke(Thread& t, const Value& recv, const std::string& name, std::vector<Value> args, Span s) {
    if (recv.is(Value::Kind::Null)) {
      raise(t, kNullDeref);
      return;
    }
    if (!recv.is(Value::Kind::Ref)) stuck("call on a non-object", s);
    Loc r = recv.ref;
    ObjectRec& o = obj(r);
    auto mi = m.table_.method(m.table_.self_type(*o.cls), name);
    if (!mi) stuck("no method '" + name + "' in " + o.cls->name, s);
    const MethodDecl& md = *mi->decl;
    if (md.params.size() != args.size()) stuck("arity mismatch calling '" + name + "'", s);
    Activation a{r, {}, mi->owner, resolve_step(mi->args, r, o)};
    for (std::size_t i = 0; i < args.size(); ++i) a.locals[md.params[i].name] = std::move(args[i]);
    if (m.opts_.naive) naive_checks(st().tree.subtree(RtCtx::at(r)), true);
    t.konts.push_back(k::Return{r});
    t.acts.push_back(std::move(a));
    eval(t, md.body);
  }

  // ---- stepping

  void step_expr(Thread& t) {
    ExprPtr e = t.expr;
    Span s = e->span;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, node::IntLit>) {
            ret(t, Value::int_(n.value));
          } else if constexpr (std::is_same_v<T, node::BoolLit>) {
            ret(t, Value::bool_(n.value));
          } else if constexpr (std::is_same_v<T, node::NullLit>) {
            ret(t, Value::null());
          } else if constexpr (std::is_same_v<T, node::UnitLit>) {
            ret(t, Value::unit());
          } else if constexpr (std::is_same_v<T, node::Var> || std::is_same_v<T, node::This>) {
            ret(t, value_of(t, e));
          } else if constexpr (std::is_same_v<T, node::New>) {
            const ClassDecl* c = m.table_.find(n.type.name);
            if (!c) stuck("unknown class '" + n.type.name + "'", s);
            std::vector<RtCtx> ctx;
            for (const auto& kk : n.type.args) ctx.push_back(resolve(t.acts.back(), kk));
            if (n.args.empty()) {
              instantiate(t, c, ctx, {});
            } else {
              t.konts.push_back(k::New{c, std::move(ctx), n.args, {}});
              eval(t, n.args[0]);
            }
          } else if constexpr (std::is_same_v<T, node::Assign>) {
            t.konts.push_back(k::Assign{n.name});
            eval(t, n.rhs);
          } else if constexpr (std::is_same_v<T, node::FieldGet>) {
            Value r = value_of(t, n.receiver);
            if (r.is(Value::Kind::Null)) return raise(t, kNullDeref);
            if (!r.is(Value::Kind::Ref)) stuck("field read on a non-object", s);
            ObjectRec& o = obj(r.ref);
            int idx = field_index(o, n.field);
            rd(r.ref, idx);
            ret(t, o.fields[idx]);
          } else if constexpr (std::is_same_v<T, node::FieldSet>) {
            Value r = value_of(t, n.receiver);
            if (r.is(Value::Kind::Null)) return raise(t, kNullDeref);
            if (!r.is(Value::Kind::Ref)) stuck("field write on a non-object", s);
            int idx = field_index(obj(r.ref), n.field);
            t.konts.push_back(k::FieldSet{r.ref, idx});
            eval(t, n.rhs);
          } else if constexpr (std::is_same_v<T, node::Call>) {
            Value r = value_of(t, n.receiver);
            if (n.args.empty()) {
              invoke(t, r, n.method, {}, s);
            } else {
              t.konts.push_back(k::Call{r, n.method, n.args, {}});
              eval(t, n.args[0]);
            }
          } else if constexpr (std::is_same_v<T, node::Seq>) {
            t.konts.push_back(k::Seq{n.second});
            eval(t, n.first);
          } else if constexpr (std::is_same_v<T, node::Atomic>) {
            RtContract d;
            if (n.contract) {
              d = {resolve(t.acts.back(), n.contract->validity), resolve(t.acts.back(), n.contract->invalidity)};
            } else if (const auto* c = n.body->template as<node::Call>(); c && is_value(c->receiver)) {
              Value r = value_of(t, c->receiver);
              if (r.is(Value::Kind::Null)) return raise(t, kNullDeref);
              if (!r.is(Value::Kind::Ref)) stuck("call on a non-object", s);
              d = method_contract(r.ref, c->method);
            } else if (const auto* f = n.body->template as<node::FieldSet>(); f && is_value(f->receiver)) {
              Value r = value_of(t, f->receiver);
              if (r.is(Value::Kind::Null)) return raise(t, kNullDeref);
              if (!r.is(Value::Kind::Ref)) stuck("field write on a non-object", s);
              d = {RtCtx::bot(), RtCtx::at(r.ref)};
            } else {
              stuck("atomic without a deducible contract", s);
            }
            begin(t, d, n.body);
          } else if constexpr (std::is_same_v<T, node::Fork>) {
            if (!t.frames.empty())
              throw RuntimeFault(error("E-FORK-IN-ATOMIC", s, "fork inside a live transaction"));
            Thread nt;
            nt.id = static_cast<int>(threads.size());
            nt.acts.push_back(t.acts.back());
            nt.expr = n.body;
            ret(t, Value::unit());
            threads.push_back(std::move(nt));
          } else if constexpr (std::is_same_v<T, node::Valid>) {
            Value r = value_of(t, n.target);
            if (r.is(Value::Kind::Null)) return raise(t, kNullDeref);
            if (!r.is(Value::Kind::Ref)) stuck("valid on a non-object", s);
            ret(t, Value::bool_(assert_valid(r.ref)));
          } else if constexpr (std::is_same_v<T, node::Require>) {
            t.konts.push_back(k::Require{});
            eval(t, n.cond);
          } else if constexpr (std::is_same_v<T, node::Emit>) {
            if (n.args.empty()) {
              st().events.push_back(n.event + "()");
              ret(t, Value::unit());
            } else {
              t.konts.push_back(k::Emit{n.event, n.args, {}});
              eval(t, n.args[0]);
            }
          } else if constexpr (std::is_same_v<T, node::Prim>) {
            t.konts.push_back(k::Prim{n.op, n.operands, {}});
            eval(t, n.operands[0]);
          } else {
            stuck("surface construct reached the interpreter", s);
          }
        },
        e->node);
  }

  void apply_kont(Thread& t) {
    Kont kont = std::move(t.konts.back());
    t.konts.pop_back();
    Value v = std::move(t.value);
    bool passes_fail = std::holds_alternative<k::Seq>(kont) || std::holds_alternative<k::Return>(kont) ||
                       std::holds_alternative<k::CtorBody>(kont);
    if (v.is(Value::Kind::Fail) && !passes_fail) {
      // The failure of an inner transaction is consumed here: it propagates as an abort.
      t.konts.push_back(std::move(kont));
      t.konts.pop_back();
      raise(t, v.reason);
      return;
    }
    std::visit(
        [&](auto& kk) {
          using T = std::decay_t<decltype(kk)>;
          if constexpr (std::is_same_v<T, k::Seq>) {
            eval(t, kk.second);
          } else if constexpr (std::is_same_v<T, k::Assign>) {
            t.acts.back().locals[kk.name] = std::move(v);
            ret(t, Value::unit());
          } else if constexpr (std::is_same_v<T, k::FieldSet>) {
            write(t, kk.target, kk.idx, std::move(v));
            ret(t, Value::unit());
          } else if constexpr (std::is_same_v<T, k::Call>) {
            kk.done.push_back(std::move(v));
            if (kk.done.size() < kk.args.size()) {
              ExprPtr next = kk.args[kk.done.size()];
              t.konts.push_back(std::move(kk));
              eval(t, next);
            } else {
              invoke(t, kk.recv, kk.method, std::move(kk.done), {});
            }
          } else if constexpr (std::is_same_v<T, k::New>) {
            kk.done.push_back(std::move(v));
            if (kk.done.size() < kk.args.size()) {
              ExprPtr next = kk.args[kk.done.size()];
              t.konts.push_back(std::move(kk));
              eval(t, next);
            } else {
              instantiate(t, kk.cls, kk.ctx, std::move(kk.done));
            }
          } else if constexpr (std::is_same_v<T, k::Prim>) {
            bool short_and = kk.op == PrimOp::And && v.is(Value::Kind::Bool) && !v.b;
            bool short_or = kk.op == PrimOp::Or && v.is(Value::Kind::Bool) && v.b;
            if (short_and || short_or) {
              ret(t, std::move(v));
              return;
            }
            kk.done.push_back(std::move(v));
            if (kk.done.size() < kk.operands.size()) {
              ExprPtr next = kk.operands[kk.done.size()];
              t.konts.push_back(std::move(kk));
              eval(t, next);
              return;
            }
            std::string err;
            auto r = prim(kk.op, kk.done, err);
            if (!r) {
              if (err == "div0") return raise(t, kDivZero);
              stuck(std::string("ill-typed operands for '") + spelling(kk.op) + "'");
            }
            ret(t, std::move(*r));
          } else if constexpr (std::is_same_v<T, k::Require>) {
            if (!v.is(Value::Kind::Bool)) stuck("require on a non-bool");
            if (!v.b) return raise(t, kRequire);
            ret(t, Value::unit());
          } else if constexpr (std::is_same_v<T, k::Emit>) {
            kk.done.push_back(std::move(v));
            if (kk.done.size() < kk.args.size()) {
              ExprPtr next = kk.args[kk.done.size()];
              t.konts.push_back(std::move(kk));
              eval(t, next);
              return;
            }
            std::string ev = kk.name + "(";
            for (std::size_t i = 0; i < kk.done.size(); ++i) ev += (i ? "," : "") + to_string(kk.done[i]);
            st().events.push_back(ev + ")");
            ret(t, Value::unit());
          } else if constexpr (std::is_same_v<T, k::Return>) {
            t.acts.pop_back();
            if (m.opts_.naive && st().heap.count(kk.self))
              naive_checks(st().tree.subtree(RtCtx::at(kk.self)), false);
            ret(t, std::move(v));
          } else if constexpr (std::is_same_v<T, k::Init>) {
            t.acts.pop_back();
            obj(kk.obj).fields[kk.pos] = std::move(v);
            wr(kk.obj, static_cast<int>(kk.pos));
            start_init(t, kk.obj, kk.pos + 1, std::move(kk.ctor_args), kk.mark);
          } else if constexpr (std::is_same_v<T, k::CtorBody>) {
            t.acts.pop_back();
            finish_ctor(t, kk.obj, kk.mark);
          } else if constexpr (std::is_same_v<T, k::InAtomic>) {
            commit(t, std::move(v));
          }
        },
        kont);
  }

  void step_thread(Thread& t) {
    if (!t.has_value) {
      step_expr(t);
    } else if (t.konts.empty()) {
      t.done = true;
    } else {
      apply_kont(t);
    }
  }

  int pick() {
    if (lock) return *lock;
    std::size_t n = threads.size();
    if (current < n && !threads[current].done && quantum_left > 0) {
      --quantum_left;
      return static_cast<int>(current);
    }
    for (std::size_t d = 1; d <= n; ++d) {
      std::size_t c = (current + d) % n;
      if (!threads[c].done) {
        current = c;
        quantum_left = rng() % 4;
        return static_cast<int>(c);
      }
    }
    return -1;
  }
};

Machine::Machine(const CoreProgram& p, RunOptions opts) : Machine(p, State{}, std::move(opts)) {}

Machine::Machine(const CoreProgram& p, State initial, RunOptions opts)
    : program_(p), table_(p.ast), opts_(std::move(opts)), state_(std::move(initial)) {
  impl_ = std::make_unique<Impl>(*this);
}

Machine::~Machine() = default;

void Machine::load_main() {
  Thread t;
  t.id = static_cast<int>(impl_->threads.size());
  t.acts.push_back(Activation{});
  t.expr = program_.ast.main ? program_.ast.main : make(node::UnitLit{});
  impl_->threads.push_back(std::move(t));
}

bool Machine::step() {
  int tid = impl_->pick();
  if (tid < 0) return false;
  ++steps_;
  last_stepped_ = tid;
  impl_->step_thread(impl_->threads[tid]);
  return true;
}

FinalReport Machine::run() {
  if (impl_->threads.empty()) load_main();
  FinalReport r;
  for (;;) {
    if (steps_ >= opts_.fuel) {
      bool live = false;
      for (const auto& t : impl_->threads) live = live || !t.done;
      if (live) {
        r.outcome = FinalReport::Outcome::FuelExhausted;
        break;
      }
    }
    if (!step()) break;
  }
  if (r.outcome == FinalReport::Outcome::Completed) {
    for (const auto& [l, o] : state_.heap) {
      ++state_.counters.post_checks;
      if (impl_->eval_invariant(l)) {
        state_.sigma.insert(l);
      } else {
        state_.sigma.erase(l);
        r.invalid.push_back(to_string(RtCtx::at(l)));
      }
    }
    r.lemma3 = state_.sigma.size() == state_.heap.size();
  }
  r.objects = state_.heap.size();
  r.valid = state_.sigma.size();
  r.counters = state_.counters;
  r.events = state_.events;
  r.state_hash = state_hash(state_);
  r.failures = failures_;
  r.steps = steps_;
  return r;
}

Value Machine::run_expr(const ExprPtr& e, std::map<std::string, Value> locals) {
  Thread t;
  int id = static_cast<int>(impl_->threads.size());
  t.id = id;
  Activation a;
  a.locals = std::move(locals);
  t.acts.push_back(std::move(a));
  t.expr = e;
  impl_->threads.push_back(std::move(t));
  while (step()) {
    if (steps_ >= opts_.fuel) throw RuntimeFault(error("E-FUEL", {}, "step budget exhausted"));
  }
  return impl_->threads[id].value;
}

bool Machine::eval_invariant(Loc l) { return impl_->eval_invariant(l); }
bool Machine::assert_valid(Loc l) { return impl_->assert_valid(l); }
bool Machine::lock_held() const { return impl_->lock.has_value(); }
int Machine::lock_holder() const { return impl_->lock ? *impl_->lock : -1; }
std::size_t Machine::thread_count() const { return impl_->threads.size(); }

RtContract Machine::method_contract(Loc target, const std::string& method) const {
  return impl_->method_contract(target, method);
}

}  // namespace ov
