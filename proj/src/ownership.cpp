#include "ov/ownership.hpp"

#include <algorithm>
#include <deque>

namespace ov {

ContextEnv ContextEnv::for_class(const ClassDecl& c) {
  return {c.formals, c.where, c.name, true};
}

ContextEnv ContextEnv::for_main() { return {{}, {}, "", false}; }

bool ContextEnv::declares(const std::string& formal) const {
  for (const auto& f : formals)
    if (f == formal) return true;
  return false;
}

bool ctx_wf(const ContextEnv& env, const Context& k) {
  switch (k.kind) {
    case CtxKind::Top:
    case CtxKind::Bot: return true;
    case CtxKind::This: return env.has_this;
    case CtxKind::Param: return env.declares(k.name);
    default: return false;
  }
}

namespace {

struct Edge {
  Context to;
  bool strict;
};

std::vector<Edge> successors(const ContextEnv& env, const Context& k) {
  std::vector<Edge> out;
  // Implicit Bot <= k <= Top edges, needed when a constraint mentions top or bot.
  if (!k.is(CtxKind::Top)) out.push_back({Context::top(), false});
  if (k.is(CtxKind::Bot)) {
    if (env.has_this) out.push_back({Context::this_(), false});
    for (const auto& f : env.formals) out.push_back({Context::param(f), false});
  }
  if (k.is(CtxKind::This) && env.has_this && !env.formals.empty())
    out.push_back({Context::param(env.formals[0]), true});
  for (const auto& w : env.constraints)
    if (w.lhs == k) out.push_back({w.rhs, w.rel == Relation::Strict});
  return out;
}

// Reachability over (context, used-a-strict-step) states.
bool reach(const ContextEnv& env, const Context& from, const Context& to, bool need_strict) {
  std::set<std::pair<Context, bool>> seen;
  std::deque<std::pair<Context, bool>> work{{from, false}};
  while (!work.empty()) {
    auto [k, strict] = work.front();
    work.pop_front();
    if (!seen.insert({k, strict}).second) continue;
    if (k == to && (strict || !need_strict)) return true;
    for (const auto& e : successors(env, k)) work.push_back({e.to, strict || e.strict});
  }
  return false;
}

}  // namespace

bool inside(const ContextEnv& env, const Context& k, const Context& k2) {
  if (k2.is(CtxKind::Top) || k.is(CtxKind::Bot)) return true;
  if (!ctx_wf(env, k) || !ctx_wf(env, k2)) return false;
  return reach(env, k, k2, false);
}

bool strictly_inside(const ContextEnv& env, const Context& k, const Context& k2) {
  if (!ctx_wf(env, k) || !ctx_wf(env, k2)) return false;
  if (k == k2) return reach(env, k, k2, true);
  if (k2.is(CtxKind::Top) || k.is(CtxKind::Bot)) return true;
  return reach(env, k, k2, true);
}

Context substitute(const Context& k, const std::vector<std::string>& formals,
                   const std::vector<Context>& actuals, const Context& this_image) {
  if (k.is(CtxKind::This)) return this_image;
  if (k.is(CtxKind::Param)) {
    for (size_t i = 0; i < formals.size(); ++i)
      if (formals[i] == k.name) return actuals[i];
  }
  return k;
}

namespace {
void check_arity(const std::vector<std::string>& formals, const std::vector<Context>& actuals) {
  if (formals.size() != actuals.size())
    throw DiagnosticError(error("E-CTX-ARITY", {},
                                "expected " + std::to_string(formals.size()) +
                                    " context arguments, got " + std::to_string(actuals.size())));
}
}  // namespace

TypeExpr substitute(const TypeExpr& t, const std::vector<std::string>& formals,
                    const std::vector<Context>& actuals, const Context& this_image) {
  check_arity(formals, actuals);
  if (!t.is_class()) return t;
  TypeExpr out = t;
  for (auto& a : out.args) a = substitute(a, formals, actuals, this_image);
  return out;
}

Contract substitute(const Contract& c, const std::vector<std::string>& formals,
                    const std::vector<Context>& actuals, const Context& this_image) {
  check_arity(formals, actuals);
  return {substitute(c.validity, formals, actuals, this_image),
          substitute(c.invalidity, formals, actuals, this_image)};
}

Context owner_bound(const TypeExpr& t) {
  if (!t.is_class() || t.args.empty())
    throw DiagnosticError(error("E-NOT-CLASS", {}, "'" + to_string(t) + "' is not a class type"));
  return t.owner();
}

std::string to_string(const RtCtx& k) {
  switch (k.kind) {
    case RtCtx::Kind::Top: return "top";
    case RtCtx::Kind::Bot: return "bot";
    case RtCtx::Kind::Loc: break;
  }
  std::uint32_t epoch = static_cast<std::uint32_t>(k.loc >> 32);
  std::uint32_t seq = static_cast<std::uint32_t>(k.loc);
  return epoch == 0 ? "l" + std::to_string(seq)
                    : "l" + std::to_string(epoch) + "." + std::to_string(seq);
}

void OwnershipTree::add(Loc l, RtCtx owner) {
  if (owner_.count(l)) throw std::logic_error("owner of " + to_string(RtCtx::at(l)) + " is already fixed");
  if (owner.is_bot()) throw std::logic_error("bot cannot own an object");
  if (owner.is_loc() && !contains(owner.loc))
    throw DiagnosticError(error("E-DANGLING", {}, "owner " + to_string(owner) + " is not allocated"));
  owner_[l] = owner;
  if (owner.is_loc()) children_[owner.loc].insert(l);
}

void OwnershipTree::remove(Loc l) {
  auto it = owner_.find(l);
  if (it == owner_.end()) return;
  if (auto c = children_.find(l); c != children_.end() && !c->second.empty())
    throw std::logic_error("cannot remove an owner before its children");
  if (it->second.is_loc()) children_[it->second.loc].erase(l);
  children_.erase(l);
  owner_.erase(it);
}

RtCtx OwnershipTree::owner_of(Loc l) const {
  auto it = owner_.find(l);
  if (it == owner_.end())
    throw DiagnosticError(error("E-DANGLING", {}, "location " + to_string(RtCtx::at(l)) + " is not allocated"));
  return it->second;
}

bool OwnershipTree::inside(Loc l, RtCtx k) const {
  if (k.is_bot()) {
    owner_of(l);
    return false;
  }
  RtCtx cur = RtCtx::at(l);
  owner_of(l);
  while (cur.is_loc()) {
    if (k.is_loc() && cur.loc == k.loc) return true;
    cur = owner_of(cur.loc);
  }
  return k.is_top();
}

std::vector<Loc> OwnershipTree::subtree(RtCtx k) const {
  std::vector<Loc> out;
  if (k.is_bot()) return out;
  if (k.is_top()) return locations();
  if (!contains(k.loc)) return out;
  std::vector<Loc> work{k.loc};
  while (!work.empty()) {
    Loc l = work.back();
    work.pop_back();
    out.push_back(l);
    if (auto c = children_.find(l); c != children_.end())
      for (Loc ch : c->second) work.push_back(ch);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Loc> OwnershipTree::ancestors(Loc l) const {
  std::vector<Loc> out;
  RtCtx cur = RtCtx::at(l);
  while (cur.is_loc()) {
    out.push_back(cur.loc);
    cur = owner_of(cur.loc);
  }
  return out;
}

std::vector<Loc> OwnershipTree::locations() const {
  std::vector<Loc> out;
  out.reserve(owner_.size());
  for (const auto& [l, _] : owner_) out.push_back(l);
  return out;
}

}  // namespace ov
