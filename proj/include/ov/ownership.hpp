#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ov/ast.hpp"
#include "ov/diagnostic.hpp"

namespace ov {

// ---- static side

struct ContextEnv {
  std::vector<std::string> formals;  // formals[0] owns This
  std::vector<WhereConstraint> constraints;
  std::string class_name;  // empty for main
  bool has_this = true;

  static ContextEnv for_class(const ClassDecl& c);
  static ContextEnv for_main();
  bool declares(const std::string& formal) const;
};

bool ctx_wf(const ContextEnv& env, const Context& k);
// Least preorder with Bot <= k <= Top, This < formals[0], and the where-constraints.
bool inside(const ContextEnv& env, const Context& k, const Context& k2);
// inside via a path that uses at least one strict step (This < owner or <<).
bool strictly_inside(const ContextEnv& env, const Context& k, const Context& k2);

// Replace formals positionally and This by this_image. Throws E-CTX-ARITY.
TypeExpr substitute(const TypeExpr& t, const std::vector<std::string>& formals,
                    const std::vector<Context>& actuals, const Context& this_image);
Contract substitute(const Contract& c, const std::vector<std::string>& formals,
                    const std::vector<Context>& actuals, const Context& this_image);
Context substitute(const Context& k, const std::vector<std::string>& formals,
                   const std::vector<Context>& actuals, const Context& this_image);

// First context argument. Throws E-NOT-CLASS for base types.
Context owner_bound(const TypeExpr& t);

// ---- runtime side

// High 32 bits: epoch (0 = main/deploy, k+1 = k-th block transaction); low 32: sequence.
using Loc = std::uint64_t;

inline Loc make_loc(std::uint32_t epoch, std::uint32_t seq) {
  return (static_cast<Loc>(epoch) << 32) | seq;
}

struct RtCtx {
  enum class Kind { Top, Bot, Loc };
  Kind kind = Kind::Top;
  Loc loc = 0;

  static RtCtx top() { return {Kind::Top, 0}; }
  static RtCtx bot() { return {Kind::Bot, 0}; }
  static RtCtx at(Loc l) { return {Kind::Loc, l}; }
  bool is_top() const { return kind == Kind::Top; }
  bool is_bot() const { return kind == Kind::Bot; }
  bool is_loc() const { return kind == Kind::Loc; }
  friend bool operator==(const RtCtx&, const RtCtx&) = default;
};

std::string to_string(const RtCtx& k);

class OwnershipTree {
 public:
  // Owner is fixed here and never changes. Owner must be Top or a live location.
  void add(Loc l, RtCtx owner);
  // Only used to roll back allocations of an aborted transaction; l must be a leaf.
  void remove(Loc l);

  bool contains(Loc l) const { return owner_.count(l) != 0; }
  RtCtx owner_of(Loc l) const;  // E-DANGLING
  bool inside(Loc l, RtCtx k) const;  // E-DANGLING
  std::vector<Loc> subtree(RtCtx k) const;  // ascending
  // l and all its owners up to Top, innermost first.
  std::vector<Loc> ancestors(Loc l) const;
  std::vector<Loc> locations() const;
  size_t size() const { return owner_.size(); }

 private:
  std::map<Loc, RtCtx> owner_;
  std::map<Loc, std::set<Loc>> children_;
};

}  // namespace ov
