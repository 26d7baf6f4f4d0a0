#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace ov {

using BigInt = boost::multiprecision::cpp_int;

struct Span {
  int line = 0;
  int col = 0;
};

// Ownership contexts as written in source. Runtime locations live in heap.hpp.
enum class CtxKind { Param, This, Top, Bot, Any, Existential };

struct Context {
  CtxKind kind = CtxKind::Top;
  std::string name;  // only for Param

  static Context param(std::string n) { return {CtxKind::Param, std::move(n)}; }
  static Context this_() { return {CtxKind::This, {}}; }
  static Context top() { return {CtxKind::Top, {}}; }
  static Context bot() { return {CtxKind::Bot, {}}; }
  static Context any() { return {CtxKind::Any, {}}; }
  static Context existential() { return {CtxKind::Existential, {}}; }

  bool is(CtxKind k) const { return kind == k; }
  friend bool operator==(const Context&, const Context&) = default;
  friend auto operator<=>(const Context&, const Context&) = default;
};

std::string to_string(const Context& c);

// <V, I>: V must be valid on entry, I may be invalidated by the body.
struct Contract {
  Context validity;
  Context invalidity;
  friend bool operator==(const Contract&, const Contract&) = default;
};

std::string to_string(const Contract& c);

struct TypeExpr {
  // Void, Null and Error never appear in declarations other than method results.
  enum class Kind { Class, Int, Bool, Void, Null, Error };
  Kind kind = Kind::Error;
  std::string name;  // class name; for Int the source spelling (int, uint, uint256)
  std::vector<Context> args;

  static TypeExpr int_(std::string spelling = "int") { return {Kind::Int, std::move(spelling), {}}; }
  static TypeExpr bool_() { return {Kind::Bool, "bool", {}}; }
  static TypeExpr void_() { return {Kind::Void, "void", {}}; }
  static TypeExpr null_() { return {Kind::Null, "null", {}}; }
  static TypeExpr error() { return {Kind::Error, "<error>", {}}; }
  static TypeExpr cls(std::string n, std::vector<Context> a) {
    return {Kind::Class, std::move(n), std::move(a)};
  }

  bool is_class() const { return kind == Kind::Class; }
  const Context& owner() const { return args.front(); }
  friend bool operator==(const TypeExpr&, const TypeExpr&) = default;
};

// Equality that ignores integer spellings.
bool same_type(const TypeExpr& a, const TypeExpr& b);
std::string to_string(const TypeExpr& t);

struct Expr;

// Shared immutable node pointer with structural equality.
class ExprPtr {
 public:
  ExprPtr() = default;
  ExprPtr(std::shared_ptr<const Expr> p) : p_(std::move(p)) {}

  const Expr& operator*() const { return *p_; }
  const Expr* operator->() const { return p_.get(); }
  const Expr* get() const { return p_.get(); }
  explicit operator bool() const { return p_ != nullptr; }

  friend bool operator==(const ExprPtr& a, const ExprPtr& b);

 private:
  std::shared_ptr<const Expr> p_;
};

enum class PrimOp { Add, Sub, Mul, Div, Mod, Neg, Lt, Le, Gt, Ge, Eq, Ne, And, Or, Not };

const char* spelling(PrimOp op);
bool is_unary(PrimOp op);

namespace node {
struct IntLit {
  BigInt value;
  std::string spelling;
  friend bool operator==(const IntLit&, const IntLit&) = default;
};
struct BoolLit {
  bool value;
  friend bool operator==(const BoolLit&, const BoolLit&) = default;
};
struct NullLit {
  friend bool operator==(const NullLit&, const NullLit&) = default;
};
struct UnitLit {
  friend bool operator==(const UnitLit&, const UnitLit&) = default;
};
struct Var {
  std::string name;
  friend bool operator==(const Var&, const Var&) = default;
};
struct This {
  friend bool operator==(const This&, const This&) = default;
};
struct New {
  TypeExpr type;
  std::vector<ExprPtr> args;
  friend bool operator==(const New&, const New&) = default;
};
// x = e, or T x = e when declared is set.
struct Assign {
  std::string name;
  std::optional<TypeExpr> declared;
  ExprPtr rhs;
  friend bool operator==(const Assign&, const Assign&) = default;
};
struct FieldGet {
  ExprPtr receiver;
  std::string field;
  friend bool operator==(const FieldGet&, const FieldGet&) = default;
};
struct FieldSet {
  ExprPtr receiver;
  std::string field;
  ExprPtr rhs;
  friend bool operator==(const FieldSet&, const FieldSet&) = default;
};
struct Call {
  ExprPtr receiver;
  std::string method;
  std::vector<ExprPtr> args;
  friend bool operator==(const Call&, const Call&) = default;
};
struct Seq {
  ExprPtr first;
  ExprPtr second;
  friend bool operator==(const Seq&, const Seq&) = default;
};
struct Atomic {
  std::optional<Contract> contract;
  ExprPtr body;
  friend bool operator==(const Atomic&, const Atomic&) = default;
};
struct Fork {
  ExprPtr body;
  friend bool operator==(const Fork&, const Fork&) = default;
};
struct Valid {
  ExprPtr target;
  friend bool operator==(const Valid&, const Valid&) = default;
};
struct Require {
  ExprPtr cond;
  friend bool operator==(const Require&, const Require&) = default;
};
struct Emit {
  std::string event;
  std::vector<ExprPtr> args;
  friend bool operator==(const Emit&, const Emit&) = default;
};
struct Prim {
  PrimOp op;
  std::vector<ExprPtr> operands;
  friend bool operator==(const Prim&, const Prim&) = default;
};
// Surface only: removed by desugar.
struct OpAssign {
  ExprPtr target;
  PrimOp op;
  ExprPtr rhs;
  friend bool operator==(const OpAssign&, const OpAssign&) = default;
};
struct Throw {
  friend bool operator==(const Throw&, const Throw&) = default;
};
}  // namespace node

using ExprNode = std::variant<node::IntLit, node::BoolLit, node::NullLit, node::UnitLit, node::Var,
                              node::This, node::New, node::Assign, node::FieldGet, node::FieldSet,
                              node::Call, node::Seq, node::Atomic, node::Fork, node::Valid,
                              node::Require, node::Emit, node::Prim, node::OpAssign, node::Throw>;

struct Expr {
  ExprNode node;
  Span span;

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(node);
  }
};

template <typename T>
ExprPtr make(T n, Span s = {}) {
  return ExprPtr(std::make_shared<const Expr>(Expr{ExprNode(std::move(n)), s}));
}

ExprPtr int_lit(const BigInt& v, Span s = {});
ExprPtr seq(ExprPtr a, ExprPtr b, Span s = {});

enum class Relation { Strict, NonStrict };  // << and <=

struct WhereConstraint {
  Context lhs;
  Relation rel;
  Context rhs;
  friend bool operator==(const WhereConstraint&, const WhereConstraint&) = default;
};

struct FieldDecl {
  bool is_final = false;
  TypeExpr type;
  std::string name;
  ExprPtr init;  // may be empty
  Span span;
  friend bool operator==(const FieldDecl& a, const FieldDecl& b) {
    return a.is_final == b.is_final && a.type == b.type && a.name == b.name && a.init == b.init;
  }
};

struct Param {
  TypeExpr type;
  std::string name;
  friend bool operator==(const Param&, const Param&) = default;
};

struct MethodDecl {
  TypeExpr ret;
  std::string name;
  std::vector<Param> params;
  Contract contract;
  ExprPtr body;
  std::string doc;  // raw /** */ text, empty if none
  Span span;
  friend bool operator==(const MethodDecl& a, const MethodDecl& b) {
    return a.ret == b.ret && a.name == b.name && a.params == b.params &&
           a.contract == b.contract && a.body == b.body && a.doc == b.doc;
  }
};

struct CtorDecl {
  std::vector<Param> params;
  ExprPtr body;
  std::string doc;
  Span span;
  friend bool operator==(const CtorDecl& a, const CtorDecl& b) {
    return a.params == b.params && a.body == b.body && a.doc == b.doc;
  }
};

struct ClassDecl {
  std::string name;
  std::vector<std::string> formals;  // formals[0] is the owner
  std::optional<TypeExpr> superclass;
  std::vector<WhereConstraint> where;
  std::vector<FieldDecl> fields;
  ExprPtr invariant;  // may be empty: always valid
  std::string inv_doc;
  Span inv_span;
  std::vector<MethodDecl> methods;
  std::vector<CtorDecl> ctors;
  std::string doc;
  Span span;

  friend bool operator==(const ClassDecl& a, const ClassDecl& b) {
    return a.name == b.name && a.formals == b.formals && a.superclass == b.superclass &&
           a.where == b.where && a.fields == b.fields && a.invariant == b.invariant &&
           a.inv_doc == b.inv_doc && a.methods == b.methods && a.ctors == b.ctors &&
           a.doc == b.doc;
  }
};

struct Program {
  std::vector<ClassDecl> classes;
  ExprPtr main;  // may be empty
  friend bool operator==(const Program&, const Program&) = default;

  const ClassDecl* find_class(const std::string& n) const;
};

// Output of desugar: no OpAssign/Throw, no bare field names, value receivers.
struct CoreProgram {
  Program ast;
  friend bool operator==(const CoreProgram&, const CoreProgram&) = default;
};

}  // namespace ov
