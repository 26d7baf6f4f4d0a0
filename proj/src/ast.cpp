#include "ov/ast.hpp"

namespace ov {

std::string to_string(const Context& c) {
  switch (c.kind) {
    case CtxKind::Param: return c.name;
    case CtxKind::This: return "this";
    case CtxKind::Top: return "top";
    case CtxKind::Bot: return "bot";
    case CtxKind::Any: return "*";
    case CtxKind::Existential: return "?";
  }
  return "?";
}

std::string to_string(const Contract& c) {
  return "<" + to_string(c.validity) + "," + to_string(c.invalidity) + ">";
}

bool same_type(const TypeExpr& a, const TypeExpr& b) {
  if (a.kind != b.kind) return false;
  if (a.kind != TypeExpr::Kind::Class) return true;
  return a.name == b.name && a.args == b.args;
}

std::string to_string(const TypeExpr& t) {
  if (t.kind != TypeExpr::Kind::Class) return t.name;
  std::string s = t.name;
  if (!t.args.empty()) {
    s += "<";
    for (size_t i = 0; i < t.args.size(); ++i) {
      if (i) s += ",";
      s += to_string(t.args[i]);
    }
    s += ">";
  }
  return s;
}

bool operator==(const ExprPtr& a, const ExprPtr& b) {
  if (a.p_ == b.p_) return true;
  if (!a.p_ || !b.p_) return false;
  return a.p_->node == b.p_->node;
}

const char* spelling(PrimOp op) {
  switch (op) {
    case PrimOp::Add: return "+";
    case PrimOp::Sub: return "-";
    case PrimOp::Mul: return "*";
    case PrimOp::Div: return "/";
    case PrimOp::Mod: return "%";
    case PrimOp::Neg: return "-";
    case PrimOp::Lt: return "<";
    case PrimOp::Le: return "<=";
    case PrimOp::Gt: return ">";
    case PrimOp::Ge: return ">=";
    case PrimOp::Eq: return "==";
    case PrimOp::Ne: return "!=";
    case PrimOp::And: return "&&";
    case PrimOp::Or: return "||";
    case PrimOp::Not: return "!";
  }
  return "?";
}

bool is_unary(PrimOp op) { return op == PrimOp::Neg || op == PrimOp::Not; }

ExprPtr int_lit(const BigInt& v, Span s) {
  return make(node::IntLit{v, v.str()}, s);
}

ExprPtr seq(ExprPtr a, ExprPtr b, Span s) { return make(node::Seq{std::move(a), std::move(b)}, s); }

const ClassDecl* Program::find_class(const std::string& n) const {
  for (const auto& c : classes)
    if (c.name == n) return &c;
  return nullptr;
}

}  // namespace ov
