#include "ov/printer.hpp"

#include <sstream>

namespace ov {
namespace {

// Binding strength; higher binds tighter.
enum Prec { kStmt = 0, kOr = 1, kAnd, kEq, kRel, kAdd, kMul, kUnary, kPrimary };

int prec_of(PrimOp op) {
  switch (op) {
    case PrimOp::Or: return kOr;
    case PrimOp::And: return kAnd;
    case PrimOp::Eq:
    case PrimOp::Ne: return kEq;
    case PrimOp::Lt:
    case PrimOp::Le:
    case PrimOp::Gt:
    case PrimOp::Ge: return kRel;
    case PrimOp::Add:
    case PrimOp::Sub: return kAdd;
    case PrimOp::Mul:
    case PrimOp::Div:
    case PrimOp::Mod: return kMul;
    case PrimOp::Neg:
    case PrimOp::Not: return kUnary;
  }
  return kPrimary;
}

std::string pad(int depth) { return std::string(4 * depth, ' '); }

class Printer {
 public:
  std::string program(const Program& p) {
    for (size_t i = 0; i < p.classes.size(); ++i) {
      if (i) out_ << "\n";
      cls(p.classes[i]);
    }
    if (p.main) {
      if (!p.classes.empty()) out_ << "\n";
      out_ << "main ";
      block(p.main, 0);
      out_ << "\n";
    }
    return out_.str();
  }

  std::string expr_only(const ExprPtr& e) {
    out_ << expr(e, kStmt, 0);
    return out_.str();
  }

 private:
  void doc(const std::string& d, int depth) {
    if (d.empty()) return;
    std::istringstream in(d);
    std::string line;
    while (std::getline(in, line)) out_ << pad(depth) << line << "\n";
  }

  void cls(const ClassDecl& c) {
    doc(c.doc, 0);
    out_ << "class " << c.name << "[";
    for (size_t i = 0; i < c.formals.size(); ++i) out_ << (i ? ", " : "") << c.formals[i];
    out_ << "]";
    if (c.superclass) out_ << " extends " << to_string(*c.superclass);
    for (size_t i = 0; i < c.where.size(); ++i) {
      const auto& w = c.where[i];
      out_ << (i ? ", " : " where ") << to_string(w.lhs)
           << (w.rel == Relation::Strict ? " << " : " <= ") << to_string(w.rhs);
    }
    out_ << " {\n";
    for (const auto& f : c.fields) {
      out_ << pad(1) << (f.is_final ? "final " : "") << to_string(f.type) << " " << f.name;
      if (f.init) out_ << " = " << expr(f.init, kStmt, 1);
      out_ << ";\n";
    }
    if (c.invariant) {
      doc(c.inv_doc, 1);
      out_ << pad(1) << "inv " << expr(c.invariant, kStmt, 1) << ";\n";
    }
    for (const auto& k : c.ctors) {
      doc(k.doc, 1);
      out_ << pad(1) << c.name;
      params(k.params);
      out_ << " ";
      block(k.body, 1);
      out_ << "\n";
    }
    for (const auto& m : c.methods) {
      doc(m.doc, 1);
      out_ << pad(1) << to_string(m.ret) << " " << m.name;
      params(m.params);
      out_ << " " << to_string(m.contract) << " ";
      block(m.body, 1);
      out_ << "\n";
    }
    out_ << "}\n";
  }

  void params(const std::vector<Param>& ps) {
    out_ << "(";
    for (size_t i = 0; i < ps.size(); ++i)
      out_ << (i ? ", " : "") << to_string(ps[i].type) << " " << ps[i].name;
    out_ << ")";
  }

  void block(const ExprPtr& e, int depth) { out_ << block_text(e, depth); }

  // "{\n stmts \n}" with the closing brace at depth.
  std::string block_text(const ExprPtr& e, int depth) {
    if (e->is<node::UnitLit>()) return "{\n" + pad(depth) + "}";
    std::string s = "{\n";
    ExprPtr cur = e;
    for (;;) {
      const auto* sq = cur->as<node::Seq>();
      ExprPtr stmt = sq ? sq->first : cur;
      s += pad(depth + 1) + statement(stmt, depth + 1) + ";\n";
      if (!sq) break;
      cur = sq->second;
    }
    return s + pad(depth) + "}";
  }

  std::string statement(const ExprPtr& e, int depth) {
    if (const auto* a = e->as<node::Assign>(); a && a->declared)
      return to_string(*a->declared) + " " + a->name + " = " + expr(a->rhs, kStmt, depth);
    // Seq in statement position must stay grouped.
    if (e->is<node::Seq>()) return block_text(e, depth);
    return expr(e, kStmt, depth);
  }

  std::string list(const std::vector<ExprPtr>& es, int depth) {
    std::string s = "(";
    for (size_t i = 0; i < es.size(); ++i) s += (i ? ", " : "") + expr(es[i], kStmt, depth);
    return s + ")";
  }

  std::string paren_if(bool p, std::string s) { return p ? "(" + s + ")" : s; }

  std::string body(const ExprPtr& e, int depth) {
    if (e->is<node::Seq>() || e->is<node::UnitLit>()) return block_text(e, depth);
    return expr(e, kStmt, depth);
  }

  std::string expr(const ExprPtr& e, int need, int depth) {
    return std::visit(
        [&](const auto& n) -> std::string {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, node::IntLit>) {
            return n.spelling.empty() ? n.value.str() : n.spelling;
          } else if constexpr (std::is_same_v<T, node::BoolLit>) {
            return n.value ? "true" : "false";
          } else if constexpr (std::is_same_v<T, node::NullLit>) {
            return "null";
          } else if constexpr (std::is_same_v<T, node::UnitLit>) {
            return "{}";
          } else if constexpr (std::is_same_v<T, node::Var>) {
            return n.name;
          } else if constexpr (std::is_same_v<T, node::This>) {
            return "this";
          } else if constexpr (std::is_same_v<T, node::New>) {
            return "new " + to_string(n.type) + list(n.args, depth);
          } else if constexpr (std::is_same_v<T, node::Assign>) {
            std::string s = n.name + " = " + expr(n.rhs, kStmt, depth);
            if (n.declared) s = to_string(*n.declared) + " " + s;
            return paren_if(need > kStmt, s);
          } else if constexpr (std::is_same_v<T, node::FieldGet>) {
            return expr(n.receiver, kPrimary, depth) + "." + n.field;
          } else if constexpr (std::is_same_v<T, node::FieldSet>) {
            return paren_if(need > kStmt, expr(n.receiver, kPrimary, depth) + "." + n.field +
                                              " = " + expr(n.rhs, kStmt, depth));
          } else if constexpr (std::is_same_v<T, node::Call>) {
            return expr(n.receiver, kPrimary, depth) + "." + n.method + list(n.args, depth);
          } else if constexpr (std::is_same_v<T, node::Seq>) {
            return block_text(e, depth);
          } else if constexpr (std::is_same_v<T, node::Atomic>) {
            std::string s = "atomic ";
            if (n.contract) s += to_string(*n.contract) + " ";
            return paren_if(need > kStmt, s + body(n.body, depth));
          } else if constexpr (std::is_same_v<T, node::Fork>) {
            return paren_if(need > kStmt, "fork " + body(n.body, depth));
          } else if constexpr (std::is_same_v<T, node::Valid>) {
            return paren_if(need > kUnary, "valid " + expr(n.target, kUnary, depth));
          } else if constexpr (std::is_same_v<T, node::Require>) {
            return "require(" + expr(n.cond, kStmt, depth) + ")";
          } else if constexpr (std::is_same_v<T, node::Emit>) {
            return "emit " + n.event + list(n.args, depth);
          } else if constexpr (std::is_same_v<T, node::Prim>) {
            int p = prec_of(n.op);
            if (is_unary(n.op))
              return paren_if(need > p, std::string(spelling(n.op)) + expr(n.operands[0], kUnary, depth));
            return paren_if(need > p, expr(n.operands[0], p, depth) + " " + spelling(n.op) + " " +
                                          expr(n.operands[1], p + 1, depth));
          } else if constexpr (std::is_same_v<T, node::OpAssign>) {
            return paren_if(need > kStmt, expr(n.target, kPrimary, depth) + " " + spelling(n.op) +
                                              "= " + expr(n.rhs, kStmt, depth));
          } else {
            return "throw";
          }
        },
        e->node);
  }

  std::ostringstream out_;
};

}  // namespace

std::string pretty_print(const Program& p) { return Printer().program(p); }
std::string pretty_print(const CoreProgram& p) { return pretty_print(p.ast); }
std::string pretty_print(const ExprPtr& e) { return Printer().expr_only(e); }

}  // namespace ov
