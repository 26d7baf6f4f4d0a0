#include "ov/transpile.hpp"

#include <sstream>

namespace ov {

namespace {

[[noreturn]] void bad_ctx(Span s, const std::string& msg) { throw DiagnosticError(error("E-TRANSPILE-CTX", s, msg)); }
[[noreturn]] void bad_expr(Span s, const std::string& msg) {
  throw DiagnosticError(error("E-TRANSPILE-EXPR", s, msg));
}

int precedence(PrimOp op) {
  switch (op) {
    case PrimOp::Or: return 1;
    case PrimOp::And: return 2;
    case PrimOp::Eq:
    case PrimOp::Ne: return 3;
    case PrimOp::Lt:
    case PrimOp::Le:
    case PrimOp::Gt:
    case PrimOp::Ge: return 4;
    case PrimOp::Add:
    case PrimOp::Sub: return 5;
    case PrimOp::Mul:
    case PrimOp::Div:
    case PrimOp::Mod: return 6;
    default: return 7;
  }
}

std::string sol_type(const TypeExpr& t, Span s) {
  switch (t.kind) {
    case TypeExpr::Kind::Int: return t.name == "int" ? "int256" : t.name;
    case TypeExpr::Kind::Bool: return "bool";
    case TypeExpr::Kind::Class: return t.name;
    default: bad_expr(s, "type '" + to_string(t) + "' has no Solidity counterpart");
  }
}

std::string params(const std::vector<Param>& ps, Span s) {
  std::string out;
  for (std::size_t i = 0; i < ps.size(); ++i) out += (i ? ", " : "") + sol_type(ps[i].type, s) + " " + ps[i].name;
  return out;
}

class ExprWriter {
 public:
  std::string expr(const ExprPtr& e, int ctx_prec = 0) {
    Span s = e->span;
    if (const auto* n = e->as<node::IntLit>()) return n->spelling.empty() ? n->value.str() : n->spelling;
    if (const auto* n = e->as<node::BoolLit>()) return n->value ? "true" : "false";
    if (e->is<node::NullLit>()) return "address(0)";
    if (e->is<node::This>()) return "this";
    if (const auto* n = e->as<node::Var>()) return n->name;
    if (const auto* n = e->as<node::New>()) return "new " + n->type.name + "(" + args(n->args) + ")";
    if (const auto* n = e->as<node::FieldGet>()) {
      if (!n->receiver->is<node::This>()) bad_expr(s, "field '" + n->field + "' is read through another contract");
      return n->field;
    }
    if (const auto* n = e->as<node::Call>()) {
      std::string callee = n->method + "(" + args(n->args) + ")";
      if (n->receiver->is<node::This>()) return callee;
      return expr(n->receiver, 8) + "." + callee;
    }
    if (const auto* n = e->as<node::Valid>()) return expr(n->target, 8) + ".isValid()";
    if (const auto* n = e->as<node::Require>()) return "require(" + expr(n->cond) + ")";
    if (e->is<node::Throw>()) return "revert()";
    if (const auto* n = e->as<node::Emit>()) return "emit " + n->event + "(" + args(n->args) + ")";
    if (const auto* n = e->as<node::Prim>()) {
      int p = precedence(n->op);
      std::string out;
      if (is_unary(n->op))
        out = std::string(spelling(n->op)) + expr(n->operands[0], p);
      else
        out = expr(n->operands[0], p) + " " + spelling(n->op) + " " + expr(n->operands[1], p + 1);
      return p < ctx_prec ? "(" + out + ")" : out;
    }
    if (const auto* n = e->as<node::Assign>()) {
      std::string lhs = n->declared ? sol_type(*n->declared, s) + " " + n->name : n->name;
      return lhs + " = " + expr(n->rhs);
    }
    if (const auto* n = e->as<node::FieldSet>()) {
      if (!n->receiver->is<node::This>()) bad_expr(s, "field '" + n->field + "' is written through another contract");
      return n->field + " = " + expr(n->rhs);
    }
    if (const auto* n = e->as<node::OpAssign>()) {
      return expr(n->target) + " " + spelling(n->op) + "= " + expr(n->rhs);
    }
    if (e->is<node::Atomic>()) bad_expr(s, "atomic blocks have no Solidity counterpart");
    if (e->is<node::Fork>()) bad_expr(s, "fork has no Solidity counterpart");
    bad_expr(s, "nested block in expression position");
  }

  std::string args(const std::vector<ExprPtr>& as) {
    std::string out;
    for (std::size_t i = 0; i < as.size(); ++i) out += (i ? ", " : "") + expr(as[i]);
    return out;
  }
};

void flatten(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (!e || e->is<node::UnitLit>()) return;
  if (const auto* s = e->as<node::Seq>()) {
    flatten(s->first, out);
    flatten(s->second, out);
    return;
  }
  out.push_back(e);
}

bool has_emit(const ExprPtr& e) {
  if (!e) return false;
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::Emit>) {
          return true;
        } else if constexpr (std::is_same_v<T, node::Seq>) {
          return has_emit(n.first) || has_emit(n.second);
        } else if constexpr (std::is_same_v<T, node::Atomic> || std::is_same_v<T, node::Fork>) {
          return has_emit(n.body);
        } else {
          return false;
        }
      },
      e->node);
}

const char* kDefaultValidDoc =
    "/**\n"
    "* @dev Return bool\n"
    "* @return true if the invariant holds; false otherwise\n"
    "*/";

class ClassWriter {
 public:
  ClassWriter(const ClassDecl& c, const EmitterConfig& cfg) : c_(c), cfg_(cfg) {}

  std::string run() {
    if (c_.formals.size() > 1)
      bad_ctx(c_.span, "class '" + c_.name + "' has context parameters beyond its owner");
    bool pre_post = cfg_.style == EmitStyle::PrePost;
    out_ << "pragma solidity " << cfg_.pragma << ";\n\n";
    out_ << "import '" << cfg_.import_prefix << "Ownable.sol';\n";
    out_ << "import '" << cfg_.import_prefix << (pre_post ? "Validity.sol" : "OVValidity.sol") << "';\n\n";
    doc(c_.doc, 0);
    out_ << "contract " << contract_name(c_, cfg_) << " is ";
    if (c_.superclass)
      out_ << c_.superclass->name;
    else
      out_ << "Ownable, " << (pre_post ? "Validity" : "OVValidity");
    out_ << " {\n";
    for (const auto& f : c_.fields) {
      out_ << "    " << sol_type(f.type, f.span) << " " << f.name;
      if (f.init) out_ << " = " << w_.expr(f.init);
      out_ << ";\n";
      body_started_ = true;
    }
    if (!pre_post && c_.invariant) {
      out_ << "    // invariant: " << w_.expr(c_.invariant) << "\n";
      body_started_ = true;
    }
    for (const auto& k : c_.ctors) ctor(k);
    for (const auto& m : c_.methods) method(m);
    separator();
    out_ << emit_is_valid(c_, cfg_);
    out_ << "}\n";
    return out_.str();
  }

  static std::string contract_name(const ClassDecl& c, const EmitterConfig& cfg) {
    return cfg.style == EmitStyle::PrePost ? c.name + "_OV" : c.name;
  }

 private:
  void separator() {
    if (body_started_) out_ << "\n";
    body_started_ = true;
  }

  void doc(const std::string& d, int depth) {
    if (d.empty()) return;
    std::istringstream in(d);
    std::string line;
    while (std::getline(in, line)) out_ << std::string(4 * depth, ' ') << line << "\n";
  }

  void body(const ExprPtr& b, bool return_last) {
    std::vector<ExprPtr> stmts;
    flatten(b, stmts);
    for (std::size_t i = 0; i < stmts.size(); ++i) {
      bool last = i + 1 == stmts.size();
      out_ << "        " << (last && return_last ? "return " : "") << w_.expr(stmts[i]) << ";\n";
    }
  }

  void ctor(const CtorDecl& k) {
    separator();
    doc(k.doc, 1);
    out_ << "    constructor(" << params(k.params, k.span) << ") public {\n";
    body(k.body, false);
    out_ << "        require(this.isValid(), \"Validity fails post-check\");\n";
    out_ << "    }\n";
  }

  void method(const MethodDecl& m) {
    std::string mod;
    try {
      mod = modifier_for(m.contract, cfg_.style);
    } catch (const DiagnosticError& e) {
      bad_ctx(m.span, "method '" + m.name + "': " + e.diag().msg);
    }
    bool is_void = m.ret.kind == TypeExpr::Kind::Void;
    bool view = m.contract.invalidity.is(CtxKind::Bot) && !has_emit(m.body);
    separator();
    doc(m.doc, 1);
    out_ << "    function " << m.name << "(" << params(m.params, m.span) << ")";
    if (!mod.empty()) out_ << " " << mod;
    out_ << " public";
    if (view) out_ << " view";
    if (!is_void) out_ << " returns (" << sol_type(m.ret, m.span) << ")";
    out_ << " {\n";
    body(m.body, !is_void);
    out_ << "    }\n";
  }

  const ClassDecl& c_;
  const EmitterConfig& cfg_;
  ExprWriter w_;
  std::ostringstream out_;
  bool body_started_ = false;
};

}  // namespace

CheckPlan checks_for(const Contract& d) {
  auto expressible = [](const Context& k) { return k.is(CtxKind::This) || k.is(CtxKind::Bot); };
  if (!expressible(d.validity) || !expressible(d.invalidity))
    bad_ctx({}, "contract <" + to_string(d.validity) + "," + to_string(d.invalidity) +
                    "> is not expressible as a single-contract modifier");
  CheckPlan p;
  p.pre = !d.validity.is(CtxKind::Bot);
  p.post = d.validity.is(CtxKind::This) && d.invalidity.is(CtxKind::This);
  return p;
}

std::string modifier_for(const Contract& d, EmitStyle style) {
  CheckPlan p = checks_for(d);
  if (style == EmitStyle::PrePost) {
    if (p.pre && p.post) return "preValid() postValid()";
    if (p.pre) return "preValid()";
    if (p.post) return "postValid()";
    return "";
  }
  if (p.pre && p.post) return "thisThis()";
  if (p.pre) return "thisTop()";
  if (p.post) return "botThis()";
  return "";
}

std::string emit_is_valid(const ClassDecl& c, const EmitterConfig&) {
  std::ostringstream out;
  std::istringstream in(c.inv_doc.empty() ? std::string(kDefaultValidDoc) : c.inv_doc);
  std::string line;
  while (std::getline(in, line)) out << "    " << line << "\n";
  ExprWriter w;
  out << "    function isValid() external view returns (bool) {\n";
  out << "        return " << (c.invariant ? w.expr(c.invariant) : "true") << ";\n";
  out << "    }\n";
  return out.str();
}

std::string transpile_class(const ClassDecl& c, const EmitterConfig& cfg) { return ClassWriter(c, cfg).run(); }

std::vector<SolFile> transpile_program(const Program& p, const EmitterConfig& cfg) {
  std::vector<SolFile> out;
  for (const auto& c : p.classes)
    out.push_back({ClassWriter::contract_name(c, cfg) + ".sol", transpile_class(c, cfg)});
  return out;
}

bool solidity_well_formed(const std::string& text) {
  std::vector<char> stack;
  bool line_comment = false, block_comment = false, in_string = false;
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    char next = i + 1 < text.size() ? text[i + 1] : '\0';
    if (line_comment) {
      if (ch == '\n') line_comment = false;
      continue;
    }
    if (block_comment) {
      if (ch == '*' && next == '/') {
        block_comment = false;
        ++i;
      }
      continue;
    }
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == quote) {
        in_string = false;
      } else if (ch == '\n') {
        return false;
      }
      continue;
    }
    if (ch == '/' && next == '/') {
      line_comment = true;
      ++i;
    } else if (ch == '/' && next == '*') {
      block_comment = true;
      ++i;
    } else if (ch == '"' || ch == '\'') {
      in_string = true;
      quote = ch;
    } else if (ch == '(' || ch == '{' || ch == '[') {
      stack.push_back(ch);
    } else if (ch == ')' || ch == '}' || ch == ']') {
      char open = ch == ')' ? '(' : ch == '}' ? '{' : '[';
      if (stack.empty() || stack.back() != open) return false;
      stack.pop_back();
    } else if (ch == ';' && next == ';') {
      return false;
    }
  }
  return stack.empty() && !in_string && !block_comment && text.rfind("pragma solidity ", 0) == 0;
}

}  // namespace ov
