#include "ov/parser.hpp"

#include <cctype>
#include <sstream>

namespace ov {
namespace {

enum class Tok { Ident, Int, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Span span;
  std::string doc;  // normalized /** */ comment immediately preceding this token
};

std::string normalize_doc(std::string_view raw) {
  std::string out;
  std::istringstream in{std::string(raw)};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    size_t b = line.find_first_not_of(" \t\r");
    size_t e = line.find_last_not_of(" \t\r");
    std::string t = b == std::string::npos ? "" : line.substr(b, e - b + 1);
    if (!first) out += '\n';
    out += t;
    first = false;
  }
  return out;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    std::string doc;
    for (;;) {
      skip_space(doc);
      Token t;
      t.span = {line_, col_};
      t.doc = std::move(doc);
      doc.clear();
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(std::move(t));
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t b = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(b, pos_ - b));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t b = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        if (pos_ + 1 < src_.size() && src_[pos_] == 'e' &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
          advance();
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
            advance();
        }
        if (pos_ < src_.size() &&
            (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          fail(t.span, "malformed number");
        t.kind = Tok::Int;
        t.text = std::string(src_.substr(b, pos_ - b));
      } else {
        static const char* two[] = {"<<", "<=", ">=", "==", "!=", "&&", "||",
                                    "+=", "-=", "*=", "/=", "%="};
        t.kind = Tok::Punct;
        for (const char* p : two) {
          if (src_.substr(pos_, 2) == p) {
            t.text = p;
            break;
          }
        }
        if (t.text.empty()) {
          static const std::string one = "{}[]()<>=+-*/%!,;.?";
          if (one.find(c) == std::string::npos)
            fail(t.span, std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
        }
        for (size_t i = 0; i < t.text.size(); ++i) advance();
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  [[noreturn]] void fail(Span s, std::string msg) {
    throw DiagnosticError(error("E-PARSE", s, std::move(msg)));
  }

  void skip_space(std::string& doc) {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_, 2) == "/*") {
        Span s{line_, col_};
        size_t b = pos_;
        size_t e = src_.find("*/", pos_ + 2);
        if (e == std::string_view::npos) fail(s, "unterminated comment");
        bool is_doc = src_.substr(pos_, 3) == "/**" && e > pos_ + 2;
        while (pos_ < e + 2) advance();
        if (is_doc) doc = normalize_doc(src_.substr(b, e + 2 - b));
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

BigInt parse_int_spelling(const std::string& s) {
  size_t e = s.find('e');
  BigInt v(s.substr(0, e));
  if (e != std::string::npos) {
    int k = std::stoi(s.substr(e + 1));
    for (int i = 0; i < k; ++i) v *= 10;
  }
  return v;
}

bool is_modifier(const std::string& s) {
  return s == "public" || s == "private" || s == "external" || s == "internal";
}

bool is_prim_type(const std::string& s) {
  return s == "int" || s == "uint" || s == "uint256" || s == "bool" || s == "void";
}

bool is_keyword(const std::string& s) {
  static const char* kws[] = {"class", "extends", "where", "inv",    "final",  "main",
                              "new",   "atomic",  "fork",  "valid",  "require", "emit",
                              "null",  "true",    "false", "return", "throw",  "this",
                              "top",   "bot"};
  for (const char* k : kws)
    if (s == k) return true;
  return false;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, Diagnostics& diags) : toks_(std::move(toks)), diags_(diags) {}

  Program program() {
    Program p;
    while (!at_end()) {
      if (is("class")) {
        p.classes.push_back(class_decl());
      } else if (is("main")) {
        if (p.main) fail("duplicate main block");
        next();
        p.main = block();
      } else {
        fail("expected 'class' or 'main'");
      }
    }
    return p;
  }

  Contract contract_only() {
    Contract c = contract();
    if (!at_end()) fail("trailing input after contract");
    return c;
  }

 private:
  // ---- token helpers
  const Token& peek(size_t k = 0) const {
    size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is(const char* text, size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind != Tok::End && t.kind != Tok::Int && t.text == text;
  }
  bool is_ident(size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind == Tok::Ident && !is_keyword(t.text) && !is_prim_type(t.text);
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool accept(const char* text) {
    if (!is(text)) return false;
    next();
    return true;
  }
  void expect(const char* text) {
    if (!accept(text)) fail(std::string("expected '") + text + "'");
  }
  std::string ident() {
    if (!is_ident()) fail("expected identifier");
    return next().text;
  }
  [[noreturn]] void fail(std::string msg) const {
    const Token& t = peek();
    std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw DiagnosticError(error("E-PARSE", t.span, msg + ", found " + found));
  }

  // ---- declarations
  ClassDecl class_decl() {
    ClassDecl c;
    c.doc = peek().doc;
    c.span = peek().span;
    expect("class");
    c.name = ident();
    expect("[");
    c.formals.push_back(ident());
    while (accept(",")) c.formals.push_back(ident());
    expect("]");
    if (accept("extends")) c.superclass = type();
    if (accept("where")) {
      do {
        WhereConstraint w;
        w.lhs = context();
        if (accept("<<"))
          w.rel = Relation::Strict;
        else if (accept("<="))
          w.rel = Relation::NonStrict;
        else
          fail("expected '<<' or '<='");
        w.rhs = context();
        c.where.push_back(w);
      } while (accept(","));
    }
    expect("{");
    while (!accept("}")) member(c);
    return c;
  }

  void member(ClassDecl& c) {
    std::string doc = peek().doc;
    Span span = peek().span;
    while (peek().kind == Tok::Ident && is_modifier(peek().text)) next();
    if (accept("inv")) {
      if (c.invariant) fail("duplicate invariant clause");
      c.invariant = expr();
      c.inv_doc = doc;
      c.inv_span = span;
      expect(";");
      return;
    }
    if (is_ident() && peek().text == c.name && is("(", 1)) {
      CtorDecl k;
      k.doc = doc;
      k.span = span;
      next();
      k.params = params();
      k.body = block();
      c.ctors.push_back(std::move(k));
      return;
    }
    bool is_final = accept("final");
    TypeExpr t = type();
    std::string name = ident();
    if (!is_final && is("(")) {
      MethodDecl m;
      m.ret = t;
      m.name = name;
      m.doc = doc;
      m.span = span;
      m.params = params();
      while (peek().kind == Tok::Ident && (is_modifier(peek().text) || peek().text == "view")) next();
      m.contract = contract();
      m.body = block();
      c.methods.push_back(std::move(m));
      return;
    }
    FieldDecl f;
    f.is_final = is_final;
    f.type = t;
    f.name = name;
    f.span = span;
    if (accept("=")) f.init = expr();
    expect(";");
    c.fields.push_back(std::move(f));
  }

  std::vector<Param> params() {
    std::vector<Param> ps;
    expect("(");
    if (accept(")")) return ps;
    do {
      Param p;
      p.type = type();
      p.name = ident();
      ps.push_back(std::move(p));
    } while (accept(","));
    expect(")");
    return ps;
  }

  TypeExpr type() {
    const Token& t = peek();
    if (t.kind == Tok::Ident && is_prim_type(t.text)) {
      next();
      if (t.text == "bool") return TypeExpr::bool_();
      if (t.text == "void") return TypeExpr::void_();
      return TypeExpr::int_(t.text);
    }
    std::string name = ident();
    std::vector<Context> args;
    if (accept("<")) {
      args.push_back(context());
      while (accept(",")) args.push_back(context());
      expect(">");
    }
    return TypeExpr::cls(std::move(name), std::move(args));
  }

  Context context() {
    if (accept("this")) return Context::this_();
    if (accept("top")) return Context::top();
    if (accept("bot")) return Context::bot();
    if (accept("*")) return Context::any();
    return Context::param(ident());
  }

  Contract contract() {
    expect("<");
    Span vs = peek().span;
    Context v = context();
    expect(",");
    Span is = peek().span;
    Context i = context();
    expect(">");
    if (v.is(CtxKind::Any) || i.is(CtxKind::Any))
      throw DiagnosticError(error("E-PARSE", v.is(CtxKind::Any) ? vs : is,
                                  "'*' is not allowed in a contract"));
    if (i.is(CtxKind::Top)) {
      diags_.push_back(warning("W-TOP-INVALIDITY", is, "invalidity 'top' is treated as 'bot'"));
      i = Context::bot();
    }
    return {v, i};
  }

  // ---- statements
  ExprPtr block() {
    Span s = peek().span;
    expect("{");
    std::vector<ExprPtr> stmts;
    while (!accept("}")) {
      if (accept(";")) continue;
      stmts.push_back(statement());
      bool ended_with_brace = pos_ > 0 && toks_[pos_ - 1].text == "}";
      if (accept(";")) continue;
      if (is("}")) continue;
      if (!ended_with_brace) fail("expected ';'");
    }
    if (stmts.empty()) return make(node::UnitLit{}, s);
    ExprPtr acc = stmts.back();
    for (size_t i = stmts.size() - 1; i-- > 0;) acc = seq(stmts[i], acc, stmts[i]->span);
    return acc;
  }

  bool looks_like_decl() {
    const Token& t = peek();
    if (t.kind != Tok::Ident) return false;
    if (is_prim_type(t.text)) return t.text != "void";
    if (!is_ident()) return false;
    if (is_ident(1)) return true;
    if (!is("<", 1)) return false;
    // ID < ctx (, ctx)* > ID
    size_t k = 2;
    for (;;) {
      const Token& c = peek(k);
      bool ctx = c.kind == Tok::Ident || c.text == "*";
      if (!ctx) return false;
      ++k;
      if (is(",", k)) {
        ++k;
        continue;
      }
      return is(">", k) && is_ident(k + 1);
    }
  }

  ExprPtr statement() {
    Span s = peek().span;
    if (accept("return")) {
      if (is(";") || is("}")) return make(node::UnitLit{}, s);
      return expr();
    }
    if (looks_like_decl()) {
      TypeExpr t = type();
      std::string name = ident();
      ExprPtr init;
      if (accept("="))
        init = expr();
      else
        init = default_value(t, s);
      return make(node::Assign{name, t, init}, s);
    }
    return expr();
  }

  static ExprPtr default_value(const TypeExpr& t, Span s) {
    switch (t.kind) {
      case TypeExpr::Kind::Int: return make(node::IntLit{0, "0"}, s);
      case TypeExpr::Kind::Bool: return make(node::BoolLit{false}, s);
      default: return make(node::NullLit{}, s);
    }
  }

  // ---- expressions
  ExprPtr expr() {
    Span s = peek().span;
    if (is("atomic") || is("fork")) return primary();
    ExprPtr lhs = binary(0);
    static const std::pair<const char*, PrimOp> ops[] = {
        {"+=", PrimOp::Add}, {"-=", PrimOp::Sub}, {"*=", PrimOp::Mul},
        {"/=", PrimOp::Div}, {"%=", PrimOp::Mod}};
    if (accept("=")) {
      ExprPtr rhs = expr();
      if (auto v = lhs->as<node::Var>()) return make(node::Assign{v->name, std::nullopt, rhs}, s);
      if (auto g = lhs->as<node::FieldGet>())
        return make(node::FieldSet{g->receiver, g->field, rhs}, s);
      throw DiagnosticError(error("E-PARSE", s, "left side of '=' is not assignable"));
    }
    for (const auto& [text, op] : ops) {
      if (accept(text)) {
        ExprPtr rhs = expr();
        if (!lhs->is<node::Var>() && !lhs->is<node::FieldGet>())
          throw DiagnosticError(error("E-PARSE", s, "left side of compound assignment is not assignable"));
        return make(node::OpAssign{lhs, op, rhs}, s);
      }
    }
    return lhs;
  }

  struct BinLevel {
    std::vector<std::pair<const char*, PrimOp>> ops;
  };

  ExprPtr binary(int level) {
    static const std::vector<BinLevel> levels = {
        {{{"||", PrimOp::Or}}},
        {{{"&&", PrimOp::And}}},
        {{{"==", PrimOp::Eq}, {"!=", PrimOp::Ne}}},
        {{{"<=", PrimOp::Le}, {">=", PrimOp::Ge}, {"<", PrimOp::Lt}, {">", PrimOp::Gt}}},
        {{{"+", PrimOp::Add}, {"-", PrimOp::Sub}}},
        {{{"*", PrimOp::Mul}, {"/", PrimOp::Div}, {"%", PrimOp::Mod}}},
    };
    if (level == static_cast<int>(levels.size())) return unary();
    ExprPtr lhs = binary(level + 1);
    for (;;) {
      Span s = peek().span;
      bool matched = false;
      for (const auto& [text, op] : levels[level].ops) {
        if (accept(text)) {
          ExprPtr rhs = binary(level + 1);
          lhs = make(node::Prim{op, {lhs, rhs}}, s);
          matched = true;
          break;
        }
      }
      if (!matched) return lhs;
    }
  }

  ExprPtr unary() {
    Span s = peek().span;
    if (accept("!")) return make(node::Prim{PrimOp::Not, {unary()}}, s);
    if (accept("-")) return make(node::Prim{PrimOp::Neg, {unary()}}, s);
    if (accept("valid")) return make(node::Valid{unary()}, s);
    return postfix(primary());
  }

  ExprPtr postfix(ExprPtr e) {
    while (is(".")) {
      Span s = peek().span;
      next();
      std::string name = ident();
      if (is("(")) {
        e = make(node::Call{e, name, args()}, s);
      } else {
        e = make(node::FieldGet{e, name}, s);
      }
    }
    return e;
  }

  std::vector<ExprPtr> args() {
    std::vector<ExprPtr> out;
    expect("(");
    if (accept(")")) return out;
    do out.push_back(expr());
    while (accept(","));
    expect(")");
    return out;
  }

  ExprPtr body() { return is("{") ? block() : expr(); }

  ExprPtr primary() {
    const Token& t = peek();
    Span s = t.span;
    if (t.kind == Tok::Int) {
      next();
      return make(node::IntLit{parse_int_spelling(t.text), t.text}, s);
    }
    if (accept("true")) return make(node::BoolLit{true}, s);
    if (accept("false")) return make(node::BoolLit{false}, s);
    if (accept("null")) return make(node::NullLit{}, s);
    if (accept("this")) return make(node::This{}, s);
    if (accept("throw")) return make(node::Throw{}, s);
    if (accept("new")) {
      TypeExpr ty = type();
      return make(node::New{ty, args()}, s);
    }
    if (accept("atomic")) {
      std::optional<Contract> c;
      if (is("<")) c = contract();
      return make(node::Atomic{c, body()}, s);
    }
    if (accept("fork")) return make(node::Fork{body()}, s);
    if (accept("require")) {
      expect("(");
      ExprPtr c = expr();
      expect(")");
      return make(node::Require{c}, s);
    }
    if (accept("emit")) {
      std::string name = ident();
      return make(node::Emit{name, args()}, s);
    }
    if (is("{")) return block();
    if (accept("(")) {
      ExprPtr e = expr();
      expect(")");
      return e;
    }
    if (is_ident()) {
      std::string name = next().text;
      if (is("(")) return make(node::Call{make(node::This{}, s), name, args()}, s);
      return make(node::Var{name}, s);
    }
    fail("expected expression");
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  Diagnostics& diags_;
};

}  // namespace

ParseResult parse_program(std::string_view source) {
  ParseResult r;
  try {
    Parser p(Lexer(source).run(), r.diags);
    r.program = p.program();
  } catch (const DiagnosticError& e) {
    r.diags.push_back(e.diag());
    r.program.reset();
  }
  return r;
}

Contract parse_contract(std::string_view text, Diagnostics* warnings) {
  Diagnostics local;
  Parser p(Lexer(text).run(), local);
  Contract c = p.contract_only();
  if (warnings) warnings->insert(warnings->end(), local.begin(), local.end());
  return c;
}

}  // namespace ov
