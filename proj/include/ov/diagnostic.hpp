#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ov/ast.hpp"

namespace ov {

enum class Severity { Error, Warning };

struct Diagnostic {
  std::string code;  // E-PARSE, W-TOP-INVALIDITY, ...
  Severity severity = Severity::Error;
  Span span;
  std::string msg;

  bool is_error() const { return severity == Severity::Error; }
};

using Diagnostics = std::vector<Diagnostic>;

inline Diagnostic error(std::string code, Span s, std::string msg) {
  return {std::move(code), Severity::Error, s, std::move(msg)};
}
inline Diagnostic warning(std::string code, Span s, std::string msg) {
  return {std::move(code), Severity::Warning, s, std::move(msg)};
}

bool has_errors(const Diagnostics& ds);

// {"code":..,"severity":..,"line":..,"col":..,"msg":..}
std::string to_json_line(const Diagnostic& d);
// file:line:col: severity[code]: msg, optionally ANSI-colored
std::string to_text(const Diagnostic& d, const std::string& file, bool color);

// Thrown by single-result operations (parse, transpile, runtime faults).
class DiagnosticError : public std::runtime_error {
 public:
  explicit DiagnosticError(Diagnostic d) : std::runtime_error(d.code + ": " + d.msg), diag_(std::move(d)) {}
  const Diagnostic& diag() const { return diag_; }

 private:
  Diagnostic diag_;
};

}  // namespace ov
