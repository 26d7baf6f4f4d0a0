#include "ov/diagnostic.hpp"

#include <json.hpp>

namespace ov {

bool has_errors(const Diagnostics& ds) {
  for (const auto& d : ds)
    if (d.is_error()) return true;
  return false;
}

std::string to_json_line(const Diagnostic& d) {
  nlohmann::ordered_json j;
  j["code"] = d.code;
  j["severity"] = d.is_error() ? "error" : "warning";
  j["line"] = d.span.line;
  j["col"] = d.span.col;
  j["msg"] = d.msg;
  return j.dump();
}

std::string to_text(const Diagnostic& d, const std::string& file, bool color) {
  std::string sev = d.is_error() ? "error" : "warning";
  if (color) sev = (d.is_error() ? "\x1b[31m" : "\x1b[33m") + sev + "\x1b[0m";
  return file + ":" + std::to_string(d.span.line) + ":" + std::to_string(d.span.col) + ": " + sev +
         "[" + d.code + "]: " + d.msg;
}

}  // namespace ov
