#pragma once

#include <algorithm>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ov/pipeline.hpp"

namespace ovtest {

inline std::filesystem::path repo(const std::string& rel) { return std::filesystem::path(OV_SOURCE_DIR) / rel; }

inline std::string read(const std::string& rel) { return ov::read_file(repo(rel).string()); }

// Sorted *.ov (or other extension) files of a corpus directory, as repo-relative paths.
inline std::vector<std::string> corpus(const std::string& dir, const std::string& ext = ".ov") {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(repo(dir)))
    if (e.path().extension() == ext) out.push_back(dir + "/" + e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

inline ov::Compiled compile(const std::string& source) { return ov::compile_source(source); }

// Throws when the source does not check cleanly, with the first error in the message.
inline ov::Compiled compile_clean(const std::string& source) {
  ov::Compiled c = ov::compile_source(source);
  if (!c.ok()) {
    std::string first = "no core program";
    for (const auto& d : c.diags)
      if (d.is_error()) {
        first = d.code + " at " + std::to_string(d.span.line) + ":" + std::to_string(d.span.col) + ": " + d.msg;
        break;
      }
    throw std::runtime_error("program does not check: " + first);
  }
  return c;
}

inline std::vector<std::string> error_codes(const ov::Diagnostics& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds)
    if (d.is_error()) out.push_back(d.code);
  return out;
}

// First line of the form `// <key>: value`, or "".
inline std::string header(const std::string& text, const std::string& key) {
  std::string tag = "// " + key + ": ";
  std::size_t p = text.find(tag);
  if (p == std::string::npos) return "";
  std::size_t b = p + tag.size();
  return text.substr(b, text.find('\n', b) - b);
}

}  // namespace ovtest
