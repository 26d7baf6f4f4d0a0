#include <openssl/evp.h>

#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "ov/runtime.hpp"

namespace ov {

// Locations are renamed to their dense rank so that the encoding does not depend on epochs.
std::string canonical_state(const State& s) {
  std::map<Loc, std::size_t> rank;
  for (const auto& [l, _] : s.heap) rank.emplace(l, rank.size());
  auto label = [&](Loc l) {
    auto it = rank.find(l);
    return it == rank.end() ? std::string("dangling") : "l" + std::to_string(it->second);
  };
  std::ostringstream out;
  for (const auto& [l, o] : s.heap) {
    out << label(l) << "=" << o.cls->name << "{";
    for (std::size_t i = 0; i < o.fields.size(); ++i) {
      const Value& v = o.fields[i];
      out << (i ? "," : "") << (*o.field_names)[i] << "=";
      out << (v.is(Value::Kind::Ref) ? label(v.ref) : to_string(v));
    }
    out << "};";
  }
  out << "|valid=";
  bool first = true;
  for (Loc l : s.sigma) {
    out << (first ? "" : ",") << rank.at(l);
    first = false;
  }
  return out.str();
}

std::string state_hash(const State& s) {
  std::string text = canonical_state(s);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

}  // namespace ov
