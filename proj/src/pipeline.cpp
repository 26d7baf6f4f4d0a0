#include "ov/pipeline.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "ov/desugar.hpp"
#include "ov/parser.hpp"
#include "ov/typecheck.hpp"

namespace ov {

Compiled compile_source(std::string_view source) {
  Compiled c;
  ParseResult pr = parse_program(source);
  c.diags = pr.diags;
  if (!pr.program) return c;
  c.surface = std::move(pr.program);
  c.core = desugar(*c.surface);
  Diagnostics checked = check_program(*c.core);
  c.diags.insert(c.diags.end(), checked.begin(), checked.end());
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string report_json(const FinalReport& r) {
  nlohmann::ordered_json j;
  j["lemma3"] = r.lemma3;
  j["objects"] = r.objects;
  j["valid"] = r.valid;
  j["pre_checks"] = r.counters.pre_checks;
  j["post_checks"] = r.counters.post_checks;
  j["invariant_evals"] = r.counters.invariant_evals;
  j["events"] = r.events;
  j["state_hash"] = r.state_hash;
  j["outcome"] = r.outcome == FinalReport::Outcome::Completed ? "completed" : "E-FUEL";
  j["failures"] = r.failures;
  j["invalid"] = r.invalid;
  j["steps"] = r.steps;
  return j.dump();
}

std::string report_text(const FinalReport& r) {
  std::ostringstream out;
  if (r.outcome == FinalReport::Outcome::FuelExhausted) out << "outcome: step budget exhausted\n";
  out << "lemma3: " << (r.lemma3 ? "holds" : "FAILS") << " (" << r.valid << "/" << r.objects << " valid)\n";
  out << "checks: pre=" << r.counters.pre_checks << " post=" << r.counters.post_checks
      << " evals=" << r.counters.invariant_evals << "\n";
  for (const auto& e : r.events) out << "event: " << e << "\n";
  for (const auto& f : r.failures) out << "failure: " << f << "\n";
  for (const auto& l : r.invalid) out << "invalid: " << l << "\n";
  out << "state: " << r.state_hash << "\n";
  return out.str();
}

}  // namespace ov
