#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ov/ast.hpp"
#include "ov/class_table.hpp"
#include "ov/diagnostic.hpp"
#include "ov/ownership.hpp"

namespace ov {

// Abort reasons carried by failure values.
inline constexpr const char* kPreFail = "R-PRE-FAIL";
inline constexpr const char* kPostFail = "R-POST-FAIL";
inline constexpr const char* kRequire = "R-REQUIRE";
inline constexpr const char* kNullDeref = "R-NULL";
inline constexpr const char* kDivZero = "R-DIV-ZERO";

struct Value {
  enum class Kind { Unit, Int, Bool, Null, Ref, Fail };
  Kind kind = Kind::Unit;
  BigInt i;
  bool b = false;
  Loc ref = 0;
  std::string reason;  // Fail only

  static Value unit() { return {}; }
  static Value int_(BigInt v) {
    Value x;
    x.kind = Kind::Int;
    x.i = std::move(v);
    return x;
  }
  static Value bool_(bool v) {
    Value x;
    x.kind = Kind::Bool;
    x.b = v;
    return x;
  }
  static Value null() {
    Value x;
    x.kind = Kind::Null;
    return x;
  }
  static Value ref_(Loc l) {
    Value x;
    x.kind = Kind::Ref;
    x.ref = l;
    return x;
  }
  static Value fail(std::string why) {
    Value x;
    x.kind = Kind::Fail;
    x.reason = std::move(why);
    return x;
  }
  bool is(Kind k) const { return kind == k; }
  friend bool operator==(const Value& a, const Value& b);
};

std::string to_string(const Value& v);

struct ObjectRec {
  const ClassDecl* cls = nullptr;
  std::vector<RtCtx> args;  // resolved context arguments; args[0] is the owner
  std::vector<Value> fields;
  std::shared_ptr<const std::vector<std::string>> field_names;  // declaration order, superclass first
};

struct Counters {
  std::uint64_t pre_checks = 0;
  std::uint64_t post_checks = 0;
  std::uint64_t invariant_evals = 0;
};

// Field-level access sets; field index -1 stands for Σ membership.
struct AccessLog {
  std::set<std::pair<Loc, int>> reads;
  std::set<std::pair<Loc, int>> writes;
  void clear() {
    reads.clear();
    writes.clear();
  }
};
inline constexpr int kValidSlot = -1;

struct State {
  std::map<Loc, ObjectRec> heap;  // creation order = key order
  OwnershipTree tree;
  std::set<Loc> sigma;
  std::vector<std::string> events;
  Counters counters;
  std::uint32_t epoch = 0;
  std::uint32_t next_seq = 0;
};

// Canonical serialization and its SHA-256 (lowercase hex).
std::string canonical_state(const State& s);
std::string state_hash(const State& s);

struct RtContract {
  RtCtx validity;
  RtCtx invalidity;
  friend bool operator==(const RtContract&, const RtContract&) = default;
};

class Machine;

struct RunOptions {
  std::uint64_t fuel = 50'000'000;
  std::uint64_t seed = 0;
  bool naive = false;        // count full-subtree checks at every call entry/exit as well
  bool debug_sigma = false;  // recheck every l in Σ after each top-level commit/abort
  // Observation points for property tests; tid is the OV thread id.
  std::function<void(const Machine&, int tid, const RtContract&)> before_begin;
  std::function<void(const Machine&, int tid, const std::string& reason)> after_abort;
  std::function<void(const Machine&, int tid)> after_commit;
  AccessLog* access = nullptr;
};

struct FinalReport {
  enum class Outcome { Completed, FuelExhausted };
  Outcome outcome = Outcome::Completed;
  bool lemma3 = false;
  std::size_t objects = 0;
  std::size_t valid = 0;
  Counters counters;
  std::vector<std::string> events;
  std::string state_hash;
  std::vector<std::string> failures;  // "t<tid>:<reason>" for aborted transactions and failed threads
  std::vector<std::string> invalid;   // labels of objects failing root revalidation
  std::uint64_t steps = 0;
};

// Internal invariant violations: E-STUCK, E-EFFECT, E-DANGLING, E-FORK-IN-ATOMIC.
class RuntimeFault : public DiagnosticError {
 public:
  using DiagnosticError::DiagnosticError;
};

// The α;H;Σ;S;Π machine. The program must outlive the machine and pass check_program.
class Machine {
 public:
  explicit Machine(const CoreProgram& p, RunOptions opts = {});
  Machine(const CoreProgram& p, State initial, RunOptions opts);
  ~Machine();
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  // Adds main as thread 0 under the root frame <top,top>.
  void load_main();
  // One reduction of the scheduled thread; false when every thread is finished.
  bool step();
  // Steps to completion (or fuel), then the root commit revalidates every object.
  FinalReport run();

  // Runs `e` in a fresh thread with the given locals until all threads finish.
  // Returns the thread's final value (Fail if it aborted or terminated).
  Value run_expr(const ExprPtr& e, std::map<std::string, Value> locals);

  bool eval_invariant(Loc l);  // counts invariant_evals
  bool assert_valid(Loc l);    // Valid(l): checks the whole subtree, updates Σ

  const State& state() const { return state_; }
  State& state() { return state_; }
  const ClassTable& table() const { return table_; }
  std::uint64_t steps() const { return steps_; }
  bool lock_held() const;
  int lock_holder() const;
  int last_stepped() const { return last_stepped_; }  // thread id of the latest step, -1 before any
  std::size_t thread_count() const;
  const std::vector<std::string>& failures() const { return failures_; }

  // The contract of m on target with This bound to target.
  RtContract method_contract(Loc target, const std::string& method) const;

 private:
  struct Impl;
  const CoreProgram& program_;
  ClassTable table_;
  RunOptions opts_;
  State state_;
  std::uint64_t steps_ = 0;
  int last_stepped_ = -1;
  std::vector<std::string> failures_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ov
