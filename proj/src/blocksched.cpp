#include "ov/blocksched.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <json.hpp>
#include <set>
#include <stdexcept>
#include <thread>

namespace ov {

namespace {

using json = nlohmann::ordered_json;

Value value_from_json(const json& v) {
  if (v.is_boolean()) return Value::bool_(v.get<bool>());
  if (v.is_number_unsigned()) return Value::int_(BigInt(v.get<std::uint64_t>()));
  if (v.is_number_integer()) return Value::int_(BigInt(v.get<std::int64_t>()));
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t digits = s.size() > 1 && s[0] == '-' ? 1 : 0;
    if (digits < s.size() && std::all_of(s.begin() + digits, s.end(), ::isdigit)) return Value::int_(BigInt(s));
  }
  throw std::runtime_error("block arguments must be integers or booleans, got " + v.dump());
}

json value_to_json(const Value& v) {
  if (v.is(Value::Kind::Bool)) return v.b;
  if (v.is(Value::Kind::Int)) {
    if (v.i >= INT64_MIN && v.i <= INT64_MAX) return static_cast<std::int64_t>(v.i);
    return v.i.str();
  }
  throw std::runtime_error("only integers and booleans appear in blocks");
}

const json& field(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) throw std::runtime_error(std::string(where) + " lacks '" + key + "'");
  return obj.at(key);
}

std::vector<Value> args_from(const json& obj, const char* where) {
  std::vector<Value> out;
  if (!obj.contains("args")) return out;
  const json& a = obj.at("args");
  if (!a.is_array()) throw std::runtime_error(std::string(where) + " args must be an array");
  for (const auto& v : a) out.push_back(value_from_json(v));
  return out;
}

[[noreturn]] void target_error(const std::string& msg) { throw DiagnosticError(error("E-TARGET", {}, msg)); }

bool access_conflict(const AccessLog& a, const AccessLog& b) {
  for (const auto& w : a.writes)
    if (b.reads.count(w) || b.writes.count(w)) return true;
  for (const auto& w : b.writes)
    if (a.reads.count(w)) return true;
  return false;
}

std::string status_of(const Value& v) { return v.is(Value::Kind::Fail) ? "aborted:" + v.reason : "committed"; }

// Runs fn(0..n-1) on up to `workers` host threads; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  std::size_t threads = std::min<std::size_t>(std::max(1u, workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

namespace {
Block parse_block_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("block must be a JSON object");
  Block b;
  if (j.contains("deploy")) {
    if (!j["deploy"].is_array()) throw std::runtime_error("deploy must be an array");
    for (const auto& d : j["deploy"])
      b.deploy.push_back({field(d, "id", "deploy entry").get<std::string>(),
                          field(d, "class", "deploy entry").get<std::string>(), args_from(d, "deploy entry")});
  }
  if (j.contains("txns")) {
    if (!j["txns"].is_array()) throw std::runtime_error("txns must be an array");
    for (const auto& t : j["txns"])
      b.txns.push_back({field(t, "target", "transaction").get<std::string>(),
                        field(t, "method", "transaction").get<std::string>(), args_from(t, "transaction")});
  }
  if (j.contains("workers")) {
    auto w = j["workers"].get<std::int64_t>();
    if (w < 1) throw std::runtime_error("workers must be positive");
    b.workers = static_cast<unsigned>(w);
  }
  if (j.contains("seed")) b.seed = j["seed"].get<std::uint64_t>();
  std::set<std::string> ids;
  for (const auto& d : b.deploy)
    if (!ids.insert(d.id).second) throw std::runtime_error("duplicate deploy id '" + d.id + "'");
  return b;
}
}  // namespace

Block parse_block(std::string_view text) {
  try {
    return parse_block_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("invalid block JSON: ") + e.what());
  }
}

std::string block_json(const Block& b) {
  json j;
  j["deploy"] = json::array();
  for (const auto& d : b.deploy) {
    json args = json::array();
    for (const auto& v : d.args) args.push_back(value_to_json(v));
    j["deploy"].push_back({{"id", d.id}, {"class", d.cls}, {"args", args}});
  }
  j["txns"] = json::array();
  for (const auto& t : b.txns) {
    json args = json::array();
    for (const auto& v : t.args) args.push_back(value_to_json(v));
    j["txns"].push_back({{"target", t.target}, {"method", t.method}, {"args", args}});
  }
  j["workers"] = b.workers;
  j["seed"] = b.seed;
  return j.dump();
}

bool ConflictGraph::has(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

void ConflictGraph::add(int i, int j) {
  if (i == j) return;
  if (i > j) std::swap(i, j);
  auto e = std::make_pair(i, j);
  auto it = std::lower_bound(edges.begin(), edges.end(), e);
  if (it == edges.end() || *it != e) edges.insert(it, e);
}

bool subtrees_meet(RtCtx a, RtCtx b, const OwnershipTree& tree) {
  if (a.is_bot() || b.is_bot()) return false;
  if (a.is_top() || b.is_top()) return true;
  return tree.inside(a.loc, b) || tree.inside(b.loc, a);
}

bool interferes(const RtContract& d1, const RtContract& d2, const OwnershipTree& tree) {
  return subtrees_meet(d1.validity, d2.invalidity, tree) || subtrees_meet(d2.validity, d1.invalidity, tree) ||
         subtrees_meet(d1.invalidity, d2.invalidity, tree);
}

std::string mined_block_json(const MinedBlock& mb) {
  json j;
  j["edges"] = json::array();
  for (const auto& [a, b] : mb.graph.edges) j["edges"].push_back({a, b});
  j["status"] = mb.status;
  j["final_state_hash"] = mb.final_state_hash;
  j["pre_checks"] = mb.pre_checks;
  j["post_checks"] = mb.post_checks;
  return j.dump();
}

MinedBlock parse_mined_block(std::string_view text) try {
  json j = json::parse(text);
  MinedBlock mb;
  mb.status = field(j, "status", "mined block").get<std::vector<std::string>>();
  mb.graph.n = mb.status.size();
  for (const auto& e : field(j, "edges", "mined block")) mb.graph.add(e.at(0).get<int>(), e.at(1).get<int>());
  mb.final_state_hash = field(j, "final_state_hash", "mined block").get<std::string>();
  if (j.contains("pre_checks")) mb.pre_checks = j["pre_checks"].get<std::uint64_t>();
  if (j.contains("post_checks")) mb.post_checks = j["post_checks"].get<std::uint64_t>();
  return mb;
} catch (const json::exception& e) {
  throw std::runtime_error(std::string("invalid mined block JSON: ") + e.what());
}

struct BlockRunner::LevelRun {
  const BlockRunner& runner;
  const Block& b;
  const std::map<std::string, Loc>& ids;

  struct SctRun {
    State state;
    AccessLog access;
    std::string status;
  };

  ExprPtr sct_expr(const SctSpec& t) const {
    std::vector<ExprPtr> args;
    for (std::size_t i = 0; i < t.args.size(); ++i) args.push_back(make(node::Var{"__a" + std::to_string(i)}));
    return make(node::Atomic{std::nullopt, make(node::Call{make(node::Var{"__r"}), t.method, args})});
  }

  SctRun run_one(std::size_t k, const State& base) const {
    SctRun r;
    const SctSpec& t = b.txns[k];
    State s = base;
    s.epoch = static_cast<std::uint32_t>(k + 1);
    s.next_seq = 0;
    RunOptions opts;
    opts.seed = b.seed + k;
    opts.access = &r.access;
    Machine m(runner.program_, std::move(s), opts);
    std::map<std::string, Value> locals{{"__r", Value::ref_(ids.at(t.target))}};
    for (std::size_t i = 0; i < t.args.size(); ++i) locals["__a" + std::to_string(i)] = t.args[i];
    r.status = status_of(m.run_expr(sct_expr(t), std::move(locals)));
    r.state = std::move(m.state());
    return r;
  }

  static void merge(State& acc, const State& base, const SctRun& r) {
    for (const auto& [loc, idx] : r.access.writes) {
      if (idx == kValidSlot || !base.heap.count(loc)) continue;
      acc.heap.at(loc).fields[idx] = r.state.heap.at(loc).fields[idx];
    }
    for (const auto& [loc, o] : r.state.heap) {
      if (base.heap.count(loc)) continue;
      acc.heap.emplace(loc, o);
      acc.tree.add(loc, r.state.tree.owner_of(loc));
      if (r.state.sigma.count(loc)) acc.sigma.insert(loc);
    }
    for (const auto& [loc, idx] : r.access.writes) {
      if (idx != kValidSlot || !base.heap.count(loc)) continue;
      if (r.state.sigma.count(loc))
        acc.sigma.insert(loc);
      else
        acc.sigma.erase(loc);
    }
    acc.events.insert(acc.events.end(), r.state.events.begin() + base.events.size(), r.state.events.end());
    acc.counters.pre_checks += r.state.counters.pre_checks - base.counters.pre_checks;
    acc.counters.post_checks += r.state.counters.post_checks - base.counters.post_checks;
    acc.counters.invariant_evals += r.state.counters.invariant_evals - base.counters.invariant_evals;
  }

  struct Outcome {
    State state;
    std::vector<std::string> status;
    std::vector<std::pair<int, int>> conflicts;  // same-level pairs whose accesses overlapped
  };

  // SCT j runs after every lower-indexed neighbour: level(j) = 1 + max level of those neighbours.
  Outcome run(const ConflictGraph& g, const State& deployed) const {
    std::size_t n = b.txns.size();
    std::vector<int> level(n, 0);
    for (const auto& [i, j] : g.edges) level[j] = std::max(level[j], level[i] + 1);
    Outcome out;
    out.state = deployed;
    out.status.assign(n, "");
    int top = n ? *std::max_element(level.begin(), level.end()) : -1;
    for (int l = 0; l <= top; ++l) {
      std::vector<std::size_t> members;
      for (std::size_t k = 0; k < n; ++k)
        if (level[k] == l) members.push_back(k);
      std::vector<SctRun> runs(members.size());
      const State base = out.state;
      parallel_for(members.size(), b.workers, [&](std::size_t x) { runs[x] = run_one(members[x], base); });
      for (std::size_t x = 0; x < members.size(); ++x)
        for (std::size_t y = x + 1; y < members.size(); ++y)
          if (access_conflict(runs[x].access, runs[y].access))
            out.conflicts.push_back({static_cast<int>(members[x]), static_cast<int>(members[y])});
      if (!out.conflicts.empty()) return out;
      for (std::size_t x = 0; x < members.size(); ++x) {
        merge(out.state, base, runs[x]);
        out.status[members[x]] = runs[x].status;
      }
    }
    return out;
  }
};

BlockRunner::BlockRunner(const CoreProgram& p) : program_(p) {}

State BlockRunner::deploy(const Block& b, std::map<std::string, Loc>& ids) const {
  RunOptions opts;
  opts.seed = b.seed;
  Machine m(program_, State{}, opts);
  for (const auto& d : b.deploy) {
    if (ids.count(d.id)) target_error("duplicate deploy id '" + d.id + "'");
    const ClassDecl* c = program_.ast.find_class(d.cls);
    if (!c) target_error("deploy '" + d.id + "' names unknown class '" + d.cls + "'");
    std::size_t arity = c->ctors.empty() ? 0 : c->ctors.front().params.size();
    if (arity != d.args.size())
      target_error("deploy '" + d.id + "' passes " + std::to_string(d.args.size()) + " arguments, constructor takes " +
                   std::to_string(arity));
    std::vector<ExprPtr> args;
    std::map<std::string, Value> locals;
    for (std::size_t i = 0; i < d.args.size(); ++i) {
      args.push_back(make(node::Var{"__a" + std::to_string(i)}));
      locals["__a" + std::to_string(i)] = d.args[i];
    }
    TypeExpr t = TypeExpr::cls(c->name, std::vector<Context>(c->formals.size(), Context::top()));
    Value v = m.run_expr(make(node::New{t, args}), std::move(locals));
    if (!v.is(Value::Kind::Ref)) target_error("deploy '" + d.id + "' failed: " + to_string(v));
    ids[d.id] = v.ref;
  }
  return std::move(m.state());
}

std::vector<RtContract> BlockRunner::contracts(const Block& b, const State& deployed,
                                               const std::map<std::string, Loc>& ids) const {
  Machine m(program_, deployed, RunOptions{});
  std::vector<RtContract> out;
  for (std::size_t k = 0; k < b.txns.size(); ++k) {
    const SctSpec& t = b.txns[k];
    auto it = ids.find(t.target);
    if (it == ids.end()) target_error("transaction " + std::to_string(k) + " targets unknown id '" + t.target + "'");
    const ObjectRec& o = deployed.heap.at(it->second);
    auto mi = m.table().method(m.table().self_type(*o.cls), t.method);
    if (!mi) target_error("transaction " + std::to_string(k) + ": " + o.cls->name + " has no method '" + t.method + "'");
    if (mi->decl->params.size() != t.args.size())
      target_error("transaction " + std::to_string(k) + ": '" + t.method + "' takes " +
                   std::to_string(mi->decl->params.size()) + " arguments");
    out.push_back(m.method_contract(it->second, t.method));
  }
  return out;
}

ConflictGraph BlockRunner::build_conflict_graph(const Block& b) const {
  std::map<std::string, Loc> ids;
  State deployed = deploy(b, ids);
  auto ds = contracts(b, deployed, ids);
  ConflictGraph g;
  g.n = ds.size();
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j)
      if (interferes(ds[i], ds[j], deployed.tree)) g.add(static_cast<int>(i), static_cast<int>(j));
  return g;
}

MinedBlock BlockRunner::mine(const Block& b) const {
  std::map<std::string, Loc> ids;
  State deployed = deploy(b, ids);
  MinedBlock mb;
  mb.graph = build_conflict_graph(b);
  LevelRun runner{*this, b, ids};
  for (;;) {
    auto out = runner.run(mb.graph, deployed);
    if (out.conflicts.empty()) {
      mb.status = std::move(out.status);
      mb.final_state_hash = state_hash(out.state);
      mb.pre_checks = out.state.counters.pre_checks;
      mb.post_checks = out.state.counters.post_checks;
      return mb;
    }
    for (const auto& [i, j] : out.conflicts) mb.graph.add(i, j);
    ++mb.conflict_restarts;
  }
}

ValidationReport BlockRunner::validate(const MinedBlock& mb, const Block& b) const {
  ValidationReport r;
  std::map<std::string, Loc> ids;
  State deployed = deploy(b, ids);
  ConflictGraph own = build_conflict_graph(b);
  for (const auto& [i, j] : own.edges)
    if (!mb.graph.has(i, j)) {
      r.reason = "E-BG-MISMATCH: interfering pair (" + std::to_string(i) + "," + std::to_string(j) +
                 ") missing from the block graph";
      return r;
    }
  for (const auto& [i, j] : mb.graph.edges)
    if (i < 0 || static_cast<std::size_t>(j) >= b.txns.size()) {
      r.reason = "E-BG-MISMATCH: edge refers to a transaction outside the block";
      return r;
    }
  auto out = LevelRun{*this, b, ids}.run(mb.graph, deployed);
  if (!out.conflicts.empty()) {
    r.reason = "E-BG-MISMATCH: transactions " + std::to_string(out.conflicts[0].first) + " and " +
               std::to_string(out.conflicts[0].second) + " conflicted during re-execution";
    return r;
  }
  r.status = out.status;
  r.final_state_hash = state_hash(out.state);
  if (r.final_state_hash != mb.final_state_hash)
    r.reason = "hash mismatch";
  else if (r.status != mb.status)
    r.reason = "status mismatch";
  r.accepted = r.reason.empty();
  return r;
}

SerialResult BlockRunner::serial_execute(const Block& b, const std::vector<int>& order) const {
  std::map<std::string, Loc> ids;
  State s = deploy(b, ids);
  contracts(b, s, ids);
  LevelRun runner{*this, b, ids};
  SerialResult r;
  r.status.assign(b.txns.size(), "");
  for (int k : order) {
    auto run = runner.run_one(static_cast<std::size_t>(k), s);
    s = std::move(run.state);
    r.status[k] = run.status;
  }
  r.final_state_hash = state_hash(s);
  return r;
}

}  // namespace ov
