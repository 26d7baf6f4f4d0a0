#include <gtest/gtest.h>

#include <map>
#include <memory>

#include "gen/generators.hpp"
#include "ov/desugar.hpp"
#include "ov/parser.hpp"
#include "ov/runtime.hpp"
#include "support.hpp"

using namespace ov;

namespace {

// Keeps the compiled program at a fixed address for the machines that reference it.
struct Prog {
  ov::Compiled c;
  explicit Prog(const std::string& src) : c(ovtest::compile_clean(src)) {}
  const CoreProgram& core() const { return *c.core; }
};

Loc find(const State& s, const std::string& cls, std::size_t nth = 0) {
  for (const auto& [l, o] : s.heap)
    if (o.cls->name == cls && nth-- == 0) return l;
  throw std::runtime_error("no " + cls + " in heap");
}

BigInt int_field(const State& s, Loc l, const std::string& f) {
  const ObjectRec& o = s.heap.at(l);
  for (std::size_t i = 0; i < o.field_names->size(); ++i)
    if ((*o.field_names)[i] == f) return o.fields[i].i;
  throw std::runtime_error("no field " + f);
}

void drain(Machine& m) {
  if (m.thread_count() == 0) m.load_main();
  while (m.step()) {
  }
}

const char* kBank = R"(
class Account[o] {
    int amount;
    inv amount >= 0;
    Account(int a) { amount = a; }
    void deposit(int x) <this,this> { amount += x; }
    void withdraw(int x) <this,this> { amount -= x; }
    int balance() <this,bot> { return amount; }
    void note() <bot,this> { amount += 0; }
}
class Customer[o] {
    Account<this> a;
    int logins;
    inv a != null && a.amount >= 10;
    Customer(int opening) { a = new Account<this>(opening); }
    void add(int x) <this,this> { a.deposit(x); }
    void safeWithdraw(int amt) <this,this> { atomic a.withdraw(amt); }
    int peek() <this,bot> { return atomic a.balance(); }
    void twice(int x) <this,this> {
        logins = 5;
        atomic a.withdraw(x);
        logins = 7;
    }
    void spawnTwo() <this,this> {
        new Account<this>(1);
        new Account<this>(2);
        require(false);
    }
}
)";

std::string with_main(const std::string& body) { return std::string(kBank) + "main {\n" + body + "\n}\n"; }

}  // namespace

TEST(Load, EmptyMain) {
  Prog p("main { }");
  Machine m(p.core());
  m.load_main();
  EXPECT_EQ(m.thread_count(), 1u);
  EXPECT_TRUE(m.state().heap.empty());
  FinalReport r = m.run();
  EXPECT_TRUE(r.lemma3);
  EXPECT_EQ(r.objects, 0u);
  EXPECT_EQ(r.state_hash, "affd791ef530ff3dbdafbfe564dfdaf3ca2d081fdd3ddf5e0a728cc226e22e45");
}

TEST(Load, RootFrameIsTopTop) {
  // Writes outside any atomic run under the root frame, which may modify anything.
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\nc.add(5);"));
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_TRUE(r.lemma3);
  EXPECT_EQ(int_field(m.state(), find(m.state(), "Account"), "amount"), 55);
}

TEST(Step, SeqDiscardsValue) {
  Prog p("main { }");
  Machine m(p.core());
  Value v = m.run_expr(seq(int_lit(1), int_lit(2)), {});
  EXPECT_EQ(v, Value::int_(2));
}

TEST(Step, TerminalWhenAllValues) {
  Prog p("main { 1; }");
  Machine m(p.core());
  drain(m);
  EXPECT_FALSE(m.step());
  EXPECT_FALSE(m.step());
}

TEST(Begin, TopLevelContractBindsThisToTarget) {
  Prog p(with_main("Account<top> a = new Account<top>(10);\natomic a.withdraw(5);"));
  std::vector<RtContract> seen;
  RunOptions o;
  o.before_begin = [&](const Machine&, int, const RtContract& d) { seen.push_back(d); };
  Machine m(p.core(), o);
  m.run();
  ASSERT_EQ(seen.size(), 1u);
  Loc a = find(m.state(), "Account");
  EXPECT_EQ(seen[0], (RtContract{RtCtx::at(a), RtCtx::at(a)}));
}

// An account written outside any transaction leaves Σ; a transaction with V=Bot does not re-check it,
// one with V=this does.
TEST(Begin, BotValidityPerformsNoPreChecks) {
  Prog p(with_main("Account<top> a = new Account<top>(10);\na.deposit(1);\natomic a.note();"));
  Machine m(p.core());
  m.load_main();
  std::uint64_t pre_before = 0;
  bool at_begin = false;
  while (m.step()) {
    if (!at_begin && m.lock_held()) {
      at_begin = true;
      pre_before = m.state().counters.pre_checks;
    }
  }
  ASSERT_TRUE(at_begin);
  EXPECT_EQ(pre_before, 0u);
  EXPECT_EQ(m.state().counters.pre_checks, 0u);

  Prog q(with_main("Account<top> a = new Account<top>(10);\na.deposit(1);\natomic a.withdraw(1);"));
  Machine m2(q.core());
  drain(m2);
  EXPECT_EQ(m2.state().counters.pre_checks, 1u);
}

// Start-check set of a nested frame is V_child ∩ I_parent: a read of the owned account under a
// read-only parent needs no checks; after the parent wrote the account it needs exactly one.
TEST(Begin, NestedStartSetIsChildValidityWithinParentInvalidity) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\natomic c.peek();"));
  std::vector<std::uint64_t> pre_at_begin;
  RunOptions o;
  o.before_begin = [&](const Machine& m, int, const RtContract&) { pre_at_begin.push_back(m.state().counters.pre_checks); };
  Machine m(p.core(), o);
  drain(m);
  ASSERT_EQ(pre_at_begin.size(), 2u);
  EXPECT_EQ(m.state().counters.pre_checks, pre_at_begin[1]);

  Prog q(with_main("Customer<top> c = new Customer<top>(50);\natomic c.twice(3);"));
  pre_at_begin.clear();
  Machine m2(q.core(), o);
  drain(m2);
  ASSERT_EQ(pre_at_begin.size(), 2u);
  // The child frame <a,a> sits inside the parent's I=<c>; a was never written, so it stays in Σ.
  EXPECT_EQ(m2.state().counters.pre_checks, pre_at_begin[1]);
}

TEST(Write, AncestorsLeaveSigma) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\nc.add(5);"));
  Machine m(p.core());
  drain(m);
  const State& s = m.state();
  Loc c = find(s, "Customer"), a = find(s, "Account");
  EXPECT_FALSE(s.sigma.count(a));
  EXPECT_FALSE(s.sigma.count(c));
  // Every object still in Σ satisfies its invariant.
  for (Loc l : s.sigma) EXPECT_TRUE(m.eval_invariant(l));
}

TEST(Write, FreshObjectWritableOutsideInvalidity) {
  Prog p(R"(class Leaf[o] { int v; Leaf(int x) { v = x; } }
class Box[o] {
    int n;
    int make() <this,bot> { new Leaf<this>(3); return 1; }
}
main { Box<top> b = new Box<top>(); atomic b.make(); })");
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.objects, 2u);
  EXPECT_EQ(int_field(m.state(), find(m.state(), "Leaf"), "v"), 3);
}

// The checker would reject this body; the interpreter's guard must still catch the write.
TEST(Write, GuardRejectsWriteOutsideInvalidity) {
  ParseResult r = parse_program(R"(class C[o] { int f; void m() <this,bot> { f = 1; } }
main { C<top> c = new C<top>(); atomic c.m(); })");
  ASSERT_TRUE(r.program);
  CoreProgram core = desugar(*r.program);
  Machine m(core);
  try {
    m.run();
    FAIL() << "expected E-EFFECT";
  } catch (const RuntimeFault& e) {
    EXPECT_EQ(e.diag().code, "E-EFFECT");
  }
}

TEST(Commit, ValidWithdrawEntersSigma) {
  Prog p(with_main("Account<top> a = new Account<top>(10);\natomic a.withdraw(4);"));
  Machine m(p.core());
  drain(m);
  Loc a = find(m.state(), "Account");
  BigInt amount = int_field(m.state(), a, "amount");
  EXPECT_EQ(amount, 6);
  EXPECT_TRUE(amount >= 0);
  EXPECT_TRUE(m.state().sigma.count(a));
  EXPECT_TRUE(m.failures().empty());
}

TEST(Commit, DisjointValidityAndInvalidityNeedsNoRevalidation) {
  Prog p(with_main("Account<top> a = new Account<top>(10);\natomic a.balance();"));
  Machine m(p.core());
  m.load_main();
  std::uint64_t post_at_begin = 0;
  bool seen = false;
  while (m.step())
    if (!seen && m.lock_held()) {
      seen = true;
      post_at_begin = m.state().counters.post_checks;
    }
  ASSERT_TRUE(seen);
  EXPECT_EQ(m.state().counters.post_checks, post_at_begin);
}

TEST(Abort, StorageStoreZeroRestoresHash) {
  Prog p(R"(class Storage[o] {
    uint256 number;
    inv number > 0;
    Storage(uint256 n) { number = n; }
    void store(uint256 num) <this,this> { number = num; }
}
main {
    Storage<top> s = new Storage<top>(1);
    atomic s.store(5);
    atomic s.store(0);
})");
  std::vector<std::string> before;
  std::vector<std::pair<std::string, std::string>> aborts;
  RunOptions o;
  o.before_begin = [&](const Machine& m, int, const RtContract&) { before.push_back(state_hash(m.state())); };
  o.after_abort = [&](const Machine& m, int, const std::string& why) { aborts.push_back({why, state_hash(m.state())}); };
  Machine m(p.core(), o);
  FinalReport r = m.run();
  ASSERT_EQ(before.size(), 2u);
  ASSERT_EQ(aborts.size(), 1u);
  EXPECT_EQ(aborts[0].first, kPostFail);
  EXPECT_EQ(aborts[0].second, before[1]);
  EXPECT_EQ(int_field(m.state(), find(m.state(), "Storage"), "number"), 5);
  EXPECT_TRUE(r.lemma3);
}

TEST(Abort, CreatedObjectsRemoved) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\natomic c.spawnTwo();"));
  Machine m(p.core());
  m.load_main();
  std::size_t peak = 0, at_begin = 0;
  bool seen = false;
  while (m.step()) {
    if (!seen && m.lock_held()) {
      seen = true;
      at_begin = m.state().heap.size();
    }
    peak = std::max(peak, m.state().heap.size());
  }
  EXPECT_EQ(at_begin, 2u);
  EXPECT_EQ(peak, 4u);
  EXPECT_EQ(m.state().heap.size(), 2u);
  EXPECT_EQ(m.state().tree.size(), 2u);
  ASSERT_EQ(m.failures().size(), 1u);
  EXPECT_EQ(m.failures()[0], std::string("t0:") + kRequire);
}

TEST(Abort, ParentRevalidationFailureUndoesChildCommit) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\natomic c.twice(45);"));
  Machine m(p.core());
  FinalReport r = m.run();
  const State& s = m.state();
  Loc c = find(s, "Customer"), a = find(s, "Account");
  // The child withdraw would leave 5 < 10 for the customer, but only the account is revalidated
  // by the child (amount 5 >= 0 holds). The parent then fails revalidation of the customer.
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0], std::string("t0:") + kPostFail);
  EXPECT_EQ(int_field(s, a, "amount"), 50);
  EXPECT_EQ(int_field(s, c, "logins"), 0);
}

TEST(Abort, NestedChildFailureOnlyUndoesChild) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\natomic c.twice(60);"));
  Machine m(p.core());
  FinalReport r = m.run();
  const State& s = m.state();
  // The child would drive the account negative and aborts; the parent continues and commits.
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0], std::string("t0:") + kPostFail);
  EXPECT_EQ(int_field(s, find(s, "Account"), "amount"), 50);
  EXPECT_EQ(int_field(s, find(s, "Customer"), "logins"), 7);
  EXPECT_TRUE(r.lemma3);
}

TEST(EvalInvariant, Examples) {
  Prog p(R"(class Account[o] { int amount; inv amount >= 0; Account(int a) { amount = a; } }
class Plain[o] { int x; }
class Customer[o] { Account<this> a; inv a != null && a.amount >= 10; }
main {
    Account<top> a = new Account<top>(5);
    Plain<top> p = new Plain<top>();
})");
  Machine m(p.core());
  drain(m);
  Loc a = find(m.state(), "Account"), pl = find(m.state(), "Plain");
  std::uint64_t evals = m.state().counters.invariant_evals;
  EXPECT_TRUE(m.eval_invariant(a));
  EXPECT_TRUE(m.eval_invariant(pl));
  EXPECT_EQ(m.state().counters.invariant_evals, evals + 2);

  // A customer with a null account: construction itself fails the invariant, so build it by hand.
  State& s = m.state();
  Loc cust = make_loc(0, 99);
  ObjectRec rec;
  rec.cls = p.core().ast.find_class("Customer");
  rec.args = {RtCtx::top()};
  rec.fields = {Value::null()};
  rec.field_names = std::make_shared<const std::vector<std::string>>(std::vector<std::string>{"a"});
  s.tree.add(cust, RtCtx::top());
  s.heap.emplace(cust, std::move(rec));
  EXPECT_FALSE(m.eval_invariant(cust));
}

TEST(AssertValid, Examples) {
  Prog p(with_main("Customer<top> c = new Customer<top>(50);\nc.add(1);\nbool ok = valid c;"));
  Machine m(p.core());
  drain(m);
  Loc c = find(m.state(), "Customer"), a = find(m.state(), "Account");
  EXPECT_TRUE(m.state().sigma.count(c));
  EXPECT_TRUE(m.state().sigma.count(a));
  EXPECT_TRUE(m.assert_valid(c));

  Prog q(with_main("Customer<top> c = new Customer<top>(50);\nc.add(-60);"));
  Machine m2(q.core());
  drain(m2);
  Loc c2 = find(m2.state(), "Customer"), a2 = find(m2.state(), "Account");
  EXPECT_EQ(int_field(m2.state(), a2, "amount"), -10);
  EXPECT_FALSE(m2.assert_valid(c2));
  EXPECT_FALSE(m2.state().sigma.count(a2));
  EXPECT_FALSE(m2.state().sigma.count(c2));

  Prog leaf("class Plain[o] { int x; }\nmain { Plain<top> p = new Plain<top>(); }");
  Machine m3(leaf.core());
  drain(m3);
  EXPECT_TRUE(m3.assert_valid(find(m3.state(), "Plain")));
}

TEST(Run, BankProgramEndsAllValid) {
  Prog p(ovtest::read("corpus/positive/bank.ov"));
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_TRUE(r.lemma3);
  EXPECT_EQ(r.objects, r.valid);
  // Scan oracle: every object's invariant holds in the final heap.
  for (const auto& [l, o] : m.state().heap) EXPECT_TRUE(m.eval_invariant(l));
}

TEST(Run, WithdrawBelowZeroFlagged) {
  Prog p(ovtest::read("corpus/positive/withdraw_below_zero.ov"));
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_FALSE(r.lemma3);
  EXPECT_FALSE(r.invalid.empty());
  EXPECT_LT(r.valid, r.objects);
}

TEST(Run, FuelExhaustion) {
  Prog p(ovtest::read("corpus/positive/bank.ov"));
  RunOptions o;
  o.fuel = 1;
  Machine m(p.core(), o);
  FinalReport r = m.run();
  EXPECT_EQ(r.outcome, FinalReport::Outcome::FuelExhausted);
  EXPECT_FALSE(r.lemma3);
}

TEST(Run, RequireOutsideTransactionTerminatesThread) {
  Prog p(with_main("Account<top> a = new Account<top>(3);\nrequire(false);\natomic a.deposit(1);"));
  Machine m(p.core());
  FinalReport r = m.run();
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0], std::string("t0:") + kRequire);
  EXPECT_EQ(int_field(m.state(), find(m.state(), "Account"), "amount"), 3);
}

TEST(Run, DivisionByZeroAndNullAbortTransaction) {
  Prog p(R"(class A[o] {
    int v;
    void div(int x) <this,this> { v = 10 / x; }
    int q(int x) <this,bot> { return 10 / x; }
}
main {
    A<top> a = new A<top>();
    atomic a.div(0);
    A<top> z = null;
    atomic <top,bot> { z.q(1); }
    atomic a.div(5);
})");
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_EQ(r.failures, (std::vector<std::string>{std::string("t0:") + kDivZero, std::string("t0:") + kNullDeref}));
  EXPECT_EQ(int_field(m.state(), find(m.state(), "A"), "v"), 2);
}

TEST(StateHash, CanonicalFormAndDigest) {
  Prog p(R"(class Account[o] { int amount; Account(int x) { amount = x; } }
class Customer[o] {
    Account<this> a;
    bool ok;
    Customer() { a = new Account<this>(7); ok = true; }
}
main { Customer<top> c = new Customer<top>(); Account<top> n = null; })");
  Machine m(p.core());
  FinalReport r = m.run();
  EXPECT_EQ(canonical_state(m.state()), "l0=Customer{a=l1,ok=true};l1=Account{amount=7};|valid=0,1");
  EXPECT_EQ(r.state_hash, "51e40fd1b8f9af5f09a888e960c3fbc0b6d1b88c8096164c8cb4aa4059e69c35");
}

TEST(StateHash, IndependentOfEpoch) {
  Prog p("class A[o] { int v; }\nmain { A<top> a = new A<top>(); }");
  State s0, s5;
  s5.epoch = 5;
  Machine m0(p.core(), s0, {});
  Machine m5(p.core(), s5, {});
  EXPECT_EQ(m0.run().state_hash, m5.run().state_hash);
}

TEST(Determinism, SameSeedSameReport) {
  Prog p(ovtest::read("corpus/positive/concurrent.ov"));
  for (std::uint64_t seed : {0u, 1u, 17u}) {
    RunOptions o;
    o.seed = seed;
    Machine a(p.core(), o), b(p.core(), o);
    FinalReport ra = a.run(), rb = b.run();
    EXPECT_EQ(ra.state_hash, rb.state_hash);
    EXPECT_EQ(ra.steps, rb.steps);
    EXPECT_EQ(ra.events, rb.events);
  }
}

// While a thread holds the lock, no other thread is stepped.
TEST(Isolation, OnlyLockHolderSteps) {
  std::vector<std::string> sources = {ovtest::read("corpus/positive/concurrent.ov")};
  ovgen::Rng rng(99);
  for (int i = 0; i < 60; ++i) sources.push_back(ovgen::random_program(rng));
  int locked_steps = 0;
  for (const auto& src : sources) {
    Prog p(src);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      RunOptions o;
      o.seed = seed;
      Machine m(p.core(), o);
      m.load_main();
      for (;;) {
        bool held = m.lock_held();
        int holder = m.lock_holder();
        if (!m.step()) break;
        if (held) {
          ++locked_steps;
          ASSERT_EQ(m.last_stepped(), holder);
        }
      }
    }
  }
  EXPECT_GT(locked_steps, 1000);
}

// An aborted transaction leaves the state exactly as it was when the transaction began.
TEST(Atomicity, AbortRestoresStateOnViolatingPrograms) {
  ovgen::Rng rng(11);
  int aborts = 0;
  for (int i = 0; i < 150; ++i) {
    Prog p(ovgen::random_violating_program(rng));
    std::map<int, std::vector<std::string>> stack;
    RunOptions o;
    o.seed = i;
    o.before_begin = [&](const Machine& m, int tid, const RtContract&) { stack[tid].push_back(state_hash(m.state())); };
    o.after_commit = [&](const Machine&, int tid) { stack[tid].pop_back(); };
    o.after_abort = [&](const Machine& m, int tid, const std::string&) {
      ASSERT_FALSE(stack[tid].empty());
      EXPECT_EQ(state_hash(m.state()), stack[tid].back());
      stack[tid].pop_back();
      ++aborts;
    };
    Machine m(p.core(), o);
    m.run();
    for (const auto& [tid, st] : stack) EXPECT_TRUE(st.empty());
  }
  EXPECT_GT(aborts, 150);
}

// After every top-level commit or abort, every member of Σ satisfies its invariant.
TEST(QuiescentSoundness, DebugSigmaOverCorpusAndGeneratedPrograms) {
  std::vector<std::string> sources;
  for (const auto& f : ovtest::corpus("corpus/positive")) sources.push_back(ovtest::read(f));
  ovgen::Rng rng(3);
  for (int i = 0; i < 200; ++i) sources.push_back(ovgen::random_program(rng));
  for (const auto& src : sources) {
    Prog p(src);
    RunOptions o;
    o.debug_sigma = true;
    Machine m(p.core(), o);
    EXPECT_NO_THROW(m.run());
  }
}

TEST(FinalValidity, CorpusProgramsWithoutValidityErrors) {
  for (const auto& f : ovtest::corpus("corpus/positive")) {
    SCOPED_TRACE(f);
    Prog p(ovtest::read(f));
    Machine m(p.core());
    FinalReport r = m.run();
    ASSERT_EQ(r.outcome, FinalReport::Outcome::Completed);
    std::set<Loc> dom;
    for (const auto& [l, o] : m.state().heap) dom.insert(l);
    if (r.invalid.empty()) {
      EXPECT_TRUE(r.lemma3);
      EXPECT_EQ(m.state().sigma, dom);
    } else {
      EXPECT_FALSE(r.lemma3);
      EXPECT_NE(m.state().sigma, dom);
    }
  }
}

TEST(CheckCount, NaiveDominatesOnCorpus) {
  for (const auto& f : ovtest::corpus("corpus/positive")) {
    SCOPED_TRACE(f);
    Prog p(ovtest::read(f));
    Machine fast(p.core());
    RunOptions o;
    o.naive = true;
    Machine naive(p.core(), o);
    FinalReport a = fast.run(), b = naive.run();
    EXPECT_LE(a.counters.pre_checks + a.counters.post_checks, b.counters.pre_checks + b.counters.post_checks);
    EXPECT_EQ(a.state_hash, b.state_hash);
  }
}

// The read path of an account needs no commit revalidation; naive mode re-checks on the way out.
TEST(CheckCount, AccountReadPath) {
  Prog p(with_main("Account<top> a = new Account<top>(10);\natomic a.balance();"));
  auto post_during_tx = [&](bool naive) {
    RunOptions o;
    o.naive = naive;
    Machine m(p.core(), o);
    m.load_main();
    std::uint64_t at_begin = 0, at_end = 0;
    bool inside = false;
    while (m.step()) {
      if (!inside && m.lock_held()) {
        inside = true;
        at_begin = m.state().counters.post_checks;
      }
      if (inside && !m.lock_held()) {
        at_end = m.state().counters.post_checks;
        break;
      }
    }
    return at_end - at_begin;
  };
  EXPECT_EQ(post_during_tx(false), 0u);
  EXPECT_GE(post_during_tx(true), 1u);
}
