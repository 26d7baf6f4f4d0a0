#include <gtest/gtest.h>

#include <random>

#include "gen/generators.hpp"
#include "ov/ownership.hpp"
#include "support.hpp"

using namespace ov;

namespace {

ContextEnv env_with(std::vector<std::string> formals, std::vector<WhereConstraint> where = {}) {
  ContextEnv env;
  env.formals = std::move(formals);
  env.constraints = std::move(where);
  env.class_name = "C";
  return env;
}

// Reflexive-transitive closure over the finite context universe, computed with Warshall's algorithm.
std::vector<std::vector<bool>> closure_oracle(const ContextEnv& env, const std::vector<Context>& universe) {
  std::size_t n = universe.size();
  auto idx = [&](const Context& k) {
    for (std::size_t i = 0; i < n; ++i)
      if (universe[i] == k) return i;
    return n;
  };
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    r[i][i] = true;
    r[idx(Context::bot())][i] = true;
    r[i][idx(Context::top())] = true;
  }
  if (!env.formals.empty()) r[idx(Context::this_())][idx(Context::param(env.formals[0]))] = true;
  for (const auto& w : env.constraints) r[idx(w.lhs)][idx(w.rhs)] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  return r;
}

}  // namespace

TEST(CtxWf, Examples) {
  ContextEnv env = env_with({"o"});
  EXPECT_TRUE(ctx_wf(env, Context::param("o")));
  EXPECT_FALSE(ctx_wf(env, Context::any()));
  EXPECT_TRUE(ctx_wf(env, Context::bot()));
  EXPECT_TRUE(ctx_wf(env, Context::top()));
  EXPECT_TRUE(ctx_wf(env, Context::this_()));
  EXPECT_FALSE(ctx_wf(env, Context::param("p")));
  EXPECT_FALSE(ctx_wf(env, Context::existential()));
}

TEST(CtxWf, MainHasNoThis) {
  ContextEnv env = ContextEnv::for_main();
  EXPECT_FALSE(ctx_wf(env, Context::this_()));
  EXPECT_TRUE(ctx_wf(env, Context::top()));
}

TEST(Inside, Examples) {
  ContextEnv env = env_with({"o"});
  EXPECT_TRUE(inside(env, Context::this_(), Context::param("o")));
  EXPECT_FALSE(inside(env, Context::top(), Context::this_()));
  EXPECT_FALSE(inside(env, Context::param("o"), Context::this_()));
}

TEST(Inside, StrictConstraintIsOneWay) {
  ContextEnv env = env_with({"o", "a", "b"}, {{Context::param("a"), Relation::Strict, Context::param("b")}});
  EXPECT_TRUE(inside(env, Context::param("a"), Context::param("b")));
  EXPECT_FALSE(inside(env, Context::param("b"), Context::param("a")));
  EXPECT_TRUE(strictly_inside(env, Context::param("a"), Context::param("b")));
  EXPECT_FALSE(strictly_inside(env, Context::param("a"), Context::param("a")));
  EXPECT_TRUE(strictly_inside(env, Context::this_(), Context::param("o")));
}

// inside agrees with a Warshall closure oracle and is a preorder with Bot least and Top greatest,
// over every environment with up to 4 parameters and a random sample of up to 6 constraints.
TEST(Inside, PreorderAgainstClosureOracle) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> names = {"o", "p", "q", "r"};
  int envs = 0;
  for (std::size_t np = 1; np <= 4; ++np) {
    std::vector<std::string> formals(names.begin(), names.begin() + static_cast<long>(np));
    std::vector<Context> universe = {Context::bot(), Context::top(), Context::this_()};
    for (const auto& f : formals) universe.push_back(Context::param(f));
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<WhereConstraint> where;
      std::size_t nc = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
      std::uniform_int_distribution<std::size_t> any(0, universe.size() - 1);
      for (std::size_t i = 0; i < nc; ++i)
        where.push_back({universe[any(rng)], (rng() & 1) ? Relation::Strict : Relation::NonStrict, universe[any(rng)]});
      ContextEnv env = env_with(formals, where);
      auto oracle = closure_oracle(env, universe);
      for (std::size_t i = 0; i < universe.size(); ++i) {
        EXPECT_TRUE(inside(env, universe[i], universe[i]));
        EXPECT_TRUE(inside(env, Context::bot(), universe[i]));
        EXPECT_TRUE(inside(env, universe[i], Context::top()));
        for (std::size_t j = 0; j < universe.size(); ++j) {
          ASSERT_EQ(inside(env, universe[i], universe[j]), oracle[i][j])
              << to_string(universe[i]) << " <= " << to_string(universe[j]) << " with " << nc << " constraints";
          for (std::size_t k = 0; k < universe.size(); ++k)
            if (inside(env, universe[i], universe[j]) && inside(env, universe[j], universe[k]))
              ASSERT_TRUE(inside(env, universe[i], universe[k]));
        }
      }
      ++envs;
    }
  }
  EXPECT_EQ(envs, 800);
}

TEST(Substitute, FieldTypeOwnedByThis) {
  TypeExpr field = TypeExpr::cls("Account", {Context::param("X1")});
  TypeExpr got = substitute(field, {"X1"}, {Context::this_()}, Context::this_());
  EXPECT_EQ(got, TypeExpr::cls("Account", {Context::this_()}));
}

TEST(Substitute, ExistentialThisImage) {
  Contract d{Context::this_(), Context::this_()};
  Contract got = substitute(d, {"o"}, {Context::param("o")}, Context::existential());
  EXPECT_EQ(got, (Contract{Context::existential(), Context::existential()}));
}

TEST(Substitute, BaseTypesUnchanged) {
  EXPECT_EQ(substitute(TypeExpr::int_(), {"o"}, {Context::top()}, Context::this_()), TypeExpr::int_());
  EXPECT_EQ(substitute(TypeExpr::bool_(), {"o"}, {Context::top()}, Context::this_()), TypeExpr::bool_());
}

TEST(Substitute, PositionalAndArity) {
  TypeExpr t = TypeExpr::cls("Pair", {Context::param("b"), Context::param("a"), Context::this_()});
  TypeExpr got = substitute(t, {"a", "b"}, {Context::top(), Context::bot()}, Context::param("o"));
  EXPECT_EQ(got, TypeExpr::cls("Pair", {Context::bot(), Context::top(), Context::param("o")}));
  try {
    substitute(t, {"a", "b"}, {Context::top()}, Context::this_());
    FAIL() << "expected E-CTX-ARITY";
  } catch (const DiagnosticError& e) {
    EXPECT_EQ(e.diag().code, "E-CTX-ARITY");
  }
}

TEST(OwnerBound, Examples) {
  EXPECT_EQ(owner_bound(TypeExpr::cls("Account", {Context::this_()})), Context::this_());
  EXPECT_EQ(owner_bound(TypeExpr::cls("C", {Context::top()})), Context::top());
  try {
    owner_bound(TypeExpr::int_());
    FAIL() << "expected E-NOT-CLASS";
  } catch (const DiagnosticError& e) {
    EXPECT_EQ(e.diag().code, "E-NOT-CLASS");
  }
}

TEST(OwnershipTree, ReflexiveAndTopReachesAll) {
  OwnershipTree t;
  Loc a = make_loc(0, 0), b = make_loc(0, 1);
  t.add(a, RtCtx::top());
  t.add(b, RtCtx::at(a));
  EXPECT_TRUE(t.inside(b, RtCtx::at(b)));
  EXPECT_TRUE(t.inside(b, RtCtx::at(a)));
  EXPECT_FALSE(t.inside(a, RtCtx::at(b)));
  EXPECT_TRUE(t.inside(a, RtCtx::top()));
  EXPECT_TRUE(t.inside(b, RtCtx::top()));
  EXPECT_FALSE(t.inside(a, RtCtx::bot()));
}

TEST(OwnershipTree, SubtreeBotEmptyTopAll) {
  OwnershipTree t;
  for (std::uint32_t i = 0; i < 5; ++i) t.add(make_loc(0, i), i == 0 ? RtCtx::top() : RtCtx::at(make_loc(0, i / 2)));
  EXPECT_TRUE(t.subtree(RtCtx::bot()).empty());
  EXPECT_EQ(t.subtree(RtCtx::top()), t.locations());
  EXPECT_EQ(t.subtree(RtCtx::top()).size(), 5u);
}

TEST(OwnershipTree, UnknownLocationIsDangling) {
  OwnershipTree t;
  t.add(make_loc(0, 0), RtCtx::top());
  try {
    t.inside(make_loc(0, 9), RtCtx::top());
    FAIL() << "expected E-DANGLING";
  } catch (const DiagnosticError& e) {
    EXPECT_EQ(e.diag().code, "E-DANGLING");
  }
  EXPECT_THROW(t.owner_of(make_loc(3, 3)), DiagnosticError);
}

TEST(OwnershipTree, OwnerIsFixed) {
  OwnershipTree t;
  Loc a = make_loc(0, 0), b = make_loc(0, 1);
  t.add(a, RtCtx::top());
  t.add(b, RtCtx::at(a));
  EXPECT_THROW(t.add(b, RtCtx::top()), std::logic_error);
  EXPECT_EQ(t.owner_of(b), RtCtx::at(a));
  EXPECT_THROW(t.add(make_loc(0, 2), RtCtx::bot()), std::logic_error);
}

TEST(OwnershipTree, AncestorsInnermostFirst) {
  OwnershipTree t;
  Loc a = make_loc(0, 0), b = make_loc(0, 1), c = make_loc(0, 2);
  t.add(a, RtCtx::top());
  t.add(b, RtCtx::at(a));
  t.add(c, RtCtx::at(b));
  EXPECT_EQ(t.ancestors(c), (std::vector<Loc>{c, b, a}));
}

// Listing-16 style heap built by the interpreter: the account is owned by the customer.
TEST(OwnershipTree, CustomerOwnsAccountInInterpretedHeap) {
  ov::Compiled c = ovtest::compile_clean(ovtest::read("corpus/positive/bank.ov"));
  Machine m(*c.core);
  m.run();
  const State& s = m.state();
  std::optional<Loc> cust, acct;
  for (const auto& [l, o] : s.heap) {
    if (o.cls->name == "Customer") cust = l;
    if (o.cls->name == "Account") acct = l;
  }
  ASSERT_TRUE(cust && acct);
  EXPECT_TRUE(s.tree.inside(*acct, RtCtx::at(*cust)));
  // Oracle: follow the owner recorded in each heap object.
  std::vector<Loc> scan;
  for (const auto& [l, o] : s.heap) {
    RtCtx k = RtCtx::at(l);
    while (k.is_loc() && k.loc != *cust) k = s.heap.at(k.loc).args.at(0);
    if (k.is_loc()) scan.push_back(l);
  }
  EXPECT_EQ(s.tree.subtree(RtCtx::at(*cust)), scan);
  EXPECT_EQ(scan, (std::vector<Loc>{*cust, *acct}));
}

// runtime inside(l,k) <=> l in subtree(k) on random heaps of up to 50 objects, against a parent-array scan.
TEST(OwnershipTree, InsideMatchesSubtreeEnumeration) {
  ovgen::Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    ovgen::RandomTree rt = ovgen::random_tree(rng, 50);
    std::vector<RtCtx> ks = {RtCtx::top(), RtCtx::bot()};
    for (Loc l : rt.tree.locations()) ks.push_back(RtCtx::at(l));
    for (RtCtx k : ks) {
      std::set<Loc> oracle = ovgen::enumerate_subtree(rt, k);
      std::vector<Loc> sub = rt.tree.subtree(k);
      ASSERT_EQ(std::set<Loc>(sub.begin(), sub.end()), oracle);
      ASSERT_TRUE(std::is_sorted(sub.begin(), sub.end()));
      for (Loc l : rt.tree.locations()) ASSERT_EQ(rt.tree.inside(l, k), oracle.count(l) == 1);
    }
  }
}
