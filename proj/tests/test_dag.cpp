#include "rpmdag/dag.hpp"
#include "rpmdag/dag_text.hpp"
#include "rpmdag/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

using namespace rpmdag;
using rpmdag::testing::make_block;

namespace {

struct Diamond {
  BlockDag dag;
  BlockId g, a, b, c;
};

Diamond diamond() {
  Diamond d;
  Block g = make_block({}, "G");
  Block a = make_block({g.id}, "A");
  Block b = make_block({g.id}, "B");
  Block c = make_block({a.id, b.id}, "C");
  for (const auto& blk : {g, a, b, c}) d.dag.add_block(blk);
  d.g = g.id;
  d.a = a.id;
  d.b = b.id;
  d.c = c.id;
  return d;
}

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an rpmdag::Error";
  return Errc::InvalidInput;
}

}  // namespace

TEST(BlockId, DeterministicAndContentSensitive) {
  Block a = make_block({}, "same");
  Block b = make_block({}, "same");
  Block c = make_block({}, "other");
  EXPECT_EQ(a.id, b.id);
  EXPECT_NE(a.id, c.id);
  EXPECT_EQ(a.id, a.compute_id());
}

TEST(BlockId, ParentOrderDoesNotChangeId) {
  Block g = make_block({}, "g");
  Block x = make_block({g.id}, "x");
  Block y = make_block({g.id}, "y");
  EXPECT_EQ(make_block({x.id, y.id}, "z").id, make_block({y.id, x.id}, "z").id);
}

TEST(AddBlock, GenesisBecomesOnlyTip) {
  BlockDag dag;
  Block g = make_block({}, "G");
  dag.add_block(g);
  EXPECT_EQ(dag.tips(), std::set<BlockId>{g.id});
  EXPECT_EQ(dag.genesis(), g.id);
}

TEST(AddBlock, ChainExtensionMovesTip) {
  BlockDag dag;
  Block g = make_block({}, "G");
  Block a = make_block({g.id}, "A");
  dag.add_block(g);
  dag.add_block(a);
  EXPECT_EQ(dag.tips(), std::set<BlockId>{a.id});
}

TEST(AddBlock, Errors) {
  BlockDag dag;
  Block g = make_block({}, "G");
  Block y = make_block({g.id}, "Y");
  Block x = make_block({y.id}, "X");
  dag.add_block(g);
  EXPECT_EQ(error_of([&] { dag.add_block(x); }), Errc::MissingParent);
  EXPECT_EQ(error_of([&] { dag.add_block(g); }), Errc::DuplicateBlock);
  EXPECT_EQ(error_of([&] { dag.add_block(make_block({}, "G2")); }), Errc::InvalidInput);

  Block forged = make_block({g.id}, "F");
  forged.creator = "someone else";
  EXPECT_EQ(error_of([&] { dag.add_block(forged); }), Errc::InvalidInput);

  BlockDag empty;
  EXPECT_EQ(error_of([&] { empty.add_block(y); }), Errc::MissingParent);
  EXPECT_EQ(error_of([&] { (void)empty.past(g.id); }), Errc::UnknownBlock);
}

TEST(Reachability, PastFutureAnticoneExamples) {
  auto d = diamond();
  EXPECT_TRUE(d.dag.past(d.g).empty());
  EXPECT_EQ(d.dag.past(d.c), (std::set<BlockId>{d.g, d.a, d.b}));
  EXPECT_TRUE(d.dag.future(d.c).empty());
  EXPECT_EQ(d.dag.future(d.a), std::set<BlockId>{d.c});
  EXPECT_EQ(d.dag.anticone(d.a), std::set<BlockId>{d.b});
  EXPECT_EQ(d.dag.anticone(d.b), std::set<BlockId>{d.a});
  EXPECT_TRUE(d.dag.anticone(d.g).empty());

  auto chain = rpmdag::testing::chain_dag(3);
  auto ids = chain.insertion_order();
  EXPECT_EQ(chain.past(ids[2]), (std::set<BlockId>{ids[0], ids[1]}));
  EXPECT_EQ(chain.future(ids[0]), (std::set<BlockId>{ids[1], ids[2]}));
}

TEST(LinearExtension, Examples) {
  auto chain = rpmdag::testing::chain_dag(3);
  auto ids = chain.insertion_order();
  EXPECT_TRUE(chain.is_linear_extension(std::vector<BlockId>{ids[0], ids[1], ids[2]}));
  EXPECT_FALSE(chain.is_linear_extension(std::vector<BlockId>{ids[0], ids[2], ids[1]}));

  auto d = diamond();
  EXPECT_TRUE(d.dag.is_linear_extension(std::vector<BlockId>{d.g, d.b, d.a, d.c}));
  EXPECT_EQ(error_of([&] { (void)d.dag.is_linear_extension(std::vector<BlockId>{d.g, d.a, d.a, d.c}); }),
            Errc::NotAPermutation);
  EXPECT_EQ(error_of([&] { (void)d.dag.is_linear_extension(std::vector<BlockId>{d.g}); }),
            Errc::NotAPermutation);
}

TEST(ReachabilityProperty, PartitionSymmetryAndNaiveAgreement) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto dag = rpmdag::testing::random_dag(seed, 30);
    auto naive_past = rpmdag::testing::naive_pasts(dag);
    auto naive_anti = rpmdag::testing::naive_anticones(dag);
    auto sizes = anticone_sizes(dag);
    Reachability reach(dag);
    for (const auto& id : dag.insertion_order()) {
      auto past = dag.past(id);
      auto future = dag.future(id);
      auto anti = dag.anticone(id);
      ASSERT_EQ(past, naive_past[id]);
      ASSERT_EQ(anti, naive_anti[id]);
      ASSERT_EQ(past.size() + future.size() + anti.size() + 1, dag.size());
      ASSERT_EQ(sizes[dag.require_index(id)], anti.size());
      for (const auto& x : future) ASSERT_TRUE(dag.past(x).count(id));
      for (const auto& x : anti) ASSERT_TRUE(dag.anticone(x).count(id));
      for (const auto& x : dag.insertion_order()) {
        const auto xi = dag.require_index(x);
        const auto yi = dag.require_index(id);
        ASSERT_EQ(reach.is_ancestor(xi, yi), past.count(x) == 1);
      }
    }
  }
}

TEST(ReachabilityProperty, InsertionOrderIndependence) {
  boost::random::mt19937_64 rng(99);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto dag = rpmdag::testing::random_dag(seed, 25);
    // Rebuild in a random parents-first order.
    std::vector<BlockId> pending = dag.insertion_order();
    BlockDag other;
    other.add_block(dag.block(pending.front()));
    pending.erase(pending.begin());
    while (!pending.empty()) {
      std::vector<std::size_t> ready;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        bool ok = true;
        for (const auto& p : dag.block(pending[i]).parents) ok = ok && other.contains(p);
        if (ok) ready.push_back(i);
      }
      boost::random::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
      auto chosen = ready[pick(rng)];
      other.add_block(dag.block(pending[chosen]));
      pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    ASSERT_EQ(other.tips(), dag.tips());
    for (const auto& id : dag.insertion_order()) {
      ASSERT_EQ(other.past(id), dag.past(id));
      ASSERT_EQ(other.future(id), dag.future(id));
      ASSERT_EQ(other.anticone(id), dag.anticone(id));
    }
  }
}

TEST(AnticoneSizes, LargeChunkedMatchesBfs) {
  // More than one 4096-column chunk.
  auto dag = rpmdag::testing::random_dag(5, 5000, 8);
  auto sizes = anticone_sizes(dag);
  auto ids = dag.insertion_order();
  for (std::size_t i = 0; i < ids.size(); i += 97) ASSERT_EQ(sizes[i], dag.anticone(ids[i]).size());
  ASSERT_EQ(sizes.back(), dag.anticone(ids.back()).size());
}

TEST(DagText, ParseExportRoundTrip) {
  auto parsed = parse_dag_text("# diamond\nG:\nA: G\nB: G\nC: A,B\n");
  EXPECT_EQ(parsed.dag.size(), 4u);
  EXPECT_EQ(parsed.dag.tips(), std::set<BlockId>{parsed.id("C")});
  EXPECT_EQ(parsed.dag.anticone(parsed.id("A")), std::set<BlockId>{parsed.id("B")});

  auto again = parse_dag_text(to_dag_text(parsed));
  EXPECT_EQ(again.ids, parsed.ids);

  auto dot = to_dot(parsed);
  EXPECT_NE(dot.find("\"C\" -> \"A\""), std::string::npos);
  EXPECT_NE(dot.find("\"C\" -> \"B\""), std::string::npos);
}

TEST(DagText, Errors) {
  EXPECT_EQ(error_of([] { parse_dag_text("G:\nX: Y\n"); }), Errc::MissingParent);
  EXPECT_EQ(error_of([] { parse_dag_text("G:\nG:\n"); }), Errc::DuplicateBlock);
  EXPECT_EQ(error_of([] { parse_dag_text("G\n"); }), Errc::ParseError);
  EXPECT_EQ(error_of([] { parse_dag_text("G:\nH:\n"); }), Errc::InvalidInput);
  EXPECT_EQ(error_of([] { parse_dag_text("G:\nA: G,G\n"); }), Errc::InvalidInput);
}

TEST(DagText, Cluster3FixtureAnticones) {
  auto fixture_dag = load_dag_file(std::string(RPMDAG_FIXTURES) + "/cluster3.dag");
  std::set<BlockId> blue;
  for (auto t : {"A", "B", "C", "D", "F", "G", "I", "J"}) blue.insert(fixture_dag.id(t));
  for (auto t : {"E", "H", "K"}) {
    std::size_t blue_in_anticone = 0;
    for (const auto& x : fixture_dag.dag.anticone(fixture_dag.id(t))) blue_in_anticone += blue.count(x);
    EXPECT_GT(blue_in_anticone, 3u) << t;
  }
  for (const auto& b : blue) {
    std::size_t n = 0;
    for (const auto& x : fixture_dag.dag.anticone(b)) n += blue.count(x);
    EXPECT_LE(n, 3u) << fixture_dag.label(b);
  }
}
