#include <qcchain/committee.hpp>
#include <qcchain/error.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace qcchain;

namespace {

std::vector<NodeId> node_ids(std::size_t n) {
   std::vector<NodeId> v;
   for (std::uint64_t i = 1; i <= n; ++i)
      v.push_back(NodeId{i});
   return v;
}

std::vector<Candidate> candidates(std::vector<double> rep, std::vector<double> slow) {
   std::vector<Candidate> out;
   for (std::size_t i = 0; i < rep.size(); ++i)
      out.push_back(Candidate{NodeId{i + 1}, rep[i], slow[i]});
   return out;
}

} // namespace

TEST(InitCommittee, ForcedAndSeeded) {
   auto five = node_ids(5);
   auto c    = init_committee(five, 5, 3);
   EXPECT_EQ(c.members, five);
   EXPECT_TRUE(c.valid());

   auto ten = node_ids(10);
   auto a = init_committee(ten, 3, 42), b = init_committee(ten, 3, 42);
   EXPECT_EQ(a, b);
   EXPECT_EQ(a.size(), 3u);
   EXPECT_TRUE(std::is_sorted(a.members.begin(), a.members.end()));

   EXPECT_THROW(init_committee(ten, 0, 1), Error);
   EXPECT_THROW(init_committee(ten, 11, 1), Error);
}

TEST(InitCommittee, SubsetsAreRoughlyUniform) {
   auto                            ten = node_ids(10);
   std::map<std::uint64_t, int> hits;
   for (std::uint64_t s = 0; s < 3000; ++s)
      for (auto m : init_committee(ten, 3, s).members)
         ++hits[m.value];
   for (auto& [id, h] : hits)
      EXPECT_NEAR(h, 900, 120) << id; // 3000 * 3/10, loose bound
}

TEST(Leader, EachMemberLeadsOncePerTerm) {
   auto c = init_committee(node_ids(10), 3, 7);
   std::set<NodeId> seen;
   for (int i = 0; i < 3; ++i) {
      auto [leader, last] = next_leader(c);
      EXPECT_TRUE(c.contains(leader));
      EXPECT_TRUE(seen.insert(leader).second);
      EXPECT_EQ(last, i == 2);
   }
   auto one = init_committee(node_ids(4), 1, 7);
   auto [l, last] = next_leader(one);
   EXPECT_EQ(l, one.members[0]);
   EXPECT_TRUE(last);
}

TEST(Ga, TopTwoByReputation) {
   auto cs = candidates({5, 4, 3, 2, 1}, {0, 0, 0, 0, 0});
   auto g  = ga_propose(cs, 2, 1.0, GaConfig{});
   EXPECT_EQ(g.members, (std::vector<NodeId>{NodeId{1}, NodeId{2}}));
   EXPECT_TRUE(g.feasible);
   auto o = exhaustive_propose(cs, 2, 1.0);
   EXPECT_EQ(o.members, g.members);
}

TEST(Ga, SlowCandidateExcluded) {
   auto cs = candidates({5, 4, 3}, {10, 1, 1});
   auto g  = ga_propose(cs, 2, 5.0, GaConfig{});
   EXPECT_EQ(g.members, (std::vector<NodeId>{NodeId{2}, NodeId{3}}));
   EXPECT_TRUE(g.feasible);
   EXPECT_EQ(exhaustive_propose(cs, 2, 5.0).members, g.members);
}

TEST(Ga, KEqualsAllCandidates) {
   auto cs = candidates({1, 2, 3, 4}, {1, 1, 1, 1});
   auto g  = ga_propose(cs, 4, 10.0, GaConfig{});
   EXPECT_EQ(g.members.size(), 4u);
   EXPECT_TRUE(g.feasible);
}

TEST(Ga, NothingFeasibleReturnsLeastSlow) {
   auto cs = candidates({9, 1, 1, 1}, {5, 2, 3, 4});
   auto g  = ga_propose(cs, 2, 1.0, GaConfig{});
   EXPECT_FALSE(g.feasible);
   EXPECT_EQ(g.members, (std::vector<NodeId>{NodeId{2}, NodeId{3}}));
}

TEST(GaProperty, FeasibleWheneverPossible) {
   std::mt19937_64                        rng(15);
   std::uniform_real_distribution<double> r(0, 100), s(0, 50);
   for (int trial = 0; trial < 100; ++trial) {
      const std::size_t      n = 6 + rng() % 10, k = 1 + rng() % (n - 1);
      std::vector<Candidate> cs;
      for (std::size_t i = 0; i < n; ++i)
         cs.push_back(Candidate{NodeId{i}, r(rng), s(rng)});
      const double theta = std::uniform_real_distribution<double>(0, 25.0 * k)(rng);
      GaConfig     ga;
      ga.seed     = static_cast<std::uint64_t>(trial);
      auto oracle = exhaustive_propose(cs, k, theta);
      auto got    = ga_propose(cs, k, theta, ga);
      ASSERT_EQ(got.members.size(), k);
      if (oracle.feasible) {
         ASSERT_TRUE(got.feasible) << "trial " << trial;
         ASSERT_LE(got.slowness_sum, theta);
      }
   }
}

TEST(Subscribe, Examples) {
   NodeId                           a{1}, b{2}, c{3}, x{9};
   std::vector<std::vector<NodeId>> same(3, {a, b, c});
   auto                             r = subscribe(same, 3);
   EXPECT_EQ(r.committee, (std::vector<NodeId>{a, b, c}));
   EXPECT_TRUE(r.complete);

   std::vector<std::vector<NodeId>> lists{{x, a}, {x, b}, {c, a}};
   auto                             q = subscribe(lists, 2);
   EXPECT_EQ(q.committee, (std::vector<NodeId>{a, x})); // 2 of 3 lists each
   EXPECT_TRUE(q.complete);

   std::vector<std::vector<NodeId>> sparse{{x, a, b}, {x, c, NodeId{5}}, {NodeId{6}, NodeId{7}, NodeId{8}}};
   auto                             p = subscribe(sparse, 3);
   EXPECT_EQ(p.committee, (std::vector<NodeId>{x}));
   EXPECT_FALSE(p.complete);

   std::vector<std::vector<NodeId>> disjoint{{c, a}, {b, x}};
   auto                             d = subscribe(disjoint, 2);
   EXPECT_EQ(d.committee, (std::vector<NodeId>{a, b})); // all at 50%, id tie-break
   EXPECT_TRUE(d.complete);
}

TEST(SubscribeProperty, OutputDrawnFromInputs) {
   std::mt19937_64 rng(3);
   for (int trial = 0; trial < 300; ++trial) {
      const std::size_t m = 1 + rng() % 6, k = 1 + rng() % 5;
      std::vector<std::vector<NodeId>> lists;
      std::set<NodeId>                 all;
      for (std::size_t i = 0; i < m; ++i) {
         std::vector<NodeId> pool;
         for (std::uint64_t j = 0; j < 12; ++j)
            pool.push_back(NodeId{100 + j});
         std::shuffle(pool.begin(), pool.end(), rng);
         std::vector<NodeId> l(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
         all.insert(l.begin(), l.end());
         lists.push_back(l);
      }
      auto r = subscribe(lists, k);
      ASSERT_LE(r.committee.size(), k);
      for (auto n : r.committee) {
         ASSERT_TRUE(all.count(n));
         std::size_t count = 0;
         for (const auto& l : lists)
            count += std::count(l.begin(), l.end(), n);
         ASSERT_GE(2 * count, m);
         ASSERT_LT(n.value, 100u + 12u);
         ASSERT_GE(n.value, 100u); // never an id absent from the lists
      }
   }
}

TEST(Rebuild, PicksReputableOutsidersDeterministically) {
   std::vector<Candidate> cs;
   for (std::uint64_t i = 0; i < 30; ++i)
      cs.push_back(Candidate{NodeId{i}, i < 15 ? 100.0 : 1.0, 10.0});
   std::vector<NodeId> ids;
   for (std::uint64_t i = 20; i < 25; ++i)
      ids.push_back(NodeId{i});
   auto          current = init_committee(ids, 5, 1);
   CommitteeConfig cfg;
   cfg.K = 5;
   RebuildReport rep;
   auto          next  = rebuild_committee(current, cs, cfg, GaConfig{}, 9, &rep);
   auto          again = rebuild_committee(current, cs, cfg, GaConfig{}, 9);
   EXPECT_EQ(next, again);
   EXPECT_TRUE(next.valid());
   EXPECT_EQ(next.term_id, current.term_id + 1);
   EXPECT_EQ(next.size(), 5u);
   for (auto m : next.members) {
      EXPECT_LT(m.value, 15u); // reputable
      EXPECT_FALSE(current.contains(m));
   }
   EXPECT_GE(rep.subscription_rounds, 1u);
}

TEST(Rebuild, SmallNetworkLetsMembersStandAgain) {
   std::vector<Candidate> cs;
   for (std::uint64_t i = 0; i < 6; ++i)
      cs.push_back(Candidate{NodeId{i}, 1.0 + static_cast<double>(i), 1.0});
   auto            current = init_committee(node_ids(4), 4, 2);
   CommitteeConfig cfg;
   cfg.K      = 4;
   auto next  = rebuild_committee(current, cs, cfg, GaConfig{}, 1);
   EXPECT_EQ(next.size(), 4u);
   EXPECT_TRUE(next.valid());
}

TEST(MixSeed, Deterministic) {
   EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
   EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Config, Validation) {
   CommitteeConfig c;
   c.K = 0;
   EXPECT_THROW(c.validate(), Error);
   GaConfig g;
   g.population_size = 1;
   EXPECT_THROW(g.validate(), Error);
   CommitteeConfig d;
   EXPECT_DOUBLE_EQ(d.resolved_theta(101), 0.5 * 10 * 100);
}
