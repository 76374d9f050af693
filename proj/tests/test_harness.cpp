#include <qcchain/error.hpp>
#include <qcchain/harness.hpp>
#include <qcchain/record_io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace qcchain;
using nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
   auto p = std::filesystem::temp_directory_path() / ("qcchain_test_" + name);
   std::filesystem::remove_all(p);
   return p.string();
}

ScenarioConfig small(Scenario s) {
   auto c                = ScenarioConfig::defaults(s);
   c.nodes               = 12;
   c.dataset.n_artifacts = 40;
   return c;
}

} // namespace

TEST(Dataset, FirstArtifactAndDeterminism) {
   DatasetConfig c;
   c.n_artifacts = 50;
   auto a = generate_dataset(c), b = generate_dataset(c);
   EXPECT_TRUE(a.entries.front().endorsed.empty());
   ASSERT_EQ(a.entries.size(), 50u);
   for (std::size_t i = 0; i < a.entries.size(); ++i) {
      EXPECT_EQ(a.entries[i].endorsed, b.entries[i].endorsed);
      EXPECT_LE(a.entries[i].endorsed.size(), i);
   }
}

TEST(Dataset, DrawMeanMatchesDistribution) {
   DatasetConfig c; // 1000 artifacts, mean 19.02, variance 12.17
   auto          ds  = generate_dataset(c);
   double        sum = 0;
   for (auto v : ds.drawn_counts)
      sum += static_cast<double>(v);
   EXPECT_NEAR(sum / 1000.0, 19.02, 0.5);
   EXPECT_NEAR(c.sigma(), std::sqrt(12.17), 1e-12);
   c.variance_is_sigma = true;
   EXPECT_EQ(c.sigma(), 12.17);
}

TEST(DatasetProperty, AlwaysLoadsAsValidDag) {
   for (std::uint64_t seed = 0; seed < 40; ++seed)
      for (auto rule : {TargetRule::uniform, TargetRule::preferential}) {
         DatasetConfig c;
         c.n_artifacts = 120;
         c.seed        = seed;
         c.target_rule = rule;
         auto ds       = generate_dataset(c);
         ArtifactDag dag;
         for (const auto& tx : to_workload(ds)) {
            validate_endorsement(tx, dag);
            const auto* e = tx.endorsement();
            dag.add_artifact(e->artifact, e->endorsed, 0.15);
         }
         ASSERT_TRUE(dag.is_acyclic());
         ASSERT_TRUE(dag.adjacency_consistent());
      }
}

TEST(Config, DefaultsValidateAndRoundTrip) {
   for (auto s : {Scenario::rationality, Scenario::throughput_latency, Scenario::epsilon_response,
                  Scenario::attack_resistance, Scenario::reputation_separation, Scenario::committee_distribution}) {
      auto c = ScenarioConfig::defaults(s);
      EXPECT_NO_THROW(c.validate());
      EXPECT_EQ(parse_scenario(to_string(s)), s);
      auto back = apply_config(to_json(c), ScenarioConfig{});
      EXPECT_EQ(to_json(back), to_json(c));
      EXPECT_EQ(config_digest(back), config_digest(c));
   }
   EXPECT_FALSE(parse_scenario("nope"));
}

TEST(Config, StrictParsing) {
   auto expect_parse_error = [](const char* text) {
      try {
         apply_config(json::parse(text), ScenarioConfig{});
         ADD_FAILURE() << text;
      } catch (const Error& e) {
         EXPECT_EQ(e.code(), ErrorCode::parse_error) << text;
      }
   };
   expect_parse_error(R"({"nodez": 5})");
   expect_parse_error(R"({"committee": {"K": 3, "k": 4}})");
   expect_parse_error(R"({"nodes": "many"})");
   expect_parse_error(R"({"nodes": -3})");
   expect_parse_error(R"({"scenario": "unknown"})");
   expect_parse_error(R"({"network": {"latency": {"kind": "gaussian"}}})");

   auto c = apply_config(json::parse(R"({"nodes": 7, "consensus": {"epsilon": {"T": 0.1}}, "seed": 3})"),
                         ScenarioConfig{});
   EXPECT_EQ(c.nodes, 7u);
   EXPECT_EQ(c.consensus.epsilon.ceiling, 0.1);
   EXPECT_EQ(c.seed, 3u);
}

TEST(Config, SemanticValidation) {
   auto c = ScenarioConfig::defaults(Scenario::rationality);
   c.nodes = 2;
   EXPECT_THROW(c.validate(), Error);
   c                    = ScenarioConfig::defaults(Scenario::rationality);
   c.malicious_fraction = 1.5;
   EXPECT_THROW(c.validate(), Error);
}

TEST(Rationality, StarTopsEveryRanking) {
   auto c                = small(Scenario::rationality);
   c.dataset.n_artifacts = 1;
   // star: artifact 1 is cited by all others
   std::vector<Transaction> wl{make_endorsement(TxnId{1}, 0, ArtifactId{1}, {})};
   for (std::uint64_t k = 2; k <= 8; ++k)
      wl.push_back(make_endorsement(TxnId{k}, 0, ArtifactId{k}, {ArtifactId{1}}));
   auto        run  = run_simulation(simulation_config(c, c.nodes, 0.0, c.seed), wl);
   const auto& dag  = *run.nodes[0].dag;
   auto        pr   = pagerank_baseline(dag, 0.85, 1e-12, 1000);
   auto        hits = hits_baseline(dag, 1e-12, 1000).authority;
   for (std::uint64_t k = 2; k <= 8; ++k) {
      EXPECT_GT(dag.score(ArtifactId{1}), dag.score(ArtifactId{k}));
      EXPECT_GT(pr.at(ArtifactId{1}), pr.at(ArtifactId{k}));
      EXPECT_GT(hits.at(ArtifactId{1}), hits.at(ArtifactId{k}));
   }
}

TEST(Rationality, ChainRankingMatchesFixedPoint) {
   auto                     c = small(Scenario::rationality);
   std::vector<Transaction> wl{make_endorsement(TxnId{1}, 0, ArtifactId{1}, {})};
   for (std::uint64_t k = 2; k <= 10; ++k)
      wl.push_back(make_endorsement(TxnId{k}, 0, ArtifactId{k}, {ArtifactId{k - 1}}));
   auto run   = run_simulation(simulation_config(c, c.nodes, 0.0, c.seed), wl);
   auto model = values_of(fixed_point_scores(*run.nodes[0].dag, ScoringConfig{}));
   std::vector<double> got;
   for (const auto& a : run.nodes[0].dag->artifacts())
      got.push_back(a.score);
   EXPECT_NEAR(spearman(got, model), 1.0, 1e-12);
}

TEST(Scenarios, SmallRunsProduceReports) {
   auto rat = scenario_rationality(small(Scenario::rationality));
   EXPECT_EQ(rat.rows.size(), 40u);
   EXPECT_GT(rat.pearson_pagerank, 0.0);

   auto att = small(Scenario::attack_resistance);
   att.sweep.malicious_fractions = {0.25};
   auto a                        = scenario_attack_resistance(att);
   ASSERT_EQ(a.rows.size(), 2u);
   EXPECT_DOUBLE_EQ(a.rows[0].pearson, 1.0);

   auto dist                         = small(Scenario::committee_distribution);
   dist.committee.K                  = 4;
   dist.repetitions                  = 6;
   dist.sweep.distribution_fractions = {0.0, 0.25};
   auto d                            = scenario_committee_distribution(dist);
   ASSERT_EQ(d.rows.size(), 2u);
   EXPECT_EQ(d.rows[0].buckets[0], 6u);
   for (const auto& r : d.rows) {
      std::size_t total = r.at_or_above_half;
      for (auto b : r.buckets)
         total += b;
      EXPECT_EQ(total, 6u);
   }
   // parallel trials give the same numbers as a serial loop
   for (std::size_t t = 0; t < 6; ++t)
      EXPECT_EQ(d.rows[1].fractions[t],
                committee_trial(dist, 0.25, 8, mix_seed(mix_seed(dist.seed, 1), t)));
}

TEST(Outputs, WriteAuditAndReport) {
   auto c   = small(Scenario::reputation_separation);
   auto out = run_scenario(c);
   auto dir = temp_dir("audit");
   write_run(dir, c, out);
   for (const char* f : {"summary.json", "config.json", "manifest.json", "ledger.txt", "dag.txt", "rounds.csv",
                         "committee.csv", "reputations.csv"})
      EXPECT_TRUE(std::filesystem::exists(dir + "/" + f)) << f;

   auto audit = audit_run(dir);
   EXPECT_TRUE(audit.ok) << (audit.problems.empty() ? "" : audit.problems[0]);
   EXPECT_EQ(audit.blocks, 40u);

   auto manifest = json::parse(read_file(dir + "/manifest.json"));
   EXPECT_EQ(manifest["config_digest"], config_digest(c).hex());

   auto r1 = merge_reports({dir});
   auto r2 = merge_reports({dir});
   EXPECT_EQ(r1, r2);
   EXPECT_NE(r1.find("reputation_separation,qcchain_test_audit,honest_mean,"), std::string::npos);

   // a DAG that disagrees with the ledger is caught even without the manifest
   std::filesystem::remove(dir + "/manifest.json");
   auto dag = decode_dag(read_file(dir + "/dag.txt"));
   dag.set_score(ArtifactId{3}, dag.score(ArtifactId{3}) + 1.0);
   write_file(dir + "/dag.txt", encode_dag(dag));
   EXPECT_FALSE(audit_run(dir).ok);
}

TEST(Outputs, SameSeedSameFiles) {
   auto c = small(Scenario::epsilon_response);
   auto a = run_scenario(c), b = run_scenario(c);
   EXPECT_EQ(a.files, b.files);
   EXPECT_EQ(a.summary, b.summary);
   c.seed = 43;
   EXPECT_NE(run_scenario(c).files, a.files);
}
