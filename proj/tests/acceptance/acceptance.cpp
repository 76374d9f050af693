// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "../test_util.hpp"

#include <qcchain/committee.hpp>
#include <qcchain/consensus.hpp>
#include <qcchain/error.hpp>
#include <qcchain/harness.hpp>
#include <qcchain/record_io.hpp>
#include <qcchain/scoring.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

using namespace qcchain;

namespace {

// Pinned thresholds.
constexpr double ac2_tolerance          = 1e-9;
constexpr double ac3_optimum_share      = 0.95;
constexpr double ac4_pagerank_min       = 0.65;
constexpr double ac4_hits_min           = 0.80;
constexpr double ac5_malicious_share    = 0.20;
constexpr double ac6_pearson_min        = 0.95;
constexpr double ac6_fraction_max       = 0.49;
constexpr double ac7_max_fraction       = 0.40;
constexpr double ac8_min_tps            = 1.0;
constexpr double ac9_ceiling            = 0.05;

struct Outcome {
   bool        pass{false};
   std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
   const auto start = std::chrono::steady_clock::now();
   Outcome    o;
   try {
      o = check();
   } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
   }
   const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
   std::printf("%s %s %s | %s | %.1fs\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
   std::fflush(stdout);
   failures += !o.pass;
}

std::string fmt(const char* f, auto... args) {
   char buf[512];
   std::snprintf(buf, sizeof buf, f, args...);
   return buf;
}

// ---------------------------------------------------------------- AC1

Outcome ac1() {
   std::map<ArtifactId, double> lambda{{ArtifactId{1}, 1.0}};
   bool rep = reputation_delta({{ArtifactId{1}, 1.0}}, lambda) == 1.0 &&
              reputation_delta({{ArtifactId{1}, 1.5}}, lambda) == 0.5 &&
              reputation_delta({{ArtifactId{1}, 5.0}}, lambda) == 0.25;

   NodeId                           n1{1}, n2{2}, n3{3};
   std::vector<std::vector<NodeId>> lists{{n1, n2, n3}, {n2, n1, n3}};
   auto                             d     = delay_ranks(lists);
   bool                             delay = d.at(n1) == 5 && d.at(n2) == 5 && d.at(n3) == 2;

   EpsilonConfig c;
   double        e_mid = adapt_epsilon(0.04, c), e0 = adapt_epsilon(0.0, c), e1 = adapt_epsilon(1.0, c);
   bool          eps = e_mid == 0.025 && std::abs(e0 - 0.0059596) <= 1e-6 && std::abs(e1 - 0.05) <= 1e-6;
   return {rep && delay && eps, fmt("delta table %s, delay %s, eps(0.04)=%.7g eps(0)=%.7g eps(1)=%.7g",
                                    rep ? "exact" : "WRONG", delay ? "5/5/2" : "WRONG", e_mid, e0, e1)};
}

// ---------------------------------------------------------------- AC2

Outcome ac2() {
   std::mt19937_64                            rng(20240601);
   std::uniform_int_distribution<std::size_t> size(1, 200);
   double                                     worst = 0;
   for (int trial = 0; trial < 500; ++trial) {
      const auto n     = size(rng);
      auto       cites = qctest::random_citations(rng, n, 25);
      auto       fresh = cites.back();
      cites.pop_back();
      auto dag = qctest::build_dag(cites, 0.15);
      for (auto& [id, v] : fixed_point_scores(dag, ScoringConfig{}))
         dag.set_score(id, v);
      dag.add_artifact(ArtifactId{n}, fresh, 0.15);
      propagate_update(dag, ArtifactId{n}, ScoringConfig{});
      // oracle: Jacobi sweeps of the fixed-point equation
      std::map<ArtifactId, double> s;
      for (auto id : dag.ids())
         s[id] = 0.15;
      for (std::size_t it = 0; it <= n + 1; ++it) {
         std::map<ArtifactId, double> next;
         for (auto id : dag.ids()) {
            double sum = 0;
            for (auto j : dag.endorsers_of(id))
               sum += s[j] / dag.artifact(j).out_degree;
            next[id] = 0.15 + 0.85 * sum;
         }
         s.swap(next);
      }
      for (auto& [id, v] : s)
         worst = std::max(worst, std::abs(dag.score(id) - v));
   }

   std::size_t subset_fail = 0, subset_trials = 0;
   std::uniform_real_distribution<double> eps(0.001, 0.1);
   for (int trial = 0; trial < 500; ++trial) {
      auto cites = qctest::random_citations(rng, 60, 6);
      auto fresh = cites.back();
      cites.pop_back();
      auto   dag = qctest::build_dag(cites, 0.15);
      double e1 = eps(rng), e2 = eps(rng);
      if (e1 > e2)
         std::swap(e1, e2);
      ScoringConfig c1, c2;
      c1.epsilon = e1;
      c2.epsilon = e2;
      auto u1    = compute_update(dag, ArtifactId{60}, fresh, c1);
      auto u2    = compute_update(dag, ArtifactId{60}, fresh, c2);
      auto key   = [](const UpdateSet& u, std::size_t i) {
         std::vector<std::uint64_t> p;
         for (auto j = static_cast<std::int64_t>(i); j >= 0; j = u.trace[static_cast<std::size_t>(j)].parent)
            p.push_back(u.trace[static_cast<std::size_t>(j)].artifact.value);
         return p;
      };
      std::map<std::vector<std::uint64_t>, double> deltas1;
      for (std::size_t i = 0; i < u1.trace.size(); ++i)
         deltas1[key(u1, i)] = u1.trace[i].delta;
      bool ok = true;
      for (auto& [id, _] : u2.entries)
         ok = ok && u1.entries.count(id);
      for (std::size_t i = 0; i < u2.trace.size(); ++i) {
         auto it = deltas1.find(key(u2, i));
         ok      = ok && it != deltas1.end() && it->second == u2.trace[i].delta;
      }
      subset_fail += !ok;
      ++subset_trials;
   }
   return {worst <= ac2_tolerance && subset_fail == 0,
           fmt("500 DAGs max |diff| %.3g (tol %.0e); truncation subset violations %zu/%zu", worst, ac2_tolerance,
               subset_fail, subset_trials)};
}

// ---------------------------------------------------------------- AC3

Outcome ac3() {
   std::mt19937_64                        rng(3303);
   std::uniform_real_distribution<double> rep(0, 100), slow(0, 60);
   std::size_t                            infeasible = 0, optimal = 0, instances = 100;
   for (std::size_t trial = 0; trial < instances; ++trial) {
      const std::size_t      n = 4 + rng() % 9; // 4..12 candidates
      const std::size_t      k = 2 + rng() % (n - 2);
      std::vector<Candidate> cs;
      for (std::size_t i = 0; i < n; ++i)
         cs.push_back(Candidate{NodeId{i}, std::round(rep(rng)), slow(rng)});
      const double theta = std::uniform_real_distribution<double>(10.0 * k, 40.0 * k)(rng);
      GaConfig     ga;
      ga.seed     = trial;
      auto oracle = exhaustive_propose(cs, k, theta);
      auto got    = ga_propose(cs, k, theta, ga);
      if (oracle.feasible && !got.feasible)
         ++infeasible;
      if (got.feasible == oracle.feasible && std::abs(got.reputation_sum - oracle.reputation_sum) < 1e-9)
         ++optimal;
   }
   const double share = static_cast<double>(optimal) / static_cast<double>(instances);
   return {infeasible == 0 && share >= ac3_optimum_share,
           fmt("infeasible-when-feasible %zu/%zu; optimum reached %.0f%% (need %.0f%%)", infeasible, instances,
               100 * share, 100 * ac3_optimum_share)};
}

// ---------------------------------------------------------------- AC4

Outcome ac4() {
   auto cfg = ScenarioConfig::defaults(Scenario::rationality);
   auto r   = scenario_rationality(cfg);
   return {r.pearson_pagerank >= ac4_pagerank_min && r.pearson_hits >= ac4_hits_min,
           fmt("Pearson vs PageRank %.4f (>= %.2f), vs HITS %.4f (>= %.2f); Spearman %.4f / %.4f",
               r.pearson_pagerank, ac4_pagerank_min, r.pearson_hits, ac4_hits_min, r.spearman_pagerank,
               r.spearman_hits)};
}

// ---------------------------------------------------------------- AC5

Outcome reputation_check(std::size_t nodes, std::size_t txns) {
   auto cfg                = ScenarioConfig::defaults(Scenario::reputation_separation);
   cfg.nodes               = nodes;
   cfg.malicious_fraction  = 0.5;
   cfg.dataset.n_artifacts = txns;
   auto r                  = scenario_reputation_separation(cfg);
   const double target     = static_cast<double>(txns);
   bool         exact      = r.honest_min == target && r.honest_max == target;
   bool         low        = r.malicious_mean < ac5_malicious_share * r.honest_mean;
   return {exact && low && r.committed == txns,
           fmt("%zu nodes (%zu honest), %zu txns: honest min/max %.17g/%.17g, malicious mean %.3f (< %.0f)", nodes,
               r.honest.size(), txns, r.honest_min, r.honest_max, r.malicious_mean,
               ac5_malicious_share * r.honest_mean)};
}

Outcome ac5() {
   auto desk = reputation_check(100, 200);
   auto full = reputation_check(500, 1000);
   return {desk.pass && full.pass, "desk: " + desk.detail + "; full: " + full.detail};
}

// ---------------------------------------------------------------- AC6

Outcome ac6() {
   auto        cfg = ScenarioConfig::defaults(Scenario::attack_resistance);
   auto        r   = scenario_attack_resistance(cfg);
   bool        ok  = true;
   std::string detail;
   for (const auto& row : r.rows) {
      if (row.malicious_fraction <= ac6_fraction_max + 1e-12)
         ok = ok && row.pearson >= ac6_pearson_min;
      detail += fmt("%s%.0f%%:%.4f", detail.empty() ? "" : " ", 100 * row.malicious_fraction, row.pearson);
   }
   return {ok, "Pearson vs clean run " + detail + fmt(" (>= %.2f up to %.0f%%)", ac6_pearson_min, 100 * ac6_fraction_max)};
}

// ---------------------------------------------------------------- AC7

Outcome ac7() {
   auto cfg                         = ScenarioConfig::defaults(Scenario::committee_distribution);
   cfg.repetitions                  = 1000;
   cfg.sweep.distribution_fractions = {0.15, 0.49};
   auto        r                    = scenario_committee_distribution(cfg);
   const auto& low                  = r.rows[0];
   const auto& high                 = r.rows[1];
   bool        ok_low               = low.buckets[0] == cfg.repetitions;
   bool        ok_high              = high.max_fraction <= ac7_max_fraction && high.at_or_above_half == 0;
   return {ok_low && ok_high,
           fmt("15%%: %zu/%zu trials in [0,10); 49%%: max %.0f%% (<= %.0f%%), %zu trials >= 50%%, buckets "
               "%zu/%zu/%zu/%zu/%zu",
               low.buckets[0], cfg.repetitions, 100 * high.max_fraction, 100 * ac7_max_fraction, high.at_or_above_half,
               high.buckets[0], high.buckets[1], high.buckets[2], high.buckets[3], high.buckets[4])};
}

// ---------------------------------------------------------------- AC8

Outcome ac8() {
   auto        cfg = ScenarioConfig::defaults(Scenario::throughput_latency);
   auto        r   = scenario_throughput_latency(cfg);
   bool        monotone = true, agree = true;
   std::string detail;
   for (std::size_t i = 0; i < r.points.size(); ++i) {
      const auto& p = r.points[i];
      if (i > 0)
         monotone = monotone && p.summary.mean_latency >= r.points[i - 1].summary.mean_latency;
      agree = agree && p.ledger_disagreements == 0 && p.score_disagreements == 0 &&
              p.summary.committed == cfg.sweep.transactions;
      detail += fmt("%s%zu:%.1fms/%.2ftps", detail.empty() ? "" : " ", p.nodes, 1000 * p.summary.mean_latency,
                    p.summary.throughput);
   }
   const double tps = r.points.back().summary.throughput;
   return {monotone && agree && tps >= ac8_min_tps,
           detail + fmt("; monotone %s, agreement %s", monotone ? "yes" : "NO", agree ? "yes" : "NO")};
}

// ---------------------------------------------------------------- AC9

Outcome ac9() {
   auto   cfg     = ScenarioConfig::defaults(Scenario::epsilon_response);
   auto   r       = scenario_epsilon_response(cfg);
   bool   bounded = !r.trace.empty();
   double lo = 1, hi = 0;
   for (const auto& row : r.trace) {
      bounded = bounded && row.epsilon > 0 && row.epsilon < ac9_ceiling;
      lo      = std::min(lo, row.epsilon);
      hi      = std::max(hi, row.epsilon);
   }
   return {bounded && r.post_step_epsilon > r.pre_step_epsilon,
           fmt("trace of %zu rounds in [%.5f, %.5f]; steady state before step %.5f, after %.5f", r.trace.size(), lo,
               hi, r.pre_step_epsilon, r.post_step_epsilon)};
}

// ---------------------------------------------------------------- AC10

bool detected(std::string_view ledger_text) {
   try {
      return !verify_chain(decode_ledger(ledger_text));
   } catch (const Error&) {
      return true;
   }
}

Outcome ac10() {
   auto cfg = ScenarioConfig::defaults(Scenario::rationality);
   auto a = run_scenario(cfg), b = run_scenario(cfg);
   bool same = a.files == b.files && a.summary == b.summary;

   // every bit of a small saved ledger, through the on-disk verify path
   auto small                = ScenarioConfig::defaults(Scenario::reputation_separation);
   small.nodes               = 8;
   small.dataset.n_artifacts = 4;
   auto dir                  = (std::filesystem::temp_directory_path() / "qcchain_acceptance").string();
   std::filesystem::remove_all(dir);
   write_run(dir, small, run_scenario(small));
   std::filesystem::remove(dir + "/manifest.json");
   const auto  text   = read_file(dir + "/ledger.txt");
   std::size_t missed = 0, flips = 0;
   for (std::size_t i = 0; i < text.size(); ++i)
      for (int bit = 0; bit < 8; ++bit) {
         auto t = text;
         t[i]   = static_cast<char>(t[i] ^ (1 << bit));
         write_file(dir + "/ledger.txt", t);
         missed += audit_run(dir).ok;
         ++flips;
      }

   // random bits of the full 1000-block ledger
   std::mt19937_64 rng(10);
   const auto&     big = a.files.at("ledger.txt");
   std::size_t     big_missed = 0, big_flips = 200;
   for (std::size_t k = 0; k < big_flips; ++k) {
      auto t = big;
      auto i = rng() % t.size();
      t[i]   = static_cast<char>(t[i] ^ (1 << (rng() % 8)));
      big_missed += !detected(t);
   }
   return {same && missed == 0 && big_missed == 0,
           fmt("rerun byte-identical %s (%zu files); undetected flips %zu/%zu exhaustive, %zu/%zu sampled",
               same ? "yes" : "NO", a.files.size(), missed, flips, big_missed, big_flips)};
}

} // namespace

int main(int argc, char** argv) {
   std::string only = argc > 1 ? argv[1] : "";
   auto        want = [&](const char* id) { return only.empty() || only == id; };
   if (want("AC1"))
      report("AC1", "equation unit suite", ac1);
   if (want("AC2"))
      report("AC2", "incremental exactness", ac2);
   if (want("AC3"))
      report("AC3", "GA vs exhaustive oracle", ac3);
   if (want("AC4"))
      report("AC4", "rationality", ac4);
   if (want("AC5"))
      report("AC5", "honest reputation exactness", ac5);
   if (want("AC6"))
      report("AC6", "attack resistance", ac6);
   if (want("AC7"))
      report("AC7", "committee distribution", ac7);
   if (want("AC8"))
      report("AC8", "throughput/latency trend", ac8);
   if (want("AC9"))
      report("AC9", "epsilon response", ac9);
   if (want("AC10"))
      report("AC10", "determinism and integrity", ac10);
   return failures == 0 ? 0 : 1;
}
