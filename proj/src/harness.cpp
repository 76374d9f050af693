#include <qcchain/error.hpp>
#include <qcchain/harness.hpp>
#include <qcchain/record_io.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace qcchain {

using nlohmann::json;

namespace {

constexpr const char* code_version = "qcchain 0.1.0";

constexpr std::array<std::pair<Scenario, std::string_view>, 6> scenario_names{{
   {Scenario::rationality, "rationality"},
   {Scenario::throughput_latency, "throughput_latency"},
   {Scenario::epsilon_response, "epsilon_response"},
   {Scenario::attack_resistance, "attack_resistance"},
   {Scenario::reputation_separation, "reputation_separation"},
   {Scenario::committee_distribution, "committee_distribution"},
}};

} // namespace

std::string_view to_string(Scenario s) {
   for (auto [k, v] : scenario_names)
      if (k == s)
         return v;
   return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view name) {
   for (auto [k, v] : scenario_names)
      if (v == name)
         return k;
   return std::nullopt;
}

ScenarioConfig ScenarioConfig::defaults(Scenario s) {
   ScenarioConfig c;
   c.scenario = s;
   switch (s) {
      case Scenario::rationality: c.dataset.n_artifacts = 1000; break;
      case Scenario::throughput_latency: c.dataset.n_artifacts = c.sweep.transactions; break;
      case Scenario::epsilon_response: c.dataset.n_artifacts = 400; break;
      case Scenario::attack_resistance: c.dataset.n_artifacts = 500; break;
      case Scenario::reputation_separation:
         c.malicious_fraction  = 0.5;
         c.dataset.n_artifacts = 200;
         break;
      case Scenario::committee_distribution: c.repetitions = 1000; break;
   }
   return c;
}

void ScenarioConfig::validate() const {
   if (nodes == 0)
      throw Error(ErrorCode::invalid_argument, "nodes must be positive");
   if (!(malicious_fraction >= 0 && malicious_fraction <= 1))
      throw Error(ErrorCode::invalid_argument, "malicious_fraction must lie in [0, 1]");
   if (repetitions == 0)
      throw Error(ErrorCode::invalid_argument, "repetitions must be positive");
   if (consensus.quorum() > nodes)
      throw Error(ErrorCode::infeasible_scenario, "quorum 2f+1 exceeds the node count");
   for (double f : sweep.malicious_fractions)
      if (!(f >= 0 && f <= 1))
         throw Error(ErrorCode::invalid_argument, "sweep malicious fractions must lie in [0, 1]");
   for (double f : sweep.distribution_fractions)
      if (!(f >= 0 && f <= 1))
         throw Error(ErrorCode::invalid_argument, "distribution fractions must lie in [0, 1]");
   for (auto n : sweep.nodes)
      if (n < consensus.quorum())
         throw Error(ErrorCode::infeasible_scenario, "sweep node count below the quorum");
   if (!(sweep.step_factor > 0))
      throw Error(ErrorCode::invalid_argument, "step_factor must be positive");
   dataset.validate();
   committee.validate();
   ga.validate();
   consensus.validate();
   scoring.validate();
   network.latency.validate();
}

// ---------------------------------------------------------------- config io

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::parse_error, "config: " + what); }

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
   if (!obj.is_object())
      config_error(std::string(where) + " must be an object");
   for (const auto& [k, _] : obj.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
         config_error("unknown key '" + std::string(where) + "." + k + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
   auto it = obj.find(key);
   if (it == obj.end())
      return;
   if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean())
         config_error(std::string(key) + " must be a boolean");
   } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_unsigned())
         config_error(std::string(key) + " must be a nonnegative integer");
   } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number())
         config_error(std::string(key) + " must be a number");
   }
   out = it->get<T>();
}

template <typename T>
void read_list(const json& obj, const char* key, std::vector<T>& out) {
   auto it = obj.find(key);
   if (it == obj.end())
      return;
   if (!it->is_array())
      config_error(std::string(key) + " must be a list");
   std::vector<T> v;
   for (const auto& x : *it) {
      if (std::is_integral_v<T> ? !x.is_number_unsigned() : !x.is_number())
         config_error(std::string(key) + " holds a non-numeric entry");
      v.push_back(x.get<T>());
   }
   out = std::move(v);
}

LatencyModel::Kind parse_latency_kind(const std::string& s) {
   if (s == "constant")
      return LatencyModel::Kind::constant;
   if (s == "uniform")
      return LatencyModel::Kind::uniform;
   if (s == "lognormal")
      return LatencyModel::Kind::lognormal;
   config_error("unknown latency kind '" + s + "'");
}

const char* latency_kind_name(LatencyModel::Kind k) {
   switch (k) {
      case LatencyModel::Kind::constant: return "constant";
      case LatencyModel::Kind::uniform: return "uniform";
      case LatencyModel::Kind::lognormal: return "lognormal";
   }
   return "uniform";
}

} // namespace

ScenarioConfig apply_config(const json& doc, ScenarioConfig c) {
   only_keys(doc, "config",
             {"scenario", "nodes", "malicious_fraction", "transactions", "dataset", "committee", "ga", "consensus",
              "scoring", "network", "sweep", "repetitions", "seed"});
   if (auto it = doc.find("scenario"); it != doc.end()) {
      if (!it->is_string())
         config_error("scenario must be a string");
      auto s = parse_scenario(it->get<std::string>());
      if (!s)
         config_error("unknown scenario '" + it->get<std::string>() + "'");
      c.scenario = *s;
   }
   read(doc, "nodes", c.nodes);
   read(doc, "malicious_fraction", c.malicious_fraction);
   read(doc, "transactions", c.transactions);
   read(doc, "repetitions", c.repetitions);
   read(doc, "seed", c.seed);

   if (auto it = doc.find("dataset"); it != doc.end()) {
      only_keys(*it, "dataset", {"n_artifacts", "ref_mean", "ref_variance", "variance_is_sigma", "target_rule", "seed"});
      read(*it, "n_artifacts", c.dataset.n_artifacts);
      read(*it, "ref_mean", c.dataset.ref_mean);
      read(*it, "ref_variance", c.dataset.ref_variance);
      read(*it, "variance_is_sigma", c.dataset.variance_is_sigma);
      read(*it, "seed", c.dataset.seed);
      if (auto r = it->find("target_rule"); r != it->end()) {
         if (*r == "uniform")
            c.dataset.target_rule = TargetRule::uniform;
         else if (*r == "preferential")
            c.dataset.target_rule = TargetRule::preferential;
         else
            config_error("target_rule must be 'uniform' or 'preferential'");
      }
   }
   if (auto it = doc.find("committee"); it != doc.end()) {
      only_keys(*it, "committee", {"K", "theta", "theta_fraction", "max_subscription_rounds"});
      read(*it, "K", c.committee.K);
      read(*it, "theta", c.committee.theta);
      read(*it, "theta_fraction", c.committee.theta_fraction);
      read(*it, "max_subscription_rounds", c.committee.max_subscription_rounds);
   }
   if (auto it = doc.find("ga"); it != doc.end()) {
      only_keys(*it, "ga",
                {"population_size", "generations", "crossover_rate", "mutation_rate", "tournament_size",
                 "stall_generations", "seed"});
      read(*it, "population_size", c.ga.population_size);
      read(*it, "generations", c.ga.generations);
      read(*it, "crossover_rate", c.ga.crossover_rate);
      read(*it, "mutation_rate", c.ga.mutation_rate);
      read(*it, "tournament_size", c.ga.tournament_size);
      read(*it, "stall_generations", c.ga.stall_generations);
      read(*it, "seed", c.ga.seed);
   }
   if (auto it = doc.find("consensus"); it != doc.end()) {
      only_keys(*it, "consensus", {"f", "approval_fraction", "time_smoothing", "epsilon"});
      read(*it, "f", c.consensus.f);
      read(*it, "approval_fraction", c.consensus.approval_fraction);
      read(*it, "time_smoothing", c.consensus.time_smoothing);
      if (auto e = it->find("epsilon"); e != it->end()) {
         only_keys(*e, "consensus.epsilon", {"T", "k", "t0"});
         read(*e, "T", c.consensus.epsilon.ceiling);
         read(*e, "k", c.consensus.epsilon.steepness);
         read(*e, "t0", c.consensus.epsilon.midpoint);
      }
   }
   if (auto it = doc.find("scoring"); it != doc.end()) {
      only_keys(*it, "scoring", {"damping", "initial_score", "epsilon", "fixed_point_tolerance"});
      read(*it, "damping", c.scoring.damping);
      read(*it, "initial_score", c.scoring.initial_score);
      read(*it, "epsilon", c.scoring.epsilon);
      read(*it, "fixed_point_tolerance", c.scoring.fixed_point_tolerance);
   }
   if (auto it = doc.find("network"); it != doc.end()) {
      only_keys(*it, "network",
                {"latency", "heterogeneity", "arrival_interval", "timeout_factor", "proposal_cost",
                 "update_entry_cost", "aggregation_cost", "initial_epsilon", "proportional_quorum"});
      auto& n = c.network;
      if (auto l = it->find("latency"); l != it->end()) {
         only_keys(*l, "network.latency", {"kind", "mean", "spread", "seed"});
         if (auto k = l->find("kind"); k != l->end()) {
            if (!k->is_string())
               config_error("latency kind must be a string");
            n.latency.kind = parse_latency_kind(k->get<std::string>());
         }
         read(*l, "mean", n.latency.mean);
         read(*l, "spread", n.latency.spread);
         read(*l, "seed", n.latency.seed);
      }
      read(*it, "heterogeneity", n.heterogeneity);
      read(*it, "arrival_interval", n.arrival_interval);
      read(*it, "timeout_factor", n.timeout_factor);
      read(*it, "proposal_cost", n.proposal_cost);
      read(*it, "update_entry_cost", n.update_entry_cost);
      read(*it, "aggregation_cost", n.aggregation_cost);
      read(*it, "initial_epsilon", n.initial_epsilon);
      read(*it, "proportional_quorum", n.proportional_quorum);
   }
   if (auto it = doc.find("sweep"); it != doc.end()) {
      only_keys(*it, "sweep",
                {"nodes", "transactions", "malicious_fractions", "distribution_fractions", "burn_in_rounds",
                 "step_round", "step_factor"});
      read_list(*it, "nodes", c.sweep.nodes);
      read(*it, "transactions", c.sweep.transactions);
      read_list(*it, "malicious_fractions", c.sweep.malicious_fractions);
      read_list(*it, "distribution_fractions", c.sweep.distribution_fractions);
      read(*it, "burn_in_rounds", c.sweep.burn_in_rounds);
      read(*it, "step_round", c.sweep.step_round);
      read(*it, "step_factor", c.sweep.step_factor);
   }
   return c;
}

json to_json(const ScenarioConfig& c) {
   json j;
   j["scenario"]           = std::string(to_string(c.scenario));
   j["nodes"]              = c.nodes;
   j["malicious_fraction"] = c.malicious_fraction;
   j["transactions"]       = c.transactions;
   j["repetitions"]        = c.repetitions;
   j["seed"]               = c.seed;
   j["dataset"]            = {{"n_artifacts", c.dataset.n_artifacts},
                              {"ref_mean", c.dataset.ref_mean},
                              {"ref_variance", c.dataset.ref_variance},
                              {"variance_is_sigma", c.dataset.variance_is_sigma},
                              {"target_rule", c.dataset.target_rule == TargetRule::uniform ? "uniform" : "preferential"},
                              {"seed", c.dataset.seed}};
   j["committee"]          = {{"K", c.committee.K},
                              {"theta", c.committee.theta},
                              {"theta_fraction", c.committee.theta_fraction},
                              {"max_subscription_rounds", c.committee.max_subscription_rounds}};
   j["ga"]                 = {{"population_size", c.ga.population_size},   {"generations", c.ga.generations},
                              {"crossover_rate", c.ga.crossover_rate},     {"mutation_rate", c.ga.mutation_rate},
                              {"tournament_size", c.ga.tournament_size},   {"stall_generations", c.ga.stall_generations},
                              {"seed", c.ga.seed}};
   j["consensus"]          = {{"f", c.consensus.f},
                              {"approval_fraction", c.consensus.approval_fraction},
                              {"time_smoothing", c.consensus.time_smoothing},
                              {"epsilon",
                               {{"T", c.consensus.epsilon.ceiling},
                                {"k", c.consensus.epsilon.steepness},
                                {"t0", c.consensus.epsilon.midpoint}}}};
   j["scoring"]            = {{"damping", c.scoring.damping},
                              {"initial_score", c.scoring.initial_score},
                              {"epsilon", c.scoring.epsilon},
                              {"fixed_point_tolerance", c.scoring.fixed_point_tolerance}};
   const auto& n           = c.network;
   j["network"]            = {{"latency",
                               {{"kind", latency_kind_name(n.latency.kind)},
                                {"mean", n.latency.mean},
                                {"spread", n.latency.spread},
                                {"seed", n.latency.seed}}},
                              {"heterogeneity", n.heterogeneity},
                              {"arrival_interval", n.arrival_interval},
                              {"timeout_factor", n.timeout_factor},
                              {"proposal_cost", n.proposal_cost},
                              {"update_entry_cost", n.update_entry_cost},
                              {"aggregation_cost", n.aggregation_cost},
                              {"initial_epsilon", n.initial_epsilon},
                              {"proportional_quorum", n.proportional_quorum}};
   j["sweep"]              = {{"nodes", c.sweep.nodes},
                              {"transactions", c.sweep.transactions},
                              {"malicious_fractions", c.sweep.malicious_fractions},
                              {"distribution_fractions", c.sweep.distribution_fractions},
                              {"burn_in_rounds", c.sweep.burn_in_rounds},
                              {"step_round", c.sweep.step_round},
                              {"step_factor", c.sweep.step_factor}};
   return j;
}

Digest config_digest(const ScenarioConfig& cfg) {
   const auto text = to_json(cfg).dump();
   return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetConfig scenario_dataset(const ScenarioConfig& cfg) {
   DatasetConfig d = cfg.dataset;
   d.seed          = mix_seed(cfg.seed, cfg.dataset.seed);
   return d;
}

SimulationConfig simulation_config(const ScenarioConfig& cfg, std::size_t nodes, double malicious_fraction,
                                   std::uint64_t seed) {
   SimulationConfig s;
   s.nodes               = nodes;
   s.malicious_fraction  = malicious_fraction;
   s.committee           = cfg.committee;
   s.ga                  = cfg.ga;
   s.consensus           = cfg.consensus;
   s.scoring             = cfg.scoring;
   s.latency             = cfg.network.latency;
   s.heterogeneity       = cfg.network.heterogeneity;
   s.arrival_interval    = cfg.network.arrival_interval;
   s.timeout_factor      = cfg.network.timeout_factor;
   s.proposal_cost       = cfg.network.proposal_cost;
   s.update_entry_cost   = cfg.network.update_entry_cost;
   s.aggregation_cost    = cfg.network.aggregation_cost;
   s.initial_epsilon     = cfg.network.initial_epsilon;
   s.proportional_quorum = cfg.network.proportional_quorum;
   s.seed                = seed;
   return s;
}

// ---------------------------------------------------------------- scenarios

namespace {

std::vector<Transaction> workload_of(const ScenarioConfig& cfg, std::size_t limit = 0) {
   auto wl = to_workload(generate_dataset(scenario_dataset(cfg)));
   std::size_t n = limit ? limit : cfg.transactions;
   if (n > 0 && n < wl.size())
      wl.resize(n);
   return wl;
}

std::map<ArtifactId, double> scores_of(const ArtifactDag& dag) {
   std::map<ArtifactId, double> out;
   for (const auto& a : dag.artifacts())
      out.emplace(a.id, a.score);
   return out;
}

double safe_pearson(std::span<const double> a, std::span<const double> b) {
   try {
      return pearson(a, b);
   } catch (const Error&) {
      return std::nan("");
   }
}

double safe_spearman(std::span<const double> a, std::span<const double> b) {
   try {
      return spearman(a, b);
   } catch (const Error&) {
      return std::nan("");
   }
}

// Runs fn(i) for i in [0, n) on all hardware threads; results stay indexed.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
   std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
   workers             = std::min(workers, n);
   if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i)
         fn(i);
      return;
   }
   std::atomic<std::size_t> next{0};
   std::exception_ptr       failure;
   std::mutex               failure_mu;
   std::vector<std::thread> pool;
   for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
         for (std::size_t i; (i = next++) < n;) {
            try {
               fn(i);
            } catch (...) {
               std::lock_guard lock(failure_mu);
               if (!failure)
                  failure = std::current_exception();
            }
         }
      });
   for (auto& t : pool)
      t.join();
   if (failure)
      std::rethrow_exception(failure);
}

} // namespace

RationalityReport scenario_rationality(const ScenarioConfig& cfg) {
   cfg.validate();
   auto              wl = workload_of(cfg);
   RationalityReport rep;
   rep.run = run_simulation(simulation_config(cfg, cfg.nodes, 0.0, cfg.seed), wl);

   const ArtifactDag& dag   = *rep.run.nodes.front().dag;
   auto               model = values_of(scores_of(dag));
   auto               pr    = values_of(pagerank_baseline(dag, cfg.scoring.damping, 1e-12, 10000));
   auto               hits  = values_of(hits_baseline(dag, 1e-12, 10000).authority);
   auto nm = min_max_normalize(model), np = min_max_normalize(pr), nh = min_max_normalize(hits);

   rep.pearson_pagerank  = pearson(nm, np);
   rep.pearson_hits      = pearson(nm, nh);
   rep.spearman_pagerank = spearman(model, pr);
   rep.spearman_hits     = spearman(model, hits);
   auto ids              = dag.ids();
   for (std::size_t i = 0; i < ids.size(); ++i)
      rep.rows.push_back(ScoreRow{ids[i], nm[i], np[i], nh[i]});
   return rep;
}

ThroughputReport scenario_throughput_latency(const ScenarioConfig& cfg) {
   cfg.validate();
   auto             wl = workload_of(cfg, cfg.sweep.transactions);
   ThroughputReport rep;
   for (auto n : cfg.sweep.nodes) {
      auto       run = run_simulation(simulation_config(cfg, n, cfg.malicious_fraction, cfg.seed), wl);
      SweepPoint p;
      p.nodes                = n;
      p.summary              = measure(run.metrics);
      p.ledger_disagreements = run.metrics.ledger_disagreements;
      p.score_disagreements  = run.metrics.score_disagreements;
      p.discarded            = run.metrics.discarded;
      rep.points.push_back(p);
   }
   return rep;
}

EpsilonReport scenario_epsilon_response(const ScenarioConfig& cfg) {
   cfg.validate();
   auto          wl = workload_of(cfg);
   EpsilonReport rep;
   rep.step_round = cfg.sweep.step_round ? cfg.sweep.step_round : wl.size() / 2;
   auto sim       = simulation_config(cfg, cfg.nodes, cfg.malicious_fraction, cfg.seed);
   sim.latency_step = LatencyStep{rep.step_round, cfg.network.latency.mean * cfg.sweep.step_factor};
   rep.run          = run_simulation(sim, wl);

   for (const auto& r : rep.run.metrics.rounds) {
      if (!r.committed)
         continue;
      rep.trace.push_back(EpsilonRow{r.round, r.epsilon, r.decided - r.started,
                                     r.round >= rep.step_round ? sim.latency_step->mean : sim.latency.mean});
   }
   const std::size_t pre_from  = rep.step_round - rep.step_round / 4;
   const std::size_t post_from = wl.size() - (wl.size() - rep.step_round) / 4;
   double            pre = 0, post = 0;
   std::size_t       npre = 0, npost = 0;
   for (const auto& row : rep.trace) {
      if (row.round >= pre_from && row.round < rep.step_round) {
         pre += row.epsilon;
         ++npre;
      }
      if (row.round >= post_from) {
         post += row.epsilon;
         ++npost;
      }
   }
   rep.pre_step_epsilon  = npre ? pre / static_cast<double>(npre) : std::nan("");
   rep.post_step_epsilon = npost ? post / static_cast<double>(npost) : std::nan("");
   return rep;
}

AttackReport scenario_attack_resistance(const ScenarioConfig& cfg) {
   cfg.validate();
   auto         wl = workload_of(cfg);
   AttackReport rep;
   rep.clean         = run_simulation(simulation_config(cfg, cfg.nodes, 0.0, cfg.seed), wl);
   const auto clean  = scores_of(*rep.clean.nodes.front().dag);

   auto row_for = [&](double fraction, const SimulationResult& run) {
      const auto          scores = scores_of(*run.nodes.front().dag);
      std::vector<double> a, b;
      for (const auto& [id, s] : clean)
         if (auto it = scores.find(id); it != scores.end()) {
            a.push_back(s);
            b.push_back(it->second);
         }
      AttackRow row;
      row.malicious_fraction = fraction;
      row.pearson            = safe_pearson(a, b);
      row.spearman           = safe_spearman(a, b);
      for (const auto& r : run.metrics.rounds) {
         row.rounds += r.committed;
         row.honest_rounds += r.committed && r.honest_scores;
      }
      return row;
   };
   rep.rows.push_back(row_for(0.0, rep.clean));
   for (double f : cfg.sweep.malicious_fractions)
      rep.rows.push_back(row_for(f, run_simulation(simulation_config(cfg, cfg.nodes, f, cfg.seed), wl)));
   return rep;
}

ReputationReport scenario_reputation_separation(const ScenarioConfig& cfg) {
   cfg.validate();
   auto             wl = workload_of(cfg);
   ReputationReport rep;
   rep.run       = run_simulation(simulation_config(cfg, cfg.nodes, cfg.malicious_fraction, cfg.seed), wl);
   rep.committed = rep.run.metrics.committed;
   double hs = 0, ms = 0;
   rep.honest_min = std::numeric_limits<double>::infinity();
   rep.honest_max = 0.0;
   for (const auto& n : rep.run.nodes) {
      if (n.honest()) {
         rep.honest.emplace_back(n.id, n.reputation);
         hs += n.reputation;
         rep.honest_min = std::min(rep.honest_min, n.reputation);
         rep.honest_max = std::max(rep.honest_max, n.reputation);
      } else {
         rep.malicious.emplace_back(n.id, n.reputation);
         ms += n.reputation;
      }
   }
   if (rep.honest.empty())
      rep.honest_min = 0.0;
   rep.honest_mean    = rep.honest.empty() ? 0.0 : hs / static_cast<double>(rep.honest.size());
   rep.malicious_mean = rep.malicious.empty() ? 0.0 : ms / static_cast<double>(rep.malicious.size());
   return rep;
}

double committee_trial(const ScenarioConfig& cfg, double malicious_fraction, std::size_t burn_in,
                       std::uint64_t seed) {
   ScenarioConfig small      = cfg;
   small.seed                = seed;
   small.dataset.n_artifacts = std::max<std::size_t>(burn_in, 1);
   auto wl                   = to_workload(generate_dataset(scenario_dataset(small)));
   wl.resize(burn_in);
   auto run = run_simulation(simulation_config(cfg, cfg.nodes, malicious_fraction, seed), wl);
   const auto& term = run.metrics.committee_history.back();
   return static_cast<double>(term.malicious_count) / static_cast<double>(term.members.size());
}

DistributionReport scenario_committee_distribution(const ScenarioConfig& cfg) {
   cfg.validate();
   const std::size_t k       = std::min(cfg.committee.K, cfg.nodes);
   const std::size_t burn_in = cfg.sweep.burn_in_rounds ? cfg.sweep.burn_in_rounds : 2 * k;
   DistributionReport rep;
   for (std::size_t fi = 0; fi < cfg.sweep.distribution_fractions.size(); ++fi) {
      const double    f = cfg.sweep.distribution_fractions[fi];
      DistributionRow row;
      row.malicious_fraction = f;
      row.fractions.resize(cfg.repetitions);
      parallel_for(cfg.repetitions, [&](std::size_t t) {
         row.fractions[t] = committee_trial(cfg, f, burn_in, mix_seed(mix_seed(cfg.seed, fi), t));
      });
      for (double x : row.fractions) {
         const double pct = 100.0 * x;
         if (pct >= 50.0)
            ++row.at_or_above_half;
         else
            ++row.buckets[static_cast<std::size_t>(pct / 10.0)];
         row.max_fraction = std::max(row.max_fraction, x);
      }
      rep.rows.push_back(std::move(row));
   }
   return rep;
}

// ---------------------------------------------------------------- outputs

namespace {

std::string real(double v) { return format_real(v); }

std::string rounds_csv(const RunMetrics& m) {
   std::ostringstream os;
   os << "round,txn,leader,submitted,started,decided,finished,committed,epsilon,proposals,quorum_malicious,"
         "artifacts,honest_scores,latency\n";
   for (const auto& r : m.rounds)
      os << r.round << ',' << r.txn.value << ',' << r.leader.value << ',' << real(r.submitted) << ','
         << real(r.started) << ',' << real(r.decided) << ',' << real(r.finished) << ',' << r.committed << ','
         << real(r.epsilon) << ',' << r.proposals << ',' << r.quorum_malicious << ',' << r.artifacts << ','
         << r.honest_scores << ',' << real(r.finished - r.submitted) << '\n';
   return os.str();
}

std::string ids_joined(const std::vector<NodeId>& ids) {
   std::string s;
   for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i)
         s += ';';
      s += std::to_string(ids[i].value);
   }
   return s;
}

std::string committee_csv(const RunMetrics& m) {
   std::ostringstream os;
   os << "term,started_round,members,leader_schedule,malicious_count\n";
   for (const auto& t : m.committee_history)
      os << t.term << ',' << t.started_round << ',' << ids_joined(t.members) << ',' << ids_joined(t.leader_schedule)
         << ',' << t.malicious_count << '\n';
   return os.str();
}

void add_run_files(RunOutput& out, const SimulationResult& run) {
   out.files["rounds.csv"]    = rounds_csv(run.metrics);
   out.files["committee.csv"] = committee_csv(run.metrics);
   out.files["ledger.txt"]    = encode_ledger(run.nodes.front().ledger);
   out.files["dag.txt"]       = encode_dag(*run.nodes.front().dag);
}

json summary_json(const RunSummary& s) {
   return {{"mean_latency", s.mean_latency},   {"median_latency", s.median_latency}, {"p95_latency", s.p95_latency},
           {"throughput", s.throughput},       {"epsilon_mean", s.epsilon_mean},     {"epsilon_min", s.epsilon_min},
           {"epsilon_max", s.epsilon_max},     {"epsilon_final", s.epsilon_final},   {"committed", s.committed}};
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

RunOutput run_scenario(const ScenarioConfig& cfg) {
   RunOutput out;
   json      s;
   s["scenario"] = std::string(to_string(cfg.scenario));
   switch (cfg.scenario) {
      case Scenario::rationality: {
         auto               rep = scenario_rationality(cfg);
         std::ostringstream os;
         os << "artifact,model,pagerank,hits\n";
         for (const auto& r : rep.rows)
            os << r.id.value << ',' << real(r.model) << ',' << real(r.pagerank) << ',' << real(r.hits) << '\n';
         out.files["scores.csv"] = os.str();
         add_run_files(out, rep.run);
         s["pearson_pagerank"]  = rep.pearson_pagerank;
         s["pearson_hits"]      = rep.pearson_hits;
         s["spearman_pagerank"] = rep.spearman_pagerank;
         s["spearman_hits"]     = rep.spearman_hits;
         s["run"]               = summary_json(measure(rep.run.metrics));
         break;
      }
      case Scenario::throughput_latency: {
         auto               rep = scenario_throughput_latency(cfg);
         std::ostringstream os;
         os << "nodes,mean_latency,median_latency,p95_latency,throughput,committed,discarded,ledger_disagreements,"
               "score_disagreements\n";
         json points = json::array();
         for (const auto& p : rep.points) {
            os << p.nodes << ',' << real(p.summary.mean_latency) << ',' << real(p.summary.median_latency) << ','
               << real(p.summary.p95_latency) << ',' << real(p.summary.throughput) << ',' << p.summary.committed
               << ',' << p.discarded << ',' << p.ledger_disagreements << ',' << p.score_disagreements << '\n';
            auto j                    = summary_json(p.summary);
            j["nodes"]                = p.nodes;
            j["ledger_disagreements"] = p.ledger_disagreements;
            j["score_disagreements"]  = p.score_disagreements;
            points.push_back(j);
         }
         out.files["throughput.csv"] = os.str();
         s["points"]                 = points;
         break;
      }
      case Scenario::epsilon_response: {
         auto               rep = scenario_epsilon_response(cfg);
         std::ostringstream os;
         os << "round,epsilon,consensus_time,latency_mean\n";
         for (const auto& r : rep.trace)
            os << r.round << ',' << real(r.epsilon) << ',' << real(r.consensus_time) << ',' << real(r.latency_mean)
               << '\n';
         out.files["epsilon_trace.csv"] = os.str();
         add_run_files(out, rep.run);
         s["step_round"]        = rep.step_round;
         s["pre_step_epsilon"]  = number_or_null(rep.pre_step_epsilon);
         s["post_step_epsilon"] = number_or_null(rep.post_step_epsilon);
         s["run"]               = summary_json(measure(rep.run.metrics));
         break;
      }
      case Scenario::attack_resistance: {
         auto               rep = scenario_attack_resistance(cfg);
         std::ostringstream os;
         os << "malicious_fraction,pearson,spearman,honest_rounds,rounds\n";
         json rows = json::array();
         for (const auto& r : rep.rows) {
            os << real(r.malicious_fraction) << ',' << real(r.pearson) << ',' << real(r.spearman) << ','
               << r.honest_rounds << ',' << r.rounds << '\n';
            rows.push_back({{"malicious_fraction", r.malicious_fraction},
                            {"pearson", number_or_null(r.pearson)},
                            {"spearman", number_or_null(r.spearman)},
                            {"honest_rounds", r.honest_rounds},
                            {"rounds", r.rounds}});
         }
         out.files["attack.csv"] = os.str();
         add_run_files(out, rep.clean);
         s["rows"] = rows;
         break;
      }
      case Scenario::reputation_separation: {
         auto               rep = scenario_reputation_separation(cfg);
         std::ostringstream os;
         os << "node,behavior,reputation,slowness\n";
         for (const auto& n : rep.run.nodes)
            os << n.id.value << ',' << (n.honest() ? "honest" : "malicious") << ',' << real(n.reputation) << ','
               << real(rep.run.slowness[n.id.value]) << '\n';
         out.files["reputations.csv"] = os.str();
         add_run_files(out, rep.run);
         s["honest_min"]     = rep.honest_min;
         s["honest_max"]     = rep.honest_max;
         s["honest_mean"]    = rep.honest_mean;
         s["malicious_mean"] = rep.malicious_mean;
         s["committed"]      = rep.committed;
         s["run"]            = summary_json(measure(rep.run.metrics));
         break;
      }
      case Scenario::committee_distribution: {
         auto               rep = scenario_committee_distribution(cfg);
         std::ostringstream hist, trials;
         hist << "malicious_fraction,bucket,count\n";
         trials << "malicious_fraction,trial,committee_malicious_fraction\n";
         static constexpr const char* labels[] = {"[0,10)", "[10,20)", "[20,30)", "[30,40)", "[40,50)"};
         json                         rows     = json::array();
         for (const auto& r : rep.rows) {
            for (std::size_t b = 0; b < 5; ++b)
               hist << real(r.malicious_fraction) << ',' << labels[b] << ',' << r.buckets[b] << '\n';
            for (std::size_t t = 0; t < r.fractions.size(); ++t)
               trials << real(r.malicious_fraction) << ',' << t << ',' << real(r.fractions[t]) << '\n';
            rows.push_back({{"malicious_fraction", r.malicious_fraction},
                            {"buckets", r.buckets},
                            {"at_or_above_half", r.at_or_above_half},
                            {"max_fraction", r.max_fraction},
                            {"trials", r.fractions.size()}});
         }
         out.files["committee_distribution.csv"] = hist.str();
         out.files["committee_trials.csv"]       = trials.str();
         s["rows"]                               = rows;
         break;
      }
   }
   out.summary = s;
   return out;
}

namespace {

std::string file_digest(std::string_view content) {
   return sha256(std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size())).hex();
}

} // namespace

void write_run(const std::string& dir, const ScenarioConfig& cfg, const RunOutput& out) {
   std::error_code ec;
   std::filesystem::create_directories(dir, ec);
   if (ec)
      throw Error(ErrorCode::io_error, "cannot create " + dir + ": " + ec.message());
   auto files            = out.files;
   files["summary.json"] = out.summary.dump(2) + "\n";
   files["config.json"]  = to_json(cfg).dump(2) + "\n";

   json manifest;
   manifest["code_version"]  = code_version;
   manifest["scenario"]      = std::string(to_string(cfg.scenario));
   manifest["seed"]          = cfg.seed;
   manifest["config_digest"] = config_digest(cfg).hex();
   for (const auto& [name, content] : files) {
      write_file(dir + "/" + name, content);
      manifest["files"][name] = file_digest(content);
   }
   write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

AuditReport audit_run(const std::string& dir) {
   AuditReport rep;
   auto problem = [&](std::string what) {
      rep.ok = false;
      rep.problems.push_back(std::move(what));
   };
   namespace fs = std::filesystem;

   if (fs::exists(dir + "/manifest.json")) {
      try {
         auto manifest = json::parse(read_file(dir + "/manifest.json"));
         for (const auto& [name, digest] : manifest.at("files").items()) {
            if (!fs::exists(dir + "/" + name)) {
               problem("missing file " + name);
               continue;
            }
            if (file_digest(read_file(dir + "/" + name)) != digest.get<std::string>())
               problem("digest mismatch for " + name);
         }
      } catch (const std::exception& e) {
         problem(std::string("unreadable manifest: ") + e.what());
      }
   }

   const bool has_ledger = fs::exists(dir + "/ledger.txt"), has_dag = fs::exists(dir + "/dag.txt");
   if (!has_ledger && !has_dag)
      return rep;
   if (has_ledger != has_dag) {
      problem("ledger.txt and dag.txt must be saved together");
      return rep;
   }

   Ledger      ledger;
   ArtifactDag dag;
   try {
      ledger = decode_ledger(read_file(dir + "/ledger.txt"));
   } catch (const Error& e) {
      problem(std::string("ledger: ") + e.what());
      return rep;
   }
   try {
      dag = decode_dag(read_file(dir + "/dag.txt"));
   } catch (const Error& e) {
      problem(std::string("dag: ") + e.what());
      return rep;
   }
   rep.blocks    = ledger.size();
   rep.artifacts = dag.size();
   if (!verify_chain(ledger))
      problem("block chain does not verify");
   if (!dag.is_acyclic())
      problem("dag has a cycle");
   if (!dag.adjacency_consistent())
      problem("dag adjacency is inconsistent");

   std::map<ArtifactId, double> last_score;
   std::set<ArtifactId>         endorsed;
   for (const auto& b : ledger.blocks()) {
      const auto& txns = b->transactions;
      if (txns.empty() || txns.front().kind() != TxnKind::endorsement) {
         problem("block " + std::to_string(b->height) + " does not start with an endorsement");
         continue;
      }
      const auto& e = *txns.front().endorsement();
      if (!endorsed.insert(e.artifact).second)
         problem("artifact " + to_string(e.artifact) + " endorsed twice");
      std::optional<ArtifactId> prev_a;
      std::optional<NodeId>     prev_n;
      for (std::size_t i = 1; i < txns.size(); ++i) {
         if (const auto* s = std::get_if<ScoreUpdatePayload>(&txns[i].payload)) {
            if (prev_n || (prev_a && !(*prev_a < s->artifact)))
               problem("score updates out of order in block " + std::to_string(b->height));
            prev_a               = s->artifact;
            last_score[s->artifact] = s->score;
         } else if (const auto* r = std::get_if<ReputationUpdatePayload>(&txns[i].payload)) {
            if (prev_n && !(*prev_n < r->node))
               problem("reputation updates out of order in block " + std::to_string(b->height));
            if (!(r->delta > 0 && r->delta <= 1))
               problem("reputation delta outside (0, 1] in block " + std::to_string(b->height));
            prev_n = r->node;
         } else {
            problem("second endorsement in block " + std::to_string(b->height));
         }
      }
   }
   if (endorsed.size() != dag.size())
      problem("ledger endorses " + std::to_string(endorsed.size()) + " artifacts, dag holds " +
              std::to_string(dag.size()));
   for (auto id : endorsed)
      if (!dag.contains(id))
         problem("endorsed artifact " + to_string(id) + " missing from dag");
   for (const auto& [id, s] : last_score)
      if (!dag.contains(id) || dag.score(id) != s)
         problem("dag score of " + to_string(id) + " differs from its last committed update");
   return rep;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
   if (j.is_object()) {
      for (const auto& [k, v] : j.items())
         flatten(v, prefix.empty() ? k : prefix + "." + k, out);
   } else if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i)
         flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
   } else if (j.is_string()) {
      out.emplace_back(prefix, j.get<std::string>());
   } else if (j.is_number_float()) {
      out.emplace_back(prefix, format_real(j.get<double>()));
   } else {
      out.emplace_back(prefix, j.dump());
   }
}

} // namespace

std::string merge_reports(const std::vector<std::string>& dirs) {
   std::ostringstream os;
   os << "scenario,run,metric,value\n";
   for (const auto& dir : dirs) {
      json summary;
      try {
         summary = json::parse(read_file(dir + "/summary.json"));
      } catch (const json::exception& e) {
         throw Error(ErrorCode::parse_error, dir + "/summary.json: " + e.what());
      }
      const std::string scenario = summary.value("scenario", "unknown");
      const std::string run      = std::filesystem::path(dir).lexically_normal().filename().string();
      std::vector<std::pair<std::string, std::string>> rows;
      flatten(summary, "", rows);
      for (const auto& [k, v] : rows)
         if (k != "scenario")
            os << scenario << ',' << run << ',' << k << ',' << v << '\n';
   }
   return os.str();
}

std::string dataset_csv(const Dataset& ds) {
   std::ostringstream os;
   os << "artifact,references,drawn,endorsed\n";
   for (std::size_t i = 0; i < ds.entries.size(); ++i) {
      const auto& e = ds.entries[i];
      os << e.id.value << ',' << e.endorsed.size() << ',' << ds.drawn_counts[i] << ',';
      for (std::size_t k = 0; k < e.endorsed.size(); ++k)
         os << (k ? ";" : "") << e.endorsed[k].value;
      os << '\n';
   }
   return os.str();
}

} // namespace qcchain
