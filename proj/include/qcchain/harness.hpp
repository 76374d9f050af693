#pragma once

#include <qcchain/dataset.hpp>
#include <qcchain/simnet.hpp>

#include <json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qcchain {

enum class Scenario {
   rationality,
   throughput_latency,
   epsilon_response,
   attack_resistance,
   reputation_separation,
   committee_distribution,
};

std::string_view        to_string(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view name);

struct NetworkConfig {
   LatencyModel latency;
   double       heterogeneity{1.0};
   double       arrival_interval{0.2};
   double       timeout_factor{10.0};
   double       proposal_cost{0.0005};
   double       update_entry_cost{2e-6};
   double       aggregation_cost{2e-5};
   double       initial_epsilon{-1.0};
   bool         proportional_quorum{true};
};

struct SweepConfig {
   std::vector<std::size_t> nodes{50, 100, 250, 500, 1000};
   std::size_t              transactions{100};
   std::vector<double>      malicious_fractions{0.05, 0.15, 0.25, 0.35, 0.45, 0.49, 0.55, 0.65};
   std::vector<double>      distribution_fractions{0.15, 0.25, 0.49};
   /// Rounds before the recorded rebuild; 0 means 2K.
   std::size_t              burn_in_rounds{0};
   /// Round at which the latency mean is multiplied by step_factor; 0 means
   /// half of the transactions.
   std::size_t              step_round{0};
   double                   step_factor{4.0};
};

struct ScenarioConfig {
   Scenario        scenario{Scenario::rationality};
   std::size_t     nodes{100};
   double          malicious_fraction{0.0};
   /// Transactions to run; 0 means one per dataset artifact.
   std::size_t     transactions{0};
   DatasetConfig   dataset;
   CommitteeConfig committee;
   GaConfig        ga;
   ConsensusConfig consensus;
   ScoringConfig   scoring{0.85, 1.0, 0.0, 1e-9};
   NetworkConfig   network;
   SweepConfig     sweep;
   std::size_t     repetitions{1};
   std::uint64_t   seed{42};

   /// Desk-scale defaults for one scenario.
   static ScenarioConfig defaults(Scenario s);

   void validate() const;
};

/// Applies the keys present in `doc` on top of `base`. Unknown keys and
/// type mismatches throw Error(parse_error); semantic checks run
/// afterwards through validate().
ScenarioConfig apply_config(const nlohmann::json& doc, ScenarioConfig base);
nlohmann::json to_json(const ScenarioConfig& cfg);
/// SHA-256 of the canonical JSON form of the configuration.
Digest         config_digest(const ScenarioConfig& cfg);

/// Dataset used by a scenario: the configured one with its seed mixed with
/// the scenario seed.
DatasetConfig    scenario_dataset(const ScenarioConfig& cfg);
SimulationConfig simulation_config(const ScenarioConfig& cfg, std::size_t nodes, double malicious_fraction,
                                   std::uint64_t seed);

struct ScoreRow {
   ArtifactId id;
   double     model{0.0};
   double     pagerank{0.0};
   double     hits{0.0};
};

struct RationalityReport {
   double                pearson_pagerank{0.0};
   double                pearson_hits{0.0};
   double                spearman_pagerank{0.0};
   double                spearman_hits{0.0};
   std::vector<ScoreRow> rows; // min-max normalised
   SimulationResult      run;
};

struct SweepPoint {
   std::size_t nodes{0};
   RunSummary  summary;
   std::size_t ledger_disagreements{0};
   std::size_t score_disagreements{0};
   std::size_t discarded{0};
};

struct ThroughputReport {
   std::vector<SweepPoint> points;
};

struct EpsilonRow {
   std::size_t round{0};
   double      epsilon{0.0};
   double      consensus_time{0.0};
   double      latency_mean{0.0};
};

struct EpsilonReport {
   std::vector<EpsilonRow> trace;
   std::size_t             step_round{0};
   double                  pre_step_epsilon{0.0};  // mean over the last quarter before the step
   double                  post_step_epsilon{0.0}; // mean over the last quarter of the run
   SimulationResult        run;
};

struct AttackRow {
   double      malicious_fraction{0.0};
   double      pearson{0.0};
   double      spearman{0.0};
   std::size_t honest_rounds{0};
   std::size_t rounds{0};
};

struct AttackReport {
   std::vector<AttackRow> rows; // first row is the clean run against itself
   SimulationResult       clean;
};

struct ReputationReport {
   std::vector<std::pair<NodeId, double>> honest;
   std::vector<std::pair<NodeId, double>> malicious;
   double           honest_min{0.0};
   double           honest_max{0.0};
   double           honest_mean{0.0};
   double           malicious_mean{0.0};
   std::size_t      committed{0};
   SimulationResult run;
};

struct DistributionRow {
   double                     malicious_fraction{0.0};
   std::array<std::size_t, 5> buckets{}; // [0,10) ... [40,50) percent
   std::size_t                at_or_above_half{0};
   double                     max_fraction{0.0};
   std::vector<double>        fractions; // per trial
};

struct DistributionReport {
   std::vector<DistributionRow> rows;
};

RationalityReport  scenario_rationality(const ScenarioConfig& cfg);
ThroughputReport   scenario_throughput_latency(const ScenarioConfig& cfg);
EpsilonReport      scenario_epsilon_response(const ScenarioConfig& cfg);
AttackReport       scenario_attack_resistance(const ScenarioConfig& cfg);
ReputationReport   scenario_reputation_separation(const ScenarioConfig& cfg);
DistributionReport scenario_committee_distribution(const ScenarioConfig& cfg);

/// Committee malicious fraction after a burn-in of `burn_in` rounds for one
/// seeded trial.
double committee_trial(const ScenarioConfig& cfg, double malicious_fraction, std::size_t burn_in,
                       std::uint64_t seed);

/// File name -> content for everything a run writes, plus the summary.
struct RunOutput {
   std::map<std::string, std::string> files;
   nlohmann::json                     summary;
};

RunOutput run_scenario(const ScenarioConfig& cfg);

/// Writes every file of `out` into `dir` (created if missing) together with
/// manifest.json.
void write_run(const std::string& dir, const ScenarioConfig& cfg, const RunOutput& out);

struct AuditReport {
   bool                     ok{true};
   std::vector<std::string> problems;
   std::size_t              blocks{0};
   std::size_t              artifacts{0};
};

/// Ledger and state audit of a saved run directory: chain integrity, DAG
/// structure, and agreement between the ledger's last score updates and
/// the saved DAG.
AuditReport audit_run(const std::string& dir);

/// Merges the summaries of several run directories into one CSV table
/// (scenario, run, metric, value).
std::string merge_reports(const std::vector<std::string>& dirs);

std::string dataset_csv(const Dataset& ds);

} // namespace qcchain
