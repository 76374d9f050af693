#pragma once

#include <qcchain/committee.hpp>
#include <qcchain/consensus.hpp>
#include <qcchain/ledger.hpp>
#include <qcchain/node.hpp>
#include <qcchain/scoring.hpp>

#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <vector>

namespace qcchain {

/// Point-to-point message latency. `mean` is the expected latency in
/// seconds for every kind; `spread` is the relative half-width for uniform
/// and the log-space sigma for lognormal.
struct LatencyModel {
   enum class Kind { constant, uniform, lognormal };

   Kind          kind{Kind::uniform};
   double        mean{0.002};
   double        spread{0.5};
   std::uint64_t seed{0};

   double sample(std::mt19937_64& rng) const;
   void   validate() const;
};

enum class EventKind { txn_arrival, message_delivery, round_timeout };

struct SimEvent {
   SimTime       at{0.0};
   std::uint64_t sequence{0};
   EventKind     kind{EventKind::message_delivery};
   std::uint32_t message{0}; // simulator-specific message type
   std::uint32_t from{0};
   std::uint32_t to{0};
   std::uint32_t round{0};
};

/// Min-queue over (at, sequence): a deterministic total order.
class EventQueue {
public:
   void          push(SimTime at, EventKind kind, std::uint32_t message = 0, std::uint32_t from = 0,
                      std::uint32_t to = 0, std::uint32_t round = 0);
   SimEvent      pop();
   bool          empty() const { return heap_.empty(); }
   std::size_t   size() const { return heap_.size(); }
   std::uint64_t pushed() const { return next_seq_; }

private:
   struct Later {
      bool operator()(const SimEvent& a, const SimEvent& b) const {
         return a.at > b.at || (a.at == b.at && a.sequence > b.sequence);
      }
   };
   std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
   std::uint64_t                                             next_seq_{0};
};

struct LatencyStep {
   std::size_t at_round{0}; // applies from this round on (0-based)
   double      mean{0.0};
};

struct SimulationConfig {
   std::size_t      nodes{100};
   double           malicious_fraction{0.0};
   CommitteeConfig  committee;
   GaConfig         ga;
   ConsensusConfig  consensus;
   ScoringConfig    scoring;
   LatencyModel     latency;
   /// Each node's links are slower by a fixed factor drawn from 1 + U(0, h).
   double           heterogeneity{1.0};
   /// Spacing between transaction submissions; 0 submits everything at once.
   double           arrival_interval{0.2};
   /// Leader closes proposal collection after this many mean latencies.
   double           timeout_factor{10.0};
   /// Simulated compute costs (seconds).
   double           proposal_cost{0.0005};
   double           update_entry_cost{2e-6};
   double           aggregation_cost{2e-5}; // per proposal
   /// Epsilon every node starts with; negative means adapt_epsilon(0).
   double           initial_epsilon{-1.0};
   /// Only let a share of the quorum matching the network's malicious
   /// fraction (rounded to nearest, ties to honest) be malicious.
   bool             proportional_quorum{true};
   std::optional<LatencyStep> latency_step;
   std::uint64_t    seed{1};

   void validate() const;
};

struct TermRecord {
   std::uint64_t       term{0};
   std::vector<NodeId> members;
   std::vector<NodeId> leader_schedule;
   std::size_t         malicious_count{0};
   std::size_t         started_round{0};

   friend bool operator==(const TermRecord&, const TermRecord&) = default;
};

struct RoundRecord {
   std::size_t   round{0};
   TxnId         txn;
   NodeId        leader;
   SimTime       submitted{0.0};
   SimTime       started{0.0};
   SimTime       decided{0.0};
   SimTime       finished{0.0};
   bool          committed{false};
   double        epsilon{0.0}; // epsilon disseminated with the commit
   std::size_t   proposals{0};
   std::size_t   quorum_malicious{0};
   std::size_t   artifacts{0}; // consensus artifacts
   bool          honest_scores{false}; // committed lambdas equal the honest computation

   friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct RunMetrics {
   std::vector<double>                       per_txn_latency;
   double                                    throughput{0.0};
   std::vector<double>                       consensus_times;
   std::vector<std::pair<std::size_t, double>> epsilon_trace;
   std::vector<TermRecord>                   committee_history;
   std::vector<RoundRecord>                  rounds;
   std::size_t                               committed{0};
   std::size_t                               discarded{0};
   std::size_t                               dropped{0};
   std::size_t                               ledger_disagreements{0};
   std::size_t                               score_disagreements{0};
   std::uint64_t                             events{0};
   SimTime                                   first_submission{0.0};
   SimTime                                   last_commit{0.0};

   friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct SimulationResult {
   RunMetrics             metrics;
   std::vector<NodeState> nodes;
   CommitteeState         committee;
   std::vector<double>    reputation; // by node index
   std::vector<double>    slowness;   // mean normalised slowness by node index
};

/// Runs the whole protocol over `workload` (endorsement transactions in
/// submission order) on a network of fresh nodes with empty ledgers.
/// Throws Error(infeasible_scenario) when 2f+1 exceeds the node count.
SimulationResult run_simulation(const SimulationConfig& cfg, std::span<const Transaction> workload);

Proposal honest_behavior(const NodeState& node, const Transaction& txn, const ProposalId& pid,
                         const ScoringConfig& scoring, SimTime now);

/// Same artifact set as the honest proposal; each score replaced by a
/// uniform draw in [0, max(1, highest score in the node's DAG)].
Proposal malicious_behavior(NodeState& node, const Transaction& txn, const ProposalId& pid,
                            const ScoringConfig& scoring, SimTime now);

struct RunSummary {
   double      mean_latency{0.0};
   double      median_latency{0.0};
   double      p95_latency{0.0};
   double      throughput{0.0};
   double      epsilon_mean{0.0};
   double      epsilon_min{0.0};
   double      epsilon_max{0.0};
   double      epsilon_final{0.0};
   std::size_t committed{0};
};

/// Throws Error(invalid_argument) when nothing was committed.
RunSummary measure(const RunMetrics& metrics);

/// Nearest-rank percentile (q in (0, 1]) of unsorted samples.
double nearest_rank(std::vector<double> samples, double q);

} // namespace qcchain
