#pragma once

#include <qcchain/ids.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace qcchain {

struct CommitteeState {
   std::vector<NodeId> members;         // ascending
   std::vector<NodeId> leader_schedule; // permutation of members
   std::size_t         round_index{0};
   std::uint64_t       term_id{0};

   std::size_t size() const { return members.size(); }
   bool        contains(NodeId id) const;
   /// Size, schedule permutation and round index are consistent.
   bool        valid() const;

   friend bool operator==(const CommitteeState&, const CommitteeState&) = default;
};

struct CommitteeConfig {
   std::size_t K{10};
   /// Bound on the summed slowness of a committee. Zero means "derive from
   /// the network": theta_fraction * K * (nodes - 1).
   double      theta{0.0};
   double      theta_fraction{0.5};
   std::size_t max_subscription_rounds{10};

   double resolved_theta(std::size_t nodes) const;
   void   validate() const;
};

struct GaConfig {
   std::size_t   population_size{64};
   std::size_t   generations{200};
   double        crossover_rate{0.9};
   double        mutation_rate{0.1};
   std::size_t   tournament_size{3};
   /// Stop early once the best fitness has not improved for this many
   /// generations; 0 disables.
   std::size_t   stall_generations{50};
   std::uint64_t seed{0};

   void validate() const;
};

struct Candidate {
   NodeId id;
   double reputation{0.0};
   double slowness{0.0};
};

struct GaOutcome {
   std::vector<NodeId> members; // ascending
   bool                feasible{false};
   double              reputation_sum{0.0};
   double              slowness_sum{0.0};
};

/// Uniformly random K-subset with a uniformly random leader schedule.
/// Throws Error(invalid_argument) when K == 0 or K > nodes.size().
CommitteeState init_committee(std::span<const NodeId> nodes, std::size_t K, std::uint64_t seed);

/// Leader for the next round. The second value is true when this call
/// consumed the last slot of the term.
std::pair<NodeId, bool> next_leader(CommitteeState& state);

/// Genetic search for a K-subset maximising summed reputation with summed
/// slowness <= theta (linear penalty otherwise). Returns the best feasible
/// subset seen, or the lowest-slowness subset seen when none was feasible.
GaOutcome ga_propose(std::span<const Candidate> candidates, std::size_t K, double theta, const GaConfig& ga);

/// Exhaustive reference search over all K-subsets. Only for small inputs.
GaOutcome exhaustive_propose(std::span<const Candidate> candidates, std::size_t K, double theta);

struct SubscriptionResult {
   std::vector<NodeId> committee;
   bool                complete{false};
};

/// Nodes named in at least ceil(m/2) of the m lists, ordered by count
/// (descending) then id, truncated to K.
SubscriptionResult subscribe(std::span<const std::vector<NodeId>> member_lists, std::size_t K);

/// Stateless mixing of seed material (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

struct RebuildReport {
   std::size_t subscription_rounds{0};
   std::size_t fallback_seats{0};
};

/// Builds the next term. Every current member runs the GA over the
/// non-members with its own seed; subscription rounds repeat until K nodes
/// have qualified, then remaining seats go to the best
/// reputation / (1 + slowness) ratios. `candidates` covers every node.
CommitteeState rebuild_committee(const CommitteeState& current, std::span<const Candidate> candidates,
                                 const CommitteeConfig& cfg, const GaConfig& ga, std::uint64_t global_seed,
                                 RebuildReport* report = nullptr);

} // namespace qcchain
