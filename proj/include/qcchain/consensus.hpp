#pragma once

#include <qcchain/digest.hpp>
#include <qcchain/ids.hpp>
#include <qcchain/ledger.hpp>
#include <qcchain/node.hpp>
#include <qcchain/scoring.hpp>

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qcchain {

struct CommitteeState;

/// Assigned by the node that first validates a transaction.
struct ProposalId {
   NodeId  origin;
   SimTime timestamp{0.0};

   friend auto operator<=>(const ProposalId&, const ProposalId&) = default;
};

struct Proposal {
   ProposalId                   id;
   NodeId                       proposer;
   std::map<ArtifactId, double> scores; // v_n^a
   SimTime                      submitted_at{0.0};
};

struct ArtifactVerdict {
   double              lambda{0.0}; // consensus score: the sample closest to mu
   double              mu{0.0};     // mean of the samples
   std::vector<double> samples;     // Lambda_a, in ascending proposer id order

   friend bool operator==(const ArtifactVerdict&, const ArtifactVerdict&) = default;
};

struct AggregationResult {
   ProposalId                              id;
   std::map<ArtifactId, ArtifactVerdict>   per_artifact;
   std::map<NodeId, double>                reputation_deltas;
   std::map<NodeId, std::int64_t>          delay_ranks;
   double                                  new_epsilon{0.0};
   std::set<NodeId>                        approvals;

   std::map<ArtifactId, double> consensus_scores() const;

   /// Digest of everything a committee member recomputes independently
   /// (verdicts, reputation deltas, delay ranks). Epsilon and approvals are
   /// added by the leader afterwards and are not covered.
   Digest verification_digest() const;

   /// Line-delimited wire format used between simulated nodes:
   ///   qcchain-aggregate 1
   ///   P <origin> <timestamp>
   ///   A <artifact> <lambda> <mu> <sample>,<sample>,...
   ///   N <node> <reputation delta or -> <delay rank or ->
   ///   X <new epsilon>
   ///   V <approving member>
   std::string              encode() const;
   static AggregationResult decode(std::string_view text);

   friend bool operator==(const AggregationResult&, const AggregationResult&) = default;
};

struct EpsilonConfig {
   double ceiling{0.05};   // T
   double steepness{50.0}; // k, 1/seconds
   double midpoint{0.04};  // t0, seconds

   void validate() const;
};

struct ConsensusConfig {
   std::size_t   f{1};
   /// A result commits when strictly more than this fraction of the
   /// committee approves.
   double        approval_fraction{0.5};
   EpsilonConfig epsilon;
   /// Weight of the newest sample in the moving average of consensus time.
   double        time_smoothing{0.3};

   std::size_t quorum() const { return 2 * f + 1; }
   void        validate() const;
};

/// Structural validation at the receiving node followed by proposal id
/// assignment. Records the txn id as seen; a repeated id is rejected.
ProposalId intake_transaction(NodeState& node, const Transaction& txn, SimTime now);

/// Runs the incremental score update for `txn` on the node's DAG snapshot
/// with the node's current epsilon. The snapshot itself is not modified.
Proposal make_proposal(const NodeState& node, const Transaction& txn, const ProposalId& pid,
                       const ScoringConfig& scoring, SimTime now);

/// Aggregates a quorum of proposals; every proposer is also rated.
AggregationResult aggregate(std::span<const Proposal> proposals, const ConsensusConfig& cfg);

/// Aggregation with the score samples taken from `quorum` and reputation
/// deltas computed for every proposal in `rated` (which normally contains
/// the quorum). `receipt_orders` are the committee members' proposal
/// receipt lists; when empty no delay ranks are produced.
AggregationResult aggregate(std::span<const Proposal> quorum, std::span<const Proposal> rated,
                            std::span<const std::vector<NodeId>> receipt_orders, const ConsensusConfig& cfg);

/// r = sum over consensus artifacts of |lambda_a - v_n^a| (a missing entry
/// counts as v = 0). Returns 1 if r == 0 (within 1e-12), r if r <= 1 and
/// 1/r otherwise.
double reputation_delta(const std::map<ArtifactId, double>& submitted, const std::map<ArtifactId, double>& consensus);

/// Borda-style rank sum: in every list the first node scores Q, the last 1.
/// Throws Error(invalid_argument) when the lists are not permutations of
/// one node set.
std::map<NodeId, std::int64_t> delay_ranks(std::span<const std::vector<NodeId>> receipt_orders);

/// epsilon = T / (1 + exp(-k (t - t0))).
double adapt_epsilon(double consensus_time, const EpsilonConfig& cfg);

/// Exponential moving average of consensus time feeding adapt_epsilon.
class EpsilonController {
public:
   explicit EpsilonController(ConsensusConfig cfg) : cfg_(cfg) {}

   /// Folds in one measured consensus time and returns the new epsilon.
   double observe(double consensus_time);

   std::optional<double> smoothed_time() const { return ema_; }

private:
   ConsensusConfig       cfg_;
   std::optional<double> ema_;
};

struct MemberVerdict {
   NodeId member;
   Digest digest;
};

enum class CommitDecision { committed, discarded };

/// Records an approval for every committee member whose recomputed digest
/// matches the leader's result, then commits iff approvals exceed
/// approval_fraction of the committee size.
CommitDecision approve_and_commit(AggregationResult& result, std::span<const MemberVerdict> verdicts,
                                  const CommitteeState& committee, double approval_fraction = 0.5);

/// Transactions recorded for one committed round: the endorsement, one
/// score update per consensus artifact and one reputation update per rated
/// node, each group in ascending id order.
std::vector<Transaction> commit_transactions(const Transaction& endorsement, const AggregationResult& result,
                                             std::uint64_t height, SimTime timestamp);

/// DAG snapshot after a commit: the new artifact inserted and every
/// consensus artifact set to its lambda.
std::shared_ptr<const ArtifactDag> committed_dag(const ArtifactDag& pre, const Transaction& endorsement,
                                                 const AggregationResult& result, double initial_score,
                                                 SimTime created_at);

/// Applies a committed result to one node: DAG scores, one new block,
/// reputation and epsilon. Throws Error(unknown_artifact) when the result
/// refers to artifacts the node does not know.
void apply_commit(NodeState& node, const Transaction& endorsement, const AggregationResult& result, NodeId leader,
                  SimTime timestamp, const ScoringConfig& scoring);

/// Same, with the block and the post-commit DAG already built (they are
/// identical for every node holding the same pre-commit state). The block's
/// payload hash is trusted; only its link onto the node's tip is checked.
void apply_commit(NodeState& node, const AggregationResult& result, std::shared_ptr<const Block> block,
                  std::shared_ptr<const ArtifactDag> post_commit_dag);

} // namespace qcchain
