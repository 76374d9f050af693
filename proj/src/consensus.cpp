#include <qcchain/committee.hpp>
#include <qcchain/consensus.hpp>
#include <qcchain/error.hpp>
#include <qcchain/record_io.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qcchain {

namespace {

constexpr double zero_tolerance = 1e-12;

// Generated score/reputation transactions live in their own id space so
// they can never collide with workload transaction ids.
TxnId generated_txn_id(std::uint64_t height, std::uint64_t index) {
   return TxnId{(std::uint64_t{1} << 63) | (height << 24) | index};
}

std::vector<const Proposal*> by_proposer(std::span<const Proposal> ps) {
   std::vector<const Proposal*> out;
   out.reserve(ps.size());
   for (const auto& p : ps)
      out.push_back(&p);
   std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->proposer < b->proposer; });
   for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i]->proposer == out[i - 1]->proposer)
         throw Error(ErrorCode::invalid_argument, "two proposals from " + to_string(out[i]->proposer));
   return out;
}

} // namespace

std::map<ArtifactId, double> AggregationResult::consensus_scores() const {
   std::map<ArtifactId, double> out;
   for (const auto& [a, v] : per_artifact)
      out.emplace(a, v.lambda);
   return out;
}

Digest AggregationResult::verification_digest() const {
   ByteWriter w;
   w.u64(id.origin.value).f64(id.timestamp);
   w.u32(static_cast<std::uint32_t>(per_artifact.size()));
   for (const auto& [a, v] : per_artifact) {
      w.u64(a.value).f64(v.lambda).f64(v.mu).u32(static_cast<std::uint32_t>(v.samples.size()));
      for (double s : v.samples)
         w.f64(s);
   }
   w.u32(static_cast<std::uint32_t>(reputation_deltas.size()));
   for (const auto& [n, d] : reputation_deltas)
      w.u64(n.value).f64(d);
   w.u32(static_cast<std::uint32_t>(delay_ranks.size()));
   for (const auto& [n, r] : delay_ranks)
      w.u64(n.value).u64(static_cast<std::uint64_t>(r));
   return w.finish();
}

std::string AggregationResult::encode() const {
   std::ostringstream os;
   os << "qcchain-aggregate 1\n";
   os << "P " << id.origin.value << ' ' << format_real(id.timestamp) << '\n';
   for (const auto& [a, v] : per_artifact) {
      os << "A " << a.value << ' ' << format_real(v.lambda) << ' ' << format_real(v.mu) << ' ';
      for (std::size_t i = 0; i < v.samples.size(); ++i)
         os << (i ? "," : "") << format_real(v.samples[i]);
      os << '\n';
   }
   std::set<NodeId> nodes;
   for (const auto& [n, _] : reputation_deltas)
      nodes.insert(n);
   for (const auto& [n, _] : delay_ranks)
      nodes.insert(n);
   for (auto n : nodes) {
      os << "N " << n.value << ' ';
      if (auto it = reputation_deltas.find(n); it != reputation_deltas.end())
         os << format_real(it->second);
      else
         os << '-';
      os << ' ';
      if (auto it = delay_ranks.find(n); it != delay_ranks.end())
         os << it->second;
      else
         os << '-';
      os << '\n';
   }
   os << "X " << format_real(new_epsilon) << '\n';
   for (auto n : approvals)
      os << "V " << n.value << '\n';
   return os.str();
}

AggregationResult AggregationResult::decode(std::string_view body) {
   using text::parse_real;
   using text::parse_u64;
   if (body.empty() || body.back() != '\n')
      throw Error(ErrorCode::parse_error, "aggregate record must end with a newline");
   body.remove_suffix(1);
   auto lines = text::split(body, '\n');
   if (lines.size() < 3 || lines[0] != "qcchain-aggregate 1")
      throw Error(ErrorCode::parse_error, "missing aggregate header");

   AggregationResult r;
   auto              head = text::split(lines[1], ' ');
   if (head.size() != 3 || head[0] != "P")
      throw Error(ErrorCode::parse_error, "missing proposal id row");
   r.id = ProposalId{NodeId{parse_u64(head[1])}, parse_real(head[2])};

   bool have_epsilon = false;
   for (std::size_t i = 2; i < lines.size(); ++i) {
      auto f = text::split(lines[i], ' ');
      if (f[0] == "A" && f.size() == 5) {
         ArtifactVerdict v{parse_real(f[2]), parse_real(f[3]), {}};
         for (auto s : text::split(f[4], ','))
            v.samples.push_back(parse_real(s));
         if (!r.per_artifact.emplace(ArtifactId{parse_u64(f[1])}, std::move(v)).second)
            throw Error(ErrorCode::parse_error, "repeated artifact row");
      } else if (f[0] == "N" && f.size() == 4) {
         NodeId n{parse_u64(f[1])};
         if (f[2] != "-")
            r.reputation_deltas[n] = parse_real(f[2]);
         if (f[3] != "-")
            r.delay_ranks[n] = static_cast<std::int64_t>(parse_u64(f[3]));
      } else if (f[0] == "X" && f.size() == 2 && !have_epsilon) {
         r.new_epsilon = parse_real(f[1]);
         have_epsilon  = true;
      } else if (f[0] == "V" && f.size() == 2) {
         r.approvals.insert(NodeId{parse_u64(f[1])});
      } else {
         throw Error(ErrorCode::parse_error, "bad aggregate row on line " + std::to_string(i + 1));
      }
   }
   if (!have_epsilon)
      throw Error(ErrorCode::parse_error, "missing epsilon row");
   return r;
}

void EpsilonConfig::validate() const {
   if (!(ceiling > 0) || !(steepness > 0) || !(midpoint > 0))
      throw Error(ErrorCode::invalid_argument, "epsilon constants must be positive");
}

void ConsensusConfig::validate() const {
   if (!(approval_fraction >= 0.5 && approval_fraction < 1.0))
      throw Error(ErrorCode::invalid_argument, "approval_fraction must lie in [0.5, 1)");
   if (!(time_smoothing > 0 && time_smoothing <= 1))
      throw Error(ErrorCode::invalid_argument, "time_smoothing must lie in (0, 1]");
   epsilon.validate();
}

ProposalId intake_transaction(NodeState& node, const Transaction& txn, SimTime now) {
   if (node.seen_txns.count(txn.id))
      throw Error(ErrorCode::duplicate_transaction, "transaction " + std::to_string(txn.id.value) + " seen before");
   validate_endorsement(txn, *node.dag);
   node.seen_txns.insert(txn.id);
   return ProposalId{node.id, now};
}

Proposal make_proposal(const NodeState& node, const Transaction& txn, const ProposalId& pid,
                       const ScoringConfig& scoring, SimTime now) {
   const auto* e = txn.endorsement();
   if (e == nullptr)
      throw Error(ErrorCode::invalid_transaction, "proposals are only made for endorsements");
   ScoringConfig cfg = scoring;
   cfg.epsilon       = node.epsilon;
   auto update       = compute_update(*node.dag, e->artifact, e->endorsed, cfg);
   return Proposal{pid, node.id, update.new_scores(), now};
}

AggregationResult aggregate(std::span<const Proposal> proposals, const ConsensusConfig& cfg) {
   return aggregate(proposals, proposals, {}, cfg);
}

AggregationResult aggregate(std::span<const Proposal> quorum, std::span<const Proposal> rated,
                            std::span<const std::vector<NodeId>> receipt_orders, const ConsensusConfig& cfg) {
   if (quorum.size() < cfg.quorum())
      throw Error(ErrorCode::insufficient_proposals, "need " + std::to_string(cfg.quorum()) + " proposals, have " +
                                                        std::to_string(quorum.size()));
   const ProposalId pid = quorum.front().id;
   for (const auto& p : quorum)
      if (p.id != pid)
         throw Error(ErrorCode::mixed_proposals, "quorum mixes proposal ids");
   for (const auto& p : rated)
      if (p.id != pid)
         throw Error(ErrorCode::mixed_proposals, "rated set mixes proposal ids");

   AggregationResult out;
   out.id = pid;

   std::map<ArtifactId, std::vector<double>> samples;
   for (const auto* p : by_proposer(quorum))
      for (const auto& [a, v] : p->scores)
         samples[a].push_back(v);

   for (auto& [a, vs] : samples) {
      if (vs.size() < cfg.quorum())
         continue;
      double sum = 0.0;
      for (double v : vs)
         sum += v;
      const double mu   = sum / static_cast<double>(vs.size());
      double       best = vs.front();
      for (double v : vs) {
         double dv = std::abs(v - mu), db = std::abs(best - mu);
         if (dv < db || (dv == db && v < best))
            best = v;
      }
      out.per_artifact.emplace(a, ArtifactVerdict{best, mu, std::move(vs)});
   }

   const auto consensus = out.consensus_scores();
   for (const auto* p : by_proposer(rated))
      out.reputation_deltas.emplace(p->proposer, reputation_delta(p->scores, consensus));

   if (!receipt_orders.empty())
      out.delay_ranks = delay_ranks(receipt_orders);
   return out;
}

double reputation_delta(const std::map<ArtifactId, double>& submitted, const std::map<ArtifactId, double>& consensus) {
   double r = 0.0;
   for (const auto& [a, lambda] : consensus) {
      auto it = submitted.find(a);
      r += std::abs(lambda - (it == submitted.end() ? 0.0 : it->second));
   }
   if (r <= zero_tolerance)
      return 1.0;
   return r <= 1.0 ? r : 1.0 / r;
}

std::map<NodeId, std::int64_t> delay_ranks(std::span<const std::vector<NodeId>> receipt_orders) {
   std::map<NodeId, std::int64_t> ranks;
   if (receipt_orders.empty())
      return ranks;
   auto reference = receipt_orders.front();
   std::sort(reference.begin(), reference.end());
   if (std::adjacent_find(reference.begin(), reference.end()) != reference.end())
      throw Error(ErrorCode::invalid_argument, "receipt list repeats a node");
   const auto q = static_cast<std::int64_t>(reference.size());
   for (const auto& list : receipt_orders) {
      auto sorted = list;
      std::sort(sorted.begin(), sorted.end());
      if (sorted != reference)
         throw Error(ErrorCode::invalid_argument, "receipt lists cover different node sets");
      for (std::size_t p = 0; p < list.size(); ++p)
         ranks[list[p]] += q - static_cast<std::int64_t>(p);
   }
   return ranks;
}

double adapt_epsilon(double t, const EpsilonConfig& cfg) {
   return cfg.ceiling / (1.0 + std::exp(-cfg.steepness * (t - cfg.midpoint)));
}

double EpsilonController::observe(double consensus_time) {
   const double a = cfg_.time_smoothing;
   ema_           = ema_ ? a * consensus_time + (1.0 - a) * *ema_ : consensus_time;
   return adapt_epsilon(*ema_, cfg_.epsilon);
}

CommitDecision approve_and_commit(AggregationResult& result, std::span<const MemberVerdict> verdicts,
                                  const CommitteeState& committee, double approval_fraction) {
   const Digest expected = result.verification_digest();
   std::set<NodeId> approvals;
   for (const auto& v : verdicts)
      if (committee.contains(v.member) && v.digest == expected)
         approvals.insert(v.member);
   const double needed = approval_fraction * static_cast<double>(committee.size());
   if (static_cast<double>(approvals.size()) > needed) {
      result.approvals = std::move(approvals);
      return CommitDecision::committed;
   }
   return CommitDecision::discarded;
}

std::vector<Transaction> commit_transactions(const Transaction& endorsement, const AggregationResult& result,
                                             std::uint64_t height, SimTime timestamp) {
   std::vector<Transaction> txns;
   txns.reserve(1 + result.per_artifact.size() + result.reputation_deltas.size());
   txns.push_back(endorsement);
   std::uint64_t index = 0;
   for (const auto& [a, v] : result.per_artifact)
      txns.push_back(Transaction{generated_txn_id(height, index++), timestamp, ScoreUpdatePayload{a, v.lambda}});
   for (const auto& [n, d] : result.reputation_deltas)
      txns.push_back(Transaction{generated_txn_id(height, index++), timestamp, ReputationUpdatePayload{n, d}});
   return txns;
}

std::shared_ptr<const ArtifactDag> committed_dag(const ArtifactDag& pre, const Transaction& endorsement,
                                                 const AggregationResult& result, double initial_score,
                                                 SimTime created_at) {
   validate_endorsement(endorsement, pre);
   const auto& e = *endorsement.endorsement();
   for (const auto& [a, _] : result.per_artifact)
      if (a != e.artifact && !pre.contains(a))
         throw Error(ErrorCode::unknown_artifact, "committed score for unknown artifact " + to_string(a));

   auto dag = std::make_shared<ArtifactDag>(pre);
   dag->add_artifact(e.artifact, e.endorsed, initial_score, created_at);
   for (const auto& [a, v] : result.per_artifact)
      dag->set_score(a, v.lambda);
   dag->mark_propagated(e.artifact);
   return dag;
}

void apply_commit(NodeState& node, const Transaction& endorsement, const AggregationResult& result, NodeId leader,
                  SimTime timestamp, const ScoringConfig& scoring) {
   auto dag   = committed_dag(*node.dag, endorsement, result, scoring.initial_score, timestamp);
   auto block = std::make_shared<const Block>(
      node.ledger.next_block(commit_transactions(endorsement, result, node.ledger.size(), timestamp), leader,
                             timestamp));
   apply_commit(node, result, std::move(block), std::move(dag));
}

void apply_commit(NodeState& node, const AggregationResult& result, std::shared_ptr<const Block> block,
                  std::shared_ptr<const ArtifactDag> post_commit_dag) {
   for (const auto& [a, _] : result.per_artifact)
      if (!post_commit_dag->contains(a))
         throw Error(ErrorCode::unknown_artifact, "committed score for unknown artifact " + to_string(a));
   if (!block->transactions.empty())
      node.seen_txns.insert(block->transactions.front().id);
   node.ledger.append_checked(std::move(block));
   node.dag = std::move(post_commit_dag);
   if (auto it = result.reputation_deltas.find(node.id); it != result.reputation_deltas.end())
      node.reputation += it->second;
   node.epsilon = result.new_epsilon;
}

} // namespace qcchain
