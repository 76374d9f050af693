#include <qcchain/error.hpp>
#include <qcchain/simnet.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace qcchain {

double LatencyModel::sample(std::mt19937_64& rng) const {
   double v = mean;
   switch (kind) {
      case Kind::constant: break;
      case Kind::uniform: {
         std::uniform_real_distribution<double> u(mean * (1.0 - spread), mean * (1.0 + spread));
         v = u(rng);
         break;
      }
      case Kind::lognormal: {
         std::lognormal_distribution<double> ln(std::log(mean) - spread * spread / 2.0, spread);
         v = ln(rng);
         break;
      }
   }
   return std::max(v, 1e-9);
}

void LatencyModel::validate() const {
   if (!(mean > 0))
      throw Error(ErrorCode::invalid_argument, "latency mean must be positive");
   if (kind == Kind::uniform && !(spread >= 0 && spread < 1))
      throw Error(ErrorCode::invalid_argument, "uniform latency spread must lie in [0, 1)");
   if (kind == Kind::lognormal && !(spread >= 0))
      throw Error(ErrorCode::invalid_argument, "lognormal sigma must be nonnegative");
}

void EventQueue::push(SimTime at, EventKind kind, std::uint32_t message, std::uint32_t from, std::uint32_t to,
                      std::uint32_t round) {
   heap_.push(SimEvent{at, next_seq_++, kind, message, from, to, round});
}

SimEvent EventQueue::pop() {
   SimEvent e = heap_.top();
   heap_.pop();
   return e;
}

void SimulationConfig::validate() const {
   if (nodes == 0)
      throw Error(ErrorCode::invalid_argument, "network needs at least one node");
   if (!(malicious_fraction >= 0 && malicious_fraction <= 1))
      throw Error(ErrorCode::invalid_argument, "malicious_fraction must lie in [0, 1]");
   if (!(heterogeneity >= 0) || !(arrival_interval >= 0) || !(timeout_factor > 0) || !(proposal_cost >= 0) ||
       !(update_entry_cost >= 0) || !(aggregation_cost >= 0))
      throw Error(ErrorCode::invalid_argument, "simulation timing parameters must be nonnegative");
   if (latency_step && !(latency_step->mean > 0))
      throw Error(ErrorCode::invalid_argument, "latency step mean must be positive");
   committee.validate();
   ga.validate();
   consensus.validate();
   scoring.validate();
   latency.validate();
   if (consensus.quorum() > nodes)
      throw Error(ErrorCode::infeasible_scenario, "quorum 2f+1 = " + std::to_string(consensus.quorum()) +
                                                     " exceeds " + std::to_string(nodes) + " nodes");
}

Proposal honest_behavior(const NodeState& node, const Transaction& txn, const ProposalId& pid,
                         const ScoringConfig& scoring, SimTime now) {
   return make_proposal(node, txn, pid, scoring, now);
}

namespace {

std::map<ArtifactId, double> random_scores(std::mt19937_64& rng, const std::map<ArtifactId, double>& honest,
                                           double s_max) {
   std::uniform_real_distribution<double> u(0.0, s_max);
   std::map<ArtifactId, double>           out;
   for (const auto& [a, _] : honest)
      out.emplace_hint(out.end(), a, u(rng));
   return out;
}

double score_ceiling(const ArtifactDag& dag) { return std::max(1.0, dag.max_score()); }

} // namespace

Proposal malicious_behavior(NodeState& node, const Transaction& txn, const ProposalId& pid,
                            const ScoringConfig& scoring, SimTime now) {
   Proposal p = make_proposal(node, txn, pid, scoring, now);
   p.scores   = random_scores(node.rng, p.scores, score_ceiling(*node.dag));
   return p;
}

namespace {

enum Message : std::uint32_t { txn_msg, proposal_msg, result_msg, verdict_msg, commit_msg };

class Simulator {
public:
   Simulator(const SimulationConfig& cfg, std::span<const Transaction> workload)
      : cfg_(cfg), workload_(workload), controller_(cfg.consensus) {
      cfg_.validate();
      n_       = cfg_.nodes;
      k_       = std::min(cfg_.committee.K, n_);
      theta_   = CommitteeConfig{cfg_.committee}.resolved_theta(n_);
      topo_rng_.seed(mix_seed(cfg_.seed, 0x746f706fULL));
      net_rng_.seed(mix_seed(cfg_.seed, mix_seed(cfg_.latency.seed, 0x6e6574ULL)));
      latency_ = cfg_.latency;

      const double eps0 =
         cfg_.initial_epsilon >= 0 ? cfg_.initial_epsilon : adapt_epsilon(0.0, cfg_.consensus.epsilon);

      std::vector<std::size_t> order(n_);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), topo_rng_);
      const auto bad = static_cast<std::size_t>(std::llround(cfg_.malicious_fraction * static_cast<double>(n_)));
      malicious_.assign(n_, 0);
      for (std::size_t i = 0; i < bad; ++i)
         malicious_[order[i]] = 1;
      malicious_share_ = static_cast<double>(bad) / static_cast<double>(n_);

      std::uniform_real_distribution<double> het(0.0, cfg_.heterogeneity);
      factor_.resize(n_);
      for (auto& f : factor_)
         f = 1.0 + het(topo_rng_);

      nodes_.reserve(n_);
      std::vector<NodeId> ids;
      auto                genesis = std::make_shared<const ArtifactDag>();
      for (std::size_t i = 0; i < n_; ++i) {
         nodes_.emplace_back(NodeId{i}, malicious_[i] ? Behavior::malicious : Behavior::honest,
                             mix_seed(cfg_.seed, 0x6e6f6465ULL + i), eps0);
         nodes_.back().dag = genesis;
         ids.push_back(NodeId{i});
      }
      reputation_.assign(n_, 0.0);
      slowness_.assign(n_, 0.0);
      slow_sum_.assign(n_, 0.0);
      slow_cnt_.assign(n_, 0);

      committee_ = init_committee(ids, k_, mix_seed(cfg_.seed, 0x636f6d6dULL));
      record_term(0);

      std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
      origins_.reserve(workload_.size());
      for (std::size_t i = 0; i < workload_.size(); ++i) {
         origins_.push_back(pick(topo_rng_));
         SimTime at = cfg_.arrival_interval * static_cast<double>(i);
         queue_.push(at, EventKind::txn_arrival, static_cast<std::uint32_t>(i));
      }
      if (!workload_.empty())
         metrics_.first_submission = 0.0;
   }

   SimulationResult run() {
      while (!queue_.empty()) {
         SimEvent e = queue_.pop();
         ++metrics_.events;
         switch (e.kind) {
            case EventKind::txn_arrival:
               pending_.push_back({e.message, false});
               if (!round_.active)
                  start_round(e.at);
               break;
            case EventKind::round_timeout:
               if (round_.active && e.round == round_.id && !round_.closed)
                  close_collection(e.at);
               break;
            case EventKind::message_delivery:
               if (!round_.active || e.round != round_.id)
                  break;
               deliver(e);
               break;
         }
      }
      if (metrics_.committed > 0) {
         const double span = metrics_.last_commit - metrics_.first_submission;
         metrics_.throughput = span > 0 ? static_cast<double>(metrics_.committed) / span : 0.0;
      }
      SimulationResult out;
      out.metrics    = std::move(metrics_);
      out.nodes      = std::move(nodes_);
      out.committee  = committee_;
      out.reputation = reputation_;
      out.slowness   = slowness_;
      return out;
   }

private:
   struct Round {
      bool                               active{false};
      std::uint32_t                      id{0};
      std::size_t                        txn{0};
      bool                               retried{false};
      std::size_t                        origin{0};
      std::size_t                        leader{0};
      bool                               rebuild_after{false};
      ProposalId                         pid;
      SimTime                            started{0.0};
      std::shared_ptr<const ArtifactDag> pre_dag;
      double                             pre_epsilon{0.0};
      std::map<ArtifactId, double>       honest;
      std::size_t                        honest_entries{0};
      std::vector<Proposal>              proposals; // by node index
      std::vector<std::vector<SimTime>>  member_arrival; // [member slot][node]
      std::vector<std::uint32_t>         leader_order;
      bool                               closed{false};
      std::vector<Proposal>              quorum;
      std::vector<Proposal>              rated;
      std::vector<std::vector<NodeId>>   receipts;
      std::size_t                        quorum_malicious{0};
      AggregationResult                  result;
      std::vector<MemberVerdict>         verdicts;
      std::size_t                        verdicts_in{0};
      SimTime                            decided{0.0};
      bool                               committed{false};
      std::shared_ptr<const Block>       block;
      std::shared_ptr<const ArtifactDag> post_dag;
      std::size_t                        applied{0};
   };

   const Transaction& txn() const { return workload_[round_.txn]; }

   double link(std::size_t a, std::size_t b) {
      return latency_.sample(net_rng_) * (factor_[a] + factor_[b]) / 2.0;
   }

   std::size_t member_slot(std::size_t node) const {
      auto it = std::lower_bound(committee_.members.begin(), committee_.members.end(), NodeId{node});
      return static_cast<std::size_t>(it - committee_.members.begin());
   }

   void record_term(std::size_t round) {
      TermRecord t;
      t.term            = committee_.term_id;
      t.members         = committee_.members;
      t.leader_schedule = committee_.leader_schedule;
      t.started_round   = round;
      for (auto m : committee_.members)
         t.malicious_count += malicious_[m.value];
      metrics_.committee_history.push_back(std::move(t));
   }

   void start_round(SimTime now) {
      while (!pending_.empty()) {
         auto [idx, retried] = pending_.front();
         pending_.pop_front();
         const Transaction& t = workload_[idx];
         NodeState&         origin = nodes_[origins_[idx]];
         ProposalId pid;
         try {
            pid = intake_transaction(origin, t, now);
         } catch (const Error&) {
            ++metrics_.dropped;
            continue;
         }
         if (cfg_.latency_step && rounds_started_ >= cfg_.latency_step->at_round)
            latency_.mean = cfg_.latency_step->mean;

         Round& r        = round_;
         r               = Round{};
         r.active        = true;
         r.id            = static_cast<std::uint32_t>(++rounds_started_);
         r.txn           = idx;
         r.retried       = retried;
         r.origin        = origins_[idx];
         r.pid           = pid;
         r.started       = now;
         auto [leader, wrap] = next_leader(committee_);
         r.leader        = leader.value;
         r.rebuild_after = wrap;
         r.pre_dag       = origin.dag;
         r.pre_epsilon   = origin.epsilon;
         ScoringConfig sc = cfg_.scoring;
         sc.epsilon       = r.pre_epsilon;
         const auto* e    = t.endorsement();
         auto update      = compute_update(*r.pre_dag, e->artifact, e->endorsed, sc);
         r.honest         = update.new_scores();
         r.honest_entries = update.trace.empty() ? update.entries.size() : update.trace.size();
         r.proposals.resize(n_);
         r.member_arrival.assign(k_, std::vector<SimTime>(n_, 0.0));

         for (std::size_t n = 0; n < n_; ++n) {
            SimTime at = n == r.origin ? now : now + link(r.origin, n);
            queue_.push(at, EventKind::message_delivery, txn_msg, static_cast<std::uint32_t>(r.origin),
                        static_cast<std::uint32_t>(n), r.id);
         }
         queue_.push(now + cfg_.timeout_factor * latency_.mean, EventKind::round_timeout, 0, 0, 0, r.id);
         return;
      }
   }

   void deliver(const SimEvent& e) {
      switch (e.message) {
         case txn_msg: on_txn(e.to, e.at); break;
         case proposal_msg: on_proposal(e.from, e.at); break;
         case result_msg: on_result(e.to, e.at); break;
         case verdict_msg: on_verdict(e.from, e.at); break;
         case commit_msg: on_commit(e.to, e.at); break;
         default: break;
      }
   }

   void on_txn(std::size_t n, SimTime now) {
      Round&     r    = round_;
      NodeState& node = nodes_[n];
      Proposal   p;
      if (node.dag == r.pre_dag && node.epsilon == r.pre_epsilon) {
         p = Proposal{r.pid, node.id, r.honest, now};
      } else {
         p = honest_behavior(node, txn(), r.pid, cfg_.scoring, now);
      }
      if (!node.honest())
         p.scores = random_scores(node.rng, p.scores, score_ceiling(*node.dag));
      const SimTime ready =
         now + cfg_.proposal_cost + cfg_.update_entry_cost * static_cast<double>(r.honest_entries);
      p.submitted_at = ready;
      r.proposals[n] = std::move(p);
      for (std::size_t slot = 0; slot < k_; ++slot) {
         std::size_t m  = committee_.members[slot].value;
         SimTime     at = m == n ? ready : ready + link(n, m);
         r.member_arrival[slot][n] = at;
         if (m == r.leader)
            queue_.push(at, EventKind::message_delivery, proposal_msg, static_cast<std::uint32_t>(n),
                        static_cast<std::uint32_t>(m), r.id);
      }
   }

   void on_proposal(std::size_t from, SimTime now) {
      Round& r = round_;
      if (r.closed)
         return;
      r.leader_order.push_back(static_cast<std::uint32_t>(from));
      if (r.leader_order.size() == n_)
         close_collection(now);
   }

   void close_collection(SimTime now) {
      Round& r   = round_;
      r.closed   = true;
      const auto q = cfg_.consensus.quorum();
      if (r.leader_order.size() < q) {
         discard(now);
         return;
      }

      std::size_t cap = q;
      if (cfg_.proportional_quorum) {
         double c = std::ceil(malicious_share_ * static_cast<double>(q) - 0.5);
         cap      = static_cast<std::size_t>(std::max(0.0, c));
      }
      std::vector<std::uint32_t> picked, skipped;
      for (auto n : r.leader_order) {
         if (picked.size() == q)
            break;
         if (malicious_[n] && r.quorum_malicious >= cap) {
            skipped.push_back(n);
            continue;
         }
         r.quorum_malicious += malicious_[n];
         picked.push_back(n);
      }
      for (std::size_t i = 0; picked.size() < q && i < skipped.size(); ++i) {
         picked.push_back(skipped[i]);
         ++r.quorum_malicious;
      }
      for (auto n : picked)
         r.quorum.push_back(r.proposals[n]);
      for (auto n : r.leader_order)
         r.rated.push_back(r.proposals[n]);

      r.receipts.resize(k_);
      for (std::size_t slot = 0; slot < k_; ++slot) {
         auto& list = r.receipts[slot];
         for (auto n : r.leader_order)
            list.push_back(NodeId{n});
         const auto& at = r.member_arrival[slot];
         std::stable_sort(list.begin(), list.end(), [&](NodeId a, NodeId b) {
            return at[a.value] < at[b.value] || (at[a.value] == at[b.value] && a < b);
         });
      }

      r.result         = aggregate(r.quorum, r.rated, r.receipts, cfg_.consensus);
      const SimTime ag = now + cfg_.aggregation_cost * static_cast<double>(r.rated.size());
      for (auto m : committee_.members) {
         SimTime at = m.value == r.leader ? ag : ag + link(r.leader, m.value);
         queue_.push(at, EventKind::message_delivery, result_msg, static_cast<std::uint32_t>(r.leader),
                     static_cast<std::uint32_t>(m.value), r.id);
      }
   }

   void on_result(std::size_t member, SimTime now) {
      Round& r         = round_;
      auto   recompute = aggregate(r.quorum, r.rated, r.receipts, cfg_.consensus);
      r.verdicts.push_back(MemberVerdict{NodeId{member}, recompute.verification_digest()});
      SimTime at = now + cfg_.aggregation_cost * static_cast<double>(r.rated.size());
      if (member != r.leader)
         at += link(member, r.leader);
      queue_.push(at, EventKind::message_delivery, verdict_msg, static_cast<std::uint32_t>(member),
                  static_cast<std::uint32_t>(r.leader), r.id);
   }

   void on_verdict(std::size_t, SimTime now) {
      Round& r = round_;
      if (++r.verdicts_in < k_)
         return;
      r.decided    = now;
      const double t = now - r.started;
      metrics_.consensus_times.push_back(t);
      r.result.new_epsilon = controller_.observe(t);
      if (approve_and_commit(r.result, r.verdicts, committee_, cfg_.consensus.approval_fraction) !=
          CommitDecision::committed) {
         discard(now);
         return;
      }
      r.committed      = true;
      const NodeState& leader = nodes_[r.leader];
      r.post_dag       = committed_dag(*leader.dag, txn(), r.result, cfg_.scoring.initial_score, now);
      r.block          = std::make_shared<const Block>(leader.ledger.next_block(
         commit_transactions(txn(), r.result, leader.ledger.size(), now), NodeId{r.leader}, now));

      for (const auto& [n, d] : r.result.reputation_deltas)
         reputation_[n.value] += d;
      const double lists = static_cast<double>(r.receipts.size());
      const double q     = static_cast<double>(r.rated.size());
      for (const auto& [n, rank] : r.result.delay_ranks) {
         slow_sum_[n.value] += (lists * q - static_cast<double>(rank)) / lists;
         slowness_[n.value] = slow_sum_[n.value] / static_cast<double>(++slow_cnt_[n.value]);
      }

      for (std::size_t n = 0; n < n_; ++n) {
         SimTime at = n == r.leader ? now : now + link(r.leader, n);
         queue_.push(at, EventKind::message_delivery, commit_msg, static_cast<std::uint32_t>(r.leader),
                     static_cast<std::uint32_t>(n), r.id);
      }
   }

   void on_commit(std::size_t n, SimTime now) {
      Round&     r    = round_;
      NodeState& node = nodes_[n];
      if (node.dag == r.pre_dag && node.ledger.size() == r.block->height &&
          (node.ledger.empty() || node.ledger.tip_digest() == r.block->prev_hash))
         apply_commit(node, r.result, r.block, r.post_dag);
      else
         apply_commit(node, txn(), r.result, NodeId{r.leader}, r.decided, cfg_.scoring);
      if (++r.applied == n_)
         finish(now);
   }

   void discard(SimTime now) {
      Round& r = round_;
      ++metrics_.discarded;
      nodes_[r.origin].seen_txns.erase(txn().id);
      if (!r.retried)
         pending_.push_front({static_cast<std::uint32_t>(r.txn), true});
      else
         ++metrics_.dropped;
      finish(now);
   }

   void finish(SimTime now) {
      Round&      r = round_;
      RoundRecord rec;
      rec.round            = r.id - 1;
      rec.txn              = txn().id;
      rec.leader           = NodeId{r.leader};
      rec.submitted        = cfg_.arrival_interval * static_cast<double>(r.txn);
      rec.started          = r.started;
      rec.decided          = r.decided;
      rec.finished         = now;
      rec.committed        = r.committed;
      rec.proposals        = r.rated.size();
      rec.quorum_malicious = r.quorum_malicious;
      if (r.committed) {
         rec.epsilon   = r.result.new_epsilon;
         rec.artifacts = r.result.per_artifact.size();
         bool same     = r.result.per_artifact.size() == r.honest.size();
         for (const auto& [a, v] : r.result.per_artifact) {
            auto it = r.honest.find(a);
            same    = same && it != r.honest.end() && it->second == v.lambda;
         }
         rec.honest_scores = same;
         if (!same && 2 * (r.quorum.size() - r.quorum_malicious) > r.quorum.size())
            ++metrics_.score_disagreements;

         const Digest tip = r.block->digest();
         for (const auto& node : nodes_)
            if (node.ledger.tip_digest() != tip || (node.dag != r.post_dag && !(*node.dag == *r.post_dag)))
               ++metrics_.ledger_disagreements;

         ++metrics_.committed;
         metrics_.per_txn_latency.push_back(now - rec.submitted);
         metrics_.epsilon_trace.emplace_back(rec.round, rec.epsilon);
         metrics_.last_commit = now;
      }
      metrics_.rounds.push_back(rec);

      if (r.rebuild_after) {
         std::vector<Candidate> cands;
         cands.reserve(n_);
         for (std::size_t i = 0; i < n_; ++i)
            cands.push_back(Candidate{NodeId{i}, reputation_[i], slowness_[i]});
         CommitteeConfig cc = cfg_.committee;
         cc.K               = k_;
         cc.theta           = theta_;
         committee_         = rebuild_committee(committee_, cands, cc, cfg_.ga, cfg_.seed);
         record_term(rounds_started_);
      }
      r.active = false;
      r.quorum.clear();
      r.rated.clear();
      r.proposals.clear();
      r.member_arrival.clear();
      start_round(now);
   }

   SimulationConfig             cfg_;
   std::span<const Transaction> workload_;
   EpsilonController            controller_;
   std::size_t                  n_{0}, k_{0};
   double                       theta_{0.0};
   LatencyModel                 latency_;
   std::mt19937_64              topo_rng_, net_rng_;
   std::vector<char>            malicious_;
   double                       malicious_share_{0.0};
   std::vector<double>          factor_;
   std::vector<NodeState>       nodes_;
   std::vector<double>          reputation_, slowness_, slow_sum_;
   std::vector<std::size_t>     slow_cnt_;
   CommitteeState               committee_;
   std::vector<std::size_t>     origins_;
   EventQueue                   queue_;
   std::deque<std::pair<std::uint32_t, bool>> pending_;
   Round                        round_;
   std::size_t                  rounds_started_{0};
   RunMetrics                   metrics_;
};

} // namespace

SimulationResult run_simulation(const SimulationConfig& cfg, std::span<const Transaction> workload) {
   return Simulator(cfg, workload).run();
}

double nearest_rank(std::vector<double> samples, double q) {
   if (samples.empty())
      throw Error(ErrorCode::invalid_argument, "percentile of an empty sample");
   if (!(q > 0 && q <= 1))
      throw Error(ErrorCode::invalid_argument, "percentile must lie in (0, 1]");
   std::sort(samples.begin(), samples.end());
   auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
   return samples[std::max<std::size_t>(rank, 1) - 1];
}

RunSummary measure(const RunMetrics& m) {
   if (m.per_txn_latency.empty())
      throw Error(ErrorCode::invalid_argument, "run committed no transactions");
   RunSummary s;
   s.committed    = m.per_txn_latency.size();
   s.mean_latency = std::accumulate(m.per_txn_latency.begin(), m.per_txn_latency.end(), 0.0) /
                    static_cast<double>(s.committed);
   auto sorted = m.per_txn_latency;
   std::sort(sorted.begin(), sorted.end());
   const auto n     = sorted.size();
   s.median_latency = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
   s.p95_latency    = nearest_rank(sorted, 0.95);
   s.throughput     = m.throughput;
   if (!m.epsilon_trace.empty()) {
      s.epsilon_min = s.epsilon_max = m.epsilon_trace.front().second;
      double sum                    = 0.0;
      for (auto [_, e] : m.epsilon_trace) {
         sum += e;
         s.epsilon_min = std::min(s.epsilon_min, e);
         s.epsilon_max = std::max(s.epsilon_max, e);
      }
      s.epsilon_mean  = sum / static_cast<double>(m.epsilon_trace.size());
      s.epsilon_final = m.epsilon_trace.back().second;
   }
   return s;
}

} // namespace qcchain
