#include <qcchain/dag.hpp>
#include <qcchain/error.hpp>

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>

namespace qcchain {

std::string_view to_string(ErrorCode code) {
   switch (code) {
      case ErrorCode::duplicate_artifact: return "duplicate_artifact";
      case ErrorCode::unknown_artifact: return "unknown_artifact";
      case ErrorCode::duplicate_target: return "duplicate_target";
      case ErrorCode::cycle_detected: return "cycle_detected";
      case ErrorCode::integrity_violation: return "integrity_violation";
      case ErrorCode::invalid_transaction: return "invalid_transaction";
      case ErrorCode::duplicate_transaction: return "duplicate_transaction";
      case ErrorCode::already_propagated: return "already_propagated";
      case ErrorCode::not_converged: return "not_converged";
      case ErrorCode::invalid_argument: return "invalid_argument";
      case ErrorCode::insufficient_proposals: return "insufficient_proposals";
      case ErrorCode::mixed_proposals: return "mixed_proposals";
      case ErrorCode::parse_error: return "parse_error";
      case ErrorCode::infeasible_scenario: return "infeasible_scenario";
      case ErrorCode::io_error: return "io_error";
   }
   return "unknown";
}

ArtifactDag::Node& ArtifactDag::node(ArtifactId id) {
   auto it = nodes_.find(id);
   if (it == nodes_.end())
      throw Error(ErrorCode::unknown_artifact, "unknown artifact " + to_string(id));
   return it->second;
}

const ArtifactDag::Node& ArtifactDag::node(ArtifactId id) const {
   auto it = nodes_.find(id);
   if (it == nodes_.end())
      throw Error(ErrorCode::unknown_artifact, "unknown artifact " + to_string(id));
   return it->second;
}

const Artifact& ArtifactDag::artifact(ArtifactId id) const { return node(id).artifact; }

std::span<const ArtifactId> ArtifactDag::endorsed_by(ArtifactId id) const { return node(id).out; }

std::span<const ArtifactId> ArtifactDag::endorsers_of(ArtifactId id) const { return node(id).in; }

std::vector<ArtifactId> ArtifactDag::ids() const {
   std::vector<ArtifactId> out;
   out.reserve(nodes_.size());
   for (const auto& [id, n] : nodes_)
      out.push_back(id);
   return out;
}

std::vector<Artifact> ArtifactDag::artifacts() const {
   std::vector<Artifact> out;
   out.reserve(nodes_.size());
   for (const auto& [id, n] : nodes_)
      out.push_back(n.artifact);
   return out;
}

void ArtifactDag::add_artifact(ArtifactId id, std::span<const ArtifactId> endorsed, double initial_score,
                               SimTime created_at) {
   if (contains(id))
      throw Error(ErrorCode::duplicate_artifact, "artifact " + to_string(id) + " already exists");
   std::vector<ArtifactId> targets(endorsed.begin(), endorsed.end());
   std::sort(targets.begin(), targets.end());
   if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
      throw Error(ErrorCode::duplicate_target, "artifact " + to_string(id) + " endorses a target twice");
   for (auto t : targets)
      if (!contains(t))
         throw Error(ErrorCode::unknown_artifact, "endorsed artifact " + to_string(t) + " does not exist");
   if (initial_score < 0.0)
      throw Error(ErrorCode::invalid_argument, "negative initial score");

   // Edges only point at pre-existing artifacts and the new node has no
   // incoming edges, so no cycle can form here.
   Node n;
   n.artifact   = Artifact{id, initial_score, static_cast<std::uint32_t>(targets.size()), created_at};
   n.propagated = false;
   for (auto t : targets) {
      links_.push_back(EndorsementLink{id, t, 1.0, LinkId{links_.size()}});
      auto& in = node(t).in;
      in.insert(std::upper_bound(in.begin(), in.end(), id), id);
   }
   n.out = std::move(targets);
   nodes_.emplace(id, std::move(n));
}

void ArtifactDag::insert_artifact(ArtifactId id, double score, SimTime created_at) {
   if (contains(id))
      throw Error(ErrorCode::duplicate_artifact, "artifact " + to_string(id) + " already exists");
   if (score < 0.0)
      throw Error(ErrorCode::invalid_argument, "negative score");
   Node n;
   n.artifact = Artifact{id, score, 0, created_at};
   nodes_.emplace(id, std::move(n));
}

void ArtifactDag::insert_link(ArtifactId source, ArtifactId target, double weight) {
   if (source == target)
      throw Error(ErrorCode::cycle_detected, "self endorsement on " + to_string(source));
   if (!(weight > 0.0))
      throw Error(ErrorCode::invalid_argument, "endorsement weight must be positive");
   auto& src = node(source);
   node(target); // existence check
   if (std::binary_search(src.out.begin(), src.out.end(), target))
      throw Error(ErrorCode::duplicate_target, "duplicate link " + to_string(source) + "->" + to_string(target));

   // Refuse the edge if source is already reachable from target.
   std::set<ArtifactId>   seen{target};
   std::deque<ArtifactId> frontier{target};
   while (!frontier.empty()) {
      auto cur = frontier.front();
      frontier.pop_front();
      if (cur == source)
         throw Error(ErrorCode::cycle_detected,
                     "link " + to_string(source) + "->" + to_string(target) + " would close a cycle");
      for (auto next : node(cur).out)
         if (seen.insert(next).second)
            frontier.push_back(next);
   }

   links_.push_back(EndorsementLink{source, target, weight, LinkId{links_.size()}});
   src.out.insert(std::upper_bound(src.out.begin(), src.out.end(), target), target);
   src.artifact.out_degree = static_cast<std::uint32_t>(src.out.size());
   auto& in = node(target).in;
   in.insert(std::upper_bound(in.begin(), in.end(), source), source);
}

void ArtifactDag::set_score(ArtifactId id, double score) {
   if (score < 0.0)
      throw Error(ErrorCode::invalid_argument, "negative score for " + to_string(id));
   node(id).artifact.score = score;
}

bool ArtifactDag::is_propagated(ArtifactId id) const { return node(id).propagated; }

void ArtifactDag::mark_propagated(ArtifactId id) { node(id).propagated = true; }

std::vector<ArtifactId> ArtifactDag::topological_order() const {
   // Kahn's algorithm over the endorser -> endorsed direction; ready nodes
   // are released in ascending id order so the result is deterministic.
   std::unordered_map<ArtifactId, std::size_t> pending_in;
   std::set<ArtifactId>                        ready;
   for (const auto& [id, n] : nodes_) {
      pending_in[id] = n.in.size();
      if (n.in.empty())
         ready.insert(id);
   }
   std::vector<ArtifactId> order;
   order.reserve(nodes_.size());
   while (!ready.empty()) {
      auto id = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(id);
      for (auto t : nodes_.at(id).out)
         if (--pending_in[t] == 0)
            ready.insert(t);
   }
   if (order.size() != nodes_.size())
      throw Error(ErrorCode::cycle_detected, "endorsement graph contains a cycle");
   return order;
}

bool ArtifactDag::is_acyclic() const {
   try {
      topological_order();
      return true;
   } catch (const Error&) {
      return false;
   }
}

bool ArtifactDag::adjacency_consistent() const {
   std::size_t forward = 0;
   std::size_t reverse = 0;
   for (const auto& [id, n] : nodes_) {
      if (n.artifact.out_degree != n.out.size())
         return false;
      if (!std::is_sorted(n.out.begin(), n.out.end()) || !std::is_sorted(n.in.begin(), n.in.end()))
         return false;
      forward += n.out.size();
      reverse += n.in.size();
      for (auto t : n.out) {
         auto it = nodes_.find(t);
         if (it == nodes_.end() || !std::binary_search(it->second.in.begin(), it->second.in.end(), id))
            return false;
      }
   }
   return forward == reverse && forward == links_.size();
}

double ArtifactDag::max_score() const {
   double best = 0.0;
   for (const auto& [id, n] : nodes_)
      best = std::max(best, n.artifact.score);
   return best;
}

bool operator==(const ArtifactDag& a, const ArtifactDag& b) {
   if (a.nodes_.size() != b.nodes_.size() || a.links_ != b.links_)
      return false;
   for (auto ia = a.nodes_.begin(), ib = b.nodes_.begin(); ia != a.nodes_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.artifact != ib->second.artifact || ia->second.out != ib->second.out ||
          ia->second.in != ib->second.in)
         return false;
   }
   return true;
}

} // namespace qcchain
