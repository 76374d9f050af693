#pragma once

#include <qcchain/ids.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace qcchain {

struct Artifact {
   ArtifactId    id;
   double        score{0.0};     // S_i, always >= 0
   std::uint32_t out_degree{0};  // L_i
   SimTime       created_at{0.0};

   friend bool operator==(const Artifact&, const Artifact&) = default;
};

/// Directed edge source -> target: `source` endorses (cites) `target`.
/// The weight is kept for the data model but scoring ignores it.
struct EndorsementLink {
   ArtifactId source;
   ArtifactId target;
   double     weight{1.0};
   LinkId     link_id;

   friend bool operator==(const EndorsementLink&, const EndorsementLink&) = default;
};

/// The endorsement graph held by every node (its "DAG ledger").
///
/// Artifacts iterate in ascending id order. Forward adjacency lists hold the
/// endorsed targets sorted by id, reverse lists hold the endorsers sorted by
/// id. New artifacts may only endorse artifacts that already exist, so the
/// graph stays acyclic by construction; `insert_link` exists for importers
/// and still refuses cycles.
class ArtifactDag {
public:
   bool        contains(ArtifactId id) const { return nodes_.count(id) != 0; }
   std::size_t size() const { return nodes_.size(); }
   bool        empty() const { return nodes_.empty(); }

   /// Throws Error(unknown_artifact).
   const Artifact& artifact(ArtifactId id) const;
   double          score(ArtifactId id) const { return artifact(id).score; }

   /// Targets endorsed by `id` (ascending).
   std::span<const ArtifactId> endorsed_by(ArtifactId id) const;
   /// Artifacts endorsing `id` (ascending).
   std::span<const ArtifactId> endorsers_of(ArtifactId id) const;

   const std::vector<EndorsementLink>& links() const { return links_; }
   std::vector<ArtifactId>             ids() const;
   std::vector<Artifact>               artifacts() const;

   /// Inserts `id` endorsing every element of `endorsed`.
   /// Throws on a duplicate id, an unknown target or a repeated target.
   void add_artifact(ArtifactId id, std::span<const ArtifactId> endorsed, double initial_score,
                     SimTime created_at = 0.0);

   /// Low-level building blocks used by importers.
   void insert_artifact(ArtifactId id, double score, SimTime created_at);
   void insert_link(ArtifactId source, ArtifactId target, double weight);

   void set_score(ArtifactId id, double score);

   /// True once the incremental score update for `id` has been applied or
   /// committed. Freshly added artifacts start out pending.
   bool is_propagated(ArtifactId id) const;
   void mark_propagated(ArtifactId id);

   /// Endorsers before the artifacts they endorse. Throws Error(cycle_detected).
   std::vector<ArtifactId> topological_order() const;

   bool   is_acyclic() const;
   /// Reverse adjacency is the exact transpose of forward adjacency and every
   /// out_degree matches its forward list.
   bool   adjacency_consistent() const;
   double max_score() const;

   friend bool operator==(const ArtifactDag& a, const ArtifactDag& b);

private:
   struct Node {
      Artifact                artifact;
      std::vector<ArtifactId> out;
      std::vector<ArtifactId> in;
      bool                    propagated{true};
   };

   Node&       node(ArtifactId id);
   const Node& node(ArtifactId id) const;

   std::map<ArtifactId, Node>   nodes_;
   std::vector<EndorsementLink> links_;
};

/// Free-function form of ArtifactDag::add_artifact.
inline ArtifactDag& add_artifact(ArtifactDag& dag, ArtifactId id, std::span<const ArtifactId> endorsed,
                                 double initial_score, SimTime created_at = 0.0) {
   dag.add_artifact(id, endorsed, initial_score, created_at);
   return dag;
}

} // namespace qcchain
