#pragma once

#include <qcchain/dag.hpp>
#include <qcchain/ids.hpp>
#include <qcchain/ledger.hpp>

#include <memory>
#include <random>
#include <set>

namespace qcchain {

enum class Behavior { honest, malicious };

/// Everything one participant keeps locally: its two ledgers (block chain
/// and artifact DAG), its own cumulative reputation and its current epsilon.
///
/// The DAG is held through a shared pointer to an immutable snapshot.
/// Committing produces a new snapshot, so nodes that apply the same commit
/// to the same snapshot can share the result.
struct NodeState {
   NodeId                             id;
   Behavior                           behavior{Behavior::honest};
   double                             reputation{0.0};
   std::shared_ptr<const ArtifactDag> dag{std::make_shared<const ArtifactDag>()};
   Ledger                             ledger;
   double                             epsilon{0.0};
   std::mt19937_64                    rng;
   std::set<TxnId>                    seen_txns;

   NodeState() = default;
   NodeState(NodeId node, Behavior b, std::uint64_t seed, double initial_epsilon)
      : id(node), behavior(b), epsilon(initial_epsilon), rng(seed) {}

   bool honest() const { return behavior == Behavior::honest; }
};

} // namespace qcchain
