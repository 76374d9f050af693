#pragma once

#include <qcchain/dag.hpp>
#include <qcchain/ledger.hpp>

#include <cstdint>
#include <vector>

namespace qcchain {

enum class TargetRule { uniform, preferential };

struct DatasetConfig {
   std::size_t   n_artifacts{1000};
   double        ref_mean{19.02};
   double        ref_variance{12.17};
   /// Read ref_variance as a standard deviation instead of a variance.
   bool          variance_is_sigma{false};
   TargetRule    target_rule{TargetRule::uniform};
   std::uint64_t seed{1};

   double sigma() const;
   void   validate() const;
};

struct DatasetEntry {
   ArtifactId              id;
   std::vector<ArtifactId> endorsed; // ascending
};

struct Dataset {
   std::vector<DatasetEntry> entries;     // creation order, ids 1..n
   std::vector<std::int64_t> drawn_counts; // reference counts before clamping
};

/// Artifact k (1-based) draws c ~ Normal(mean, sigma^2), rounds it, clamps it
/// to [0, k-1] and endorses c distinct earlier artifacts.
Dataset generate_dataset(const DatasetConfig& cfg);

/// One endorsement transaction per artifact, txn ids 1..n.
std::vector<Transaction> to_workload(const Dataset& ds);

/// The dataset as a DAG with every artifact at `initial_score`.
ArtifactDag to_dag(const Dataset& ds, double initial_score);

} // namespace qcchain
