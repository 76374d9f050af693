#pragma once

#include <qcchain/dag.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace qcchain {

struct ScoringConfig {
   double damping{0.85};
   /// Score of a brand-new artifact. Defaults to 1 - damping so that an
   /// unendorsed artifact already sits at its fixed point; 1.0 reproduces
   /// the literal initialisation of the propagation pseudocode.
   double initial_score{0.15};
   /// Candidate deltas below epsilon are dropped and not propagated further.
   double epsilon{0.0};
   double fixed_point_tolerance{1e-9};

   static ScoringConfig with_damping(double d) { return ScoringConfig{d, 1.0 - d, 0.0, 1e-9}; }

   /// Throws Error(invalid_argument) unless 0 < d < 1, epsilon >= 0 and the
   /// tolerance is positive.
   void validate() const;
};

struct ScoreChange {
   double old_score{0.0};
   double new_score{0.0};

   friend bool operator==(const ScoreChange&, const ScoreChange&) = default;
};

/// One applied queue entry of the breadth-first propagation.
struct PropagationStep {
   ArtifactId   artifact;
   double       delta{0.0};
   std::int64_t parent{-1}; // index of the entry that produced this one, -1 for the root
};

struct UpdateSet {
   std::map<ArtifactId, ScoreChange> entries;
   /// Queue entries in application order. Empty when the exact (epsilon = 0)
   /// path is taken, which aggregates deltas per artifact instead.
   std::vector<PropagationStep> trace;

   std::map<ArtifactId, double> new_scores() const;
};

/// Evaluates S_i = (1-d) + d * sum_{j -> i} S_j / L_j over the whole DAG in a
/// single pass over a topological order (endorsers first). Endorser sums run
/// in ascending artifact id order.
std::map<ArtifactId, double> fixed_point_scores(const ArtifactDag& dag, const ScoringConfig& config);

/// Incremental score change caused by inserting `new_artifact` endorsing
/// `endorsed` into `dag`, computed without modifying `dag`. The new artifact
/// must not be in `dag` yet.
///
/// The root entry carries delta = initial_score. Every dequeued entry (t, dt)
/// hands each artifact t endorses the candidate d * dt / L_t; the candidate is
/// applied and enqueued iff it is >= epsilon. Entries arriving at one artifact
/// over different paths accumulate. With epsilon == 0 every path is followed,
/// which is evaluated exactly by aggregating deltas in topological order.
UpdateSet compute_update(const ArtifactDag& dag, ArtifactId new_artifact, std::span<const ArtifactId> endorsed,
                         const ScoringConfig& config);

/// Same propagation for an artifact that was just inserted with
/// add_artifact; applies the new scores and marks the artifact propagated.
/// Throws Error(unknown_artifact) or Error(already_propagated).
UpdateSet propagate_update(ArtifactDag& dag, ArtifactId new_artifact, const ScoringConfig& config);

/// Power-iteration PageRank on the endorsement graph (i -> j moves score
/// from i to j), uniform teleport, dangling mass spread uniformly, L1
/// normalised. Throws Error(not_converged) after max_iter rounds.
std::map<ArtifactId, double> pagerank_baseline(const ArtifactDag& dag, double damping, double tolerance,
                                               int max_iter);

struct HitsScores {
   std::map<ArtifactId, double> authority;
   std::map<ArtifactId, double> hub;
   /// Set when the graph has no links at all: both vectors are all zero.
   bool degenerate{false};
};

HitsScores hits_baseline(const ArtifactDag& dag, double tolerance, int max_iter);

/// Pearson product-moment correlation. Throws Error(invalid_argument) on a
/// length mismatch, fewer than two samples or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> min_max_normalize(std::span<const double> values);

/// Values of `scores` in ascending key order.
std::vector<double> values_of(const std::map<ArtifactId, double>& scores);

} // namespace qcchain
