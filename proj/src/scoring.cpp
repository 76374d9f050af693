#include <qcchain/error.hpp>
#include <qcchain/scoring.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <unordered_map>

namespace qcchain {

void ScoringConfig::validate() const {
   if (!(damping > 0.0 && damping < 1.0))
      throw Error(ErrorCode::invalid_argument, "damping factor must lie in (0,1)");
   if (!(epsilon >= 0.0))
      throw Error(ErrorCode::invalid_argument, "epsilon must be non-negative");
   if (!(fixed_point_tolerance > 0.0))
      throw Error(ErrorCode::invalid_argument, "fixed point tolerance must be positive");
   if (!(initial_score >= 0.0))
      throw Error(ErrorCode::invalid_argument, "initial score must be non-negative");
}

std::map<ArtifactId, double> UpdateSet::new_scores() const {
   std::map<ArtifactId, double> out;
   for (const auto& [id, c] : entries)
      out.emplace(id, c.new_score);
   return out;
}

std::map<ArtifactId, double> fixed_point_scores(const ArtifactDag& dag, const ScoringConfig& config) {
   config.validate();
   const double                 d = config.damping;
   std::map<ArtifactId, double> scores;
   for (auto id : dag.topological_order()) {
      double sum = 0.0;
      for (auto j : dag.endorsers_of(id))
         sum += scores.at(j) / static_cast<double>(dag.artifact(j).out_degree);
      scores.emplace(id, (1.0 - d) + d * sum);
   }
   return scores;
}

namespace {

// Descendants of `seeds` ordered so every artifact follows all of its
// endorsers inside the reachable subgraph.
std::vector<ArtifactId> reachable_in_topological_order(const ArtifactDag& dag, std::span<const ArtifactId> seeds) {
   std::set<ArtifactId>   reach(seeds.begin(), seeds.end());
   std::deque<ArtifactId> frontier(seeds.begin(), seeds.end());
   while (!frontier.empty()) {
      auto t = frontier.front();
      frontier.pop_front();
      for (auto c : dag.endorsed_by(t))
         if (reach.insert(c).second)
            frontier.push_back(c);
   }
   std::unordered_map<ArtifactId, std::size_t> indegree;
   for (auto t : reach)
      for (auto c : dag.endorsed_by(t))
         ++indegree[c];
   std::set<ArtifactId> ready;
   for (auto t : reach)
      if (indegree[t] == 0)
         ready.insert(t);
   std::vector<ArtifactId> order;
   order.reserve(reach.size());
   while (!ready.empty()) {
      auto t = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(t);
      for (auto c : dag.endorsed_by(t))
         if (--indegree[c] == 0)
            ready.insert(c);
   }
   if (order.size() != reach.size())
      throw Error(ErrorCode::cycle_detected, "endorsement graph contains a cycle");
   return order;
}

UpdateSet run_propagation(const ArtifactDag& dag, ArtifactId root, std::span<const ArtifactId> root_targets,
                          const ScoringConfig& config) {
   config.validate();
   const double d  = config.damping;
   const double s0 = config.initial_score;

   UpdateSet out;
   out.entries.emplace(root, ScoreChange{s0, s0});

   auto targets_of = [&](ArtifactId t) -> std::span<const ArtifactId> {
      return t == root ? root_targets : dag.endorsed_by(t);
   };

   if (config.epsilon == 0.0) {
      // Every path is followed; by linearity the per-path deltas sum to the
      // per-artifact totals pushed through the reachable subgraph in order.
      std::map<ArtifactId, double> pending;
      if (!root_targets.empty()) {
         const double cand = d * s0 / static_cast<double>(root_targets.size());
         for (auto c : root_targets)
            pending[c] += cand;
      }
      for (auto t : reachable_in_topological_order(dag, root_targets)) {
         const double delta = pending[t];
         if (delta == 0.0)
            continue;
         const double old = dag.score(t);
         out.entries[t]   = ScoreChange{old, old + delta};
         auto children    = dag.endorsed_by(t);
         if (children.empty())
            continue;
         const double cand = d * delta / static_cast<double>(children.size());
         for (auto c : children)
            pending[c] += cand;
      }
      return out;
   }

   out.trace.push_back(PropagationStep{root, s0, -1});
   std::deque<std::size_t> queue{0};
   while (!queue.empty()) {
      const auto idx = queue.front();
      queue.pop_front();
      const auto step     = out.trace[idx];
      auto       children = targets_of(step.artifact);
      if (children.empty())
         continue;
      const double cand = d * step.delta / static_cast<double>(children.size());
      if (cand < config.epsilon)
         continue;
      for (auto c : children) {
         auto [it, inserted] = out.entries.try_emplace(c, ScoreChange{dag.score(c), dag.score(c)});
         it->second.new_score += cand;
         queue.push_back(out.trace.size());
         out.trace.push_back(PropagationStep{c, cand, static_cast<std::int64_t>(idx)});
      }
   }
   return out;
}

} // namespace

UpdateSet compute_update(const ArtifactDag& dag, ArtifactId new_artifact, std::span<const ArtifactId> endorsed,
                         const ScoringConfig& config) {
   if (dag.contains(new_artifact))
      throw Error(ErrorCode::duplicate_artifact, "artifact " + to_string(new_artifact) + " already in the DAG");
   for (auto t : endorsed)
      if (!dag.contains(t))
         throw Error(ErrorCode::unknown_artifact, "endorsed artifact " + to_string(t) + " is unknown");
   std::vector<ArtifactId> targets(endorsed.begin(), endorsed.end());
   std::sort(targets.begin(), targets.end());
   if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
      throw Error(ErrorCode::duplicate_target, "endorsement lists a target twice");
   return run_propagation(dag, new_artifact, targets, config);
}

UpdateSet propagate_update(ArtifactDag& dag, ArtifactId new_artifact, const ScoringConfig& config) {
   if (dag.is_propagated(new_artifact))
      throw Error(ErrorCode::already_propagated, "artifact " + to_string(new_artifact) + " was already propagated");
   auto targets = dag.endorsed_by(new_artifact);
   auto update  = run_propagation(dag, new_artifact, targets, config);
   for (const auto& [id, change] : update.entries)
      dag.set_score(id, change.new_score);
   dag.mark_propagated(new_artifact);
   return update;
}

namespace {

struct IndexedGraph {
   std::vector<ArtifactId>               ids;
   std::vector<std::vector<std::size_t>> out;
};

IndexedGraph index_graph(const ArtifactDag& dag) {
   IndexedGraph g;
   g.ids = dag.ids();
   std::unordered_map<ArtifactId, std::size_t> pos;
   for (std::size_t i = 0; i < g.ids.size(); ++i)
      pos.emplace(g.ids[i], i);
   g.out.resize(g.ids.size());
   for (std::size_t i = 0; i < g.ids.size(); ++i)
      for (auto t : dag.endorsed_by(g.ids[i]))
         g.out[i].push_back(pos.at(t));
   return g;
}

std::map<ArtifactId, double> to_map(const std::vector<ArtifactId>& ids, const std::vector<double>& v) {
   std::map<ArtifactId, double> out;
   for (std::size_t i = 0; i < ids.size(); ++i)
      out.emplace(ids[i], v[i]);
   return out;
}

double l2_normalize(std::vector<double>& v) {
   double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
   if (norm > 0.0)
      for (auto& x : v)
         x /= norm;
   return norm;
}

} // namespace

std::map<ArtifactId, double> pagerank_baseline(const ArtifactDag& dag, double damping, double tolerance,
                                               int max_iter) {
   if (dag.empty())
      throw Error(ErrorCode::invalid_argument, "PageRank needs a non-empty graph");
   if (!(damping > 0.0 && damping < 1.0) || !(tolerance > 0.0))
      throw Error(ErrorCode::invalid_argument, "bad PageRank parameters");
   const auto          g = index_graph(dag);
   const std::size_t   n = g.ids.size();
   const double        uniform = 1.0 / static_cast<double>(n);
   std::vector<double> rank(n, uniform), next(n);
   for (int iter = 0; iter < max_iter; ++iter) {
      double dangling = 0.0;
      for (std::size_t i = 0; i < n; ++i)
         if (g.out[i].empty())
            dangling += rank[i];
      const double base = (1.0 - damping) * uniform + damping * dangling * uniform;
      std::fill(next.begin(), next.end(), base);
      for (std::size_t i = 0; i < n; ++i) {
         if (g.out[i].empty())
            continue;
         const double share = damping * rank[i] / static_cast<double>(g.out[i].size());
         for (auto j : g.out[i])
            next[j] += share;
      }
      double total = std::accumulate(next.begin(), next.end(), 0.0);
      double diff  = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
         next[i] /= total;
         diff += std::abs(next[i] - rank[i]);
      }
      rank.swap(next);
      if (diff < tolerance)
         return to_map(g.ids, rank);
   }
   throw Error(ErrorCode::not_converged, "PageRank did not converge");
}

HitsScores hits_baseline(const ArtifactDag& dag, double tolerance, int max_iter) {
   if (dag.empty())
      throw Error(ErrorCode::invalid_argument, "HITS needs a non-empty graph");
   const auto        g = index_graph(dag);
   const std::size_t n = g.ids.size();
   HitsScores        out;
   if (dag.links().empty()) {
      std::vector<double> zeros(n, 0.0);
      out.authority  = to_map(g.ids, zeros);
      out.hub        = to_map(g.ids, zeros);
      out.degenerate = true;
      return out;
   }
   std::vector<double> hub(n, 1.0), auth(n, 0.0), next_auth(n), next_hub(n);
   l2_normalize(hub);
   for (int iter = 0; iter < max_iter; ++iter) {
      std::fill(next_auth.begin(), next_auth.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
         for (auto j : g.out[i])
            next_auth[j] += hub[i];
      l2_normalize(next_auth);
      std::fill(next_hub.begin(), next_hub.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
         for (auto j : g.out[i])
            next_hub[i] += next_auth[j];
      l2_normalize(next_hub);
      double diff = 0.0;
      for (std::size_t i = 0; i < n; ++i)
         diff += std::abs(next_auth[i] - auth[i]) + std::abs(next_hub[i] - hub[i]);
      auth.swap(next_auth);
      hub.swap(next_hub);
      if (diff < tolerance) {
         out.authority = to_map(g.ids, auth);
         out.hub       = to_map(g.ids, hub);
         return out;
      }
   }
   throw Error(ErrorCode::not_converged, "HITS did not converge");
}

double pearson(std::span<const double> x, std::span<const double> y) {
   if (x.size() != y.size())
      throw Error(ErrorCode::invalid_argument, "pearson: length mismatch");
   if (x.size() < 2)
      throw Error(ErrorCode::invalid_argument, "pearson: need at least two samples");
   const double n  = static_cast<double>(x.size());
   const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
   const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
   double       sxy = 0.0, sxx = 0.0, syy = 0.0;
   for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = x[i] - mx, dy = y[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
   }
   if (sxx == 0.0 || syy == 0.0)
      throw Error(ErrorCode::invalid_argument, "pearson: zero variance");
   return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
   std::vector<std::size_t> order(v.size());
   std::iota(order.begin(), order.end(), 0);
   std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
   std::vector<double> ranks(v.size());
   for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
         ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k)
         ranks[order[k]] = avg;
      i = j + 1;
   }
   return ranks;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
   if (x.size() != y.size())
      throw Error(ErrorCode::invalid_argument, "spearman: length mismatch");
   auto rx = average_ranks(x);
   auto ry = average_ranks(y);
   return pearson(rx, ry);
}

std::vector<double> min_max_normalize(std::span<const double> values) {
   std::vector<double> out(values.begin(), values.end());
   if (out.empty())
      return out;
   auto [lo, hi] = std::minmax_element(out.begin(), out.end());
   const double low = *lo, range = *hi - *lo;
   for (auto& v : out)
      v = range > 0.0 ? (v - low) / range : 0.0;
   return out;
}

std::vector<double> values_of(const std::map<ArtifactId, double>& scores) {
   std::vector<double> out;
   out.reserve(scores.size());
   for (const auto& [id, v] : scores)
      out.push_back(v);
   return out;
}

} // namespace qcchain
