#include <qcchain/committee.hpp>
#include <qcchain/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>

namespace qcchain {

bool CommitteeState::contains(NodeId id) const {
   return std::binary_search(members.begin(), members.end(), id);
}

bool CommitteeState::valid() const {
   if (members.empty() || round_index >= members.size() || leader_schedule.size() != members.size())
      return false;
   if (!std::is_sorted(members.begin(), members.end()) ||
       std::adjacent_find(members.begin(), members.end()) != members.end())
      return false;
   auto sched = leader_schedule;
   std::sort(sched.begin(), sched.end());
   return sched == members;
}

double CommitteeConfig::resolved_theta(std::size_t nodes) const {
   if (theta > 0)
      return theta;
   return theta_fraction * static_cast<double>(K) * static_cast<double>(nodes > 0 ? nodes - 1 : 0);
}

void CommitteeConfig::validate() const {
   if (K == 0)
      throw Error(ErrorCode::invalid_argument, "committee size K must be positive");
   if (theta < 0 || (theta == 0 && !(theta_fraction > 0)))
      throw Error(ErrorCode::invalid_argument, "theta must be positive");
   if (max_subscription_rounds == 0)
      throw Error(ErrorCode::invalid_argument, "max_subscription_rounds must be positive");
}

void GaConfig::validate() const {
   if (population_size < 2)
      throw Error(ErrorCode::invalid_argument, "GA population must hold at least two genomes");
   if (!(crossover_rate >= 0 && crossover_rate <= 1) || !(mutation_rate >= 0 && mutation_rate <= 1))
      throw Error(ErrorCode::invalid_argument, "GA rates must lie in [0, 1]");
   if (tournament_size == 0 || generations == 0)
      throw Error(ErrorCode::invalid_argument, "GA tournament size and generations must be positive");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
   std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
   z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
   z               = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
   return z ^ (z >> 31);
}

CommitteeState init_committee(std::span<const NodeId> nodes, std::size_t K, std::uint64_t seed) {
   if (K == 0 || K > nodes.size())
      throw Error(ErrorCode::invalid_argument, "cannot draw a committee of " + std::to_string(K) + " from " +
                                                  std::to_string(nodes.size()) + " nodes");
   std::mt19937_64     rng(seed);
   std::vector<NodeId> pool(nodes.begin(), nodes.end());
   std::sort(pool.begin(), pool.end());
   // partial Fisher-Yates
   for (std::size_t i = 0; i < K; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
   }
   CommitteeState st;
   st.leader_schedule.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(K));
   st.members = st.leader_schedule;
   std::sort(st.members.begin(), st.members.end());
   return st;
}

std::pair<NodeId, bool> next_leader(CommitteeState& state) {
   NodeId leader = state.leader_schedule.at(state.round_index);
   state.round_index = (state.round_index + 1) % state.leader_schedule.size();
   return {leader, state.round_index == 0};
}

namespace {

struct Genome {
   std::vector<std::size_t> genes; // candidate indices, distinct
   double                   reputation{0.0};
   double                   slowness{0.0};
   double                   fitness{0.0};
};

class GaRun {
public:
   GaRun(std::span<const Candidate> c, std::size_t K, double theta, const GaConfig& ga)
      : cand_(c), k_(K), theta_(theta), ga_(ga), rng_(ga.seed), in_genome_(c.size(), 0) {
      double max_rep = 0.0;
      for (const auto& x : c)
         max_rep = std::max(max_rep, x.reputation);
      penalty_ = std::max(max_rep, 1.0) * static_cast<double>(K) / theta;
   }

   GaOutcome run() {
      std::vector<Genome> pop;
      pop.reserve(ga_.population_size);
      pop.push_back(seeded_by([&](std::size_t a, std::size_t b) {
         return cand_[a].slowness < cand_[b].slowness;
      }));
      pop.push_back(seeded_by([&](std::size_t a, std::size_t b) {
         return cand_[a].reputation > cand_[b].reputation ||
                (cand_[a].reputation == cand_[b].reputation && cand_[a].slowness < cand_[b].slowness);
      }));
      while (pop.size() < ga_.population_size)
         pop.push_back(random_genome());
      for (auto& g : pop)
         record(g);

      std::size_t stall = 0;
      double      best  = best_of(pop).fitness;
      for (std::size_t gen = 0; gen < ga_.generations; ++gen) {
         std::vector<Genome> next;
         next.reserve(pop.size());
         next.push_back(best_of(pop));
         std::uniform_real_distribution<double> coin(0.0, 1.0);
         while (next.size() < pop.size()) {
            const Genome& a = tournament(pop);
            const Genome& b = tournament(pop);
            Genome child    = coin(rng_) < ga_.crossover_rate ? crossover(a, b) : a;
            if (coin(rng_) < ga_.mutation_rate)
               mutate(child);
            evaluate(child);
            record(child);
            next.push_back(std::move(child));
         }
         pop.swap(next);
         double now = best_of(pop).fitness;
         if (now > best) {
            best  = now;
            stall = 0;
         } else if (ga_.stall_generations > 0 && ++stall >= ga_.stall_generations) {
            break;
         }
      }

      const Genome& pick = best_feasible_ ? *best_feasible_ : *least_slow_;
      GaOutcome     out;
      out.feasible       = best_feasible_.has_value();
      out.reputation_sum = pick.reputation;
      out.slowness_sum   = pick.slowness;
      for (auto i : pick.genes)
         out.members.push_back(cand_[i].id);
      std::sort(out.members.begin(), out.members.end());
      return out;
   }

private:
   // Sorting a shuffled index keeps ties in random order, so equal
   // candidates do not always favour low ids.
   template <typename Less>
   Genome seeded_by(Less less) {
      std::vector<std::size_t> idx(cand_.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng_);
      std::stable_sort(idx.begin(), idx.end(), less);
      Genome g;
      g.genes.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_));
      evaluate(g);
      return g;
   }

   Genome random_genome() {
      Genome g;
      fill(g);
      evaluate(g);
      return g;
   }

   // Tops the genome up with random distinct candidates.
   void fill(Genome& g) {
      for (auto i : g.genes)
         in_genome_[i] = 1;
      std::uniform_int_distribution<std::size_t> pick(0, cand_.size() - 1);
      while (g.genes.size() < k_) {
         auto i = pick(rng_);
         if (!in_genome_[i]) {
            in_genome_[i] = 1;
            g.genes.push_back(i);
         }
      }
      for (auto i : g.genes)
         in_genome_[i] = 0;
   }

   void evaluate(Genome& g) const {
      g.reputation = g.slowness = 0.0;
      for (auto i : g.genes) {
         g.reputation += cand_[i].reputation;
         g.slowness += cand_[i].slowness;
      }
      g.fitness = g.reputation - (g.slowness > theta_ ? penalty_ * (g.slowness - theta_) : 0.0);
   }

   void record(const Genome& g) {
      if (g.slowness <= theta_ && (!best_feasible_ || better(g, *best_feasible_)))
         best_feasible_ = g;
      if (!least_slow_ || g.slowness < least_slow_->slowness)
         least_slow_ = g;
   }

   // Higher fitness wins; equal fitness goes to the faster committee.
   static bool better(const Genome& a, const Genome& b) {
      return a.fitness > b.fitness || (a.fitness == b.fitness && a.slowness < b.slowness);
   }

   const Genome& best_of(const std::vector<Genome>& pop) const {
      const Genome* b = &pop.front();
      for (const auto& g : pop)
         if (better(g, *b))
            b = &g;
      return *b;
   }

   const Genome& tournament(const std::vector<Genome>& pop) {
      std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
      const Genome* b = &pop[pick(rng_)];
      for (std::size_t i = 1; i < ga_.tournament_size; ++i) {
         const Genome* c = &pop[pick(rng_)];
         if (better(*c, *b))
            b = c;
      }
      return *b;
   }

   Genome crossover(const Genome& a, const Genome& b) {
      std::bernoulli_distribution from_a(0.5);
      Genome                      child;
      child.genes.reserve(k_);
      for (std::size_t i = 0; i < k_; ++i) {
         auto gene = from_a(rng_) ? a.genes[i] : b.genes[i];
         if (!in_genome_[gene]) {
            in_genome_[gene] = 1;
            child.genes.push_back(gene);
         }
      }
      for (auto i : child.genes)
         in_genome_[i] = 0;
      fill(child);
      return child;
   }

   void mutate(Genome& g) {
      if (cand_.size() == k_)
         return;
      for (auto i : g.genes)
         in_genome_[i] = 1;
      std::uniform_int_distribution<std::size_t> slot(0, k_ - 1), pick(0, cand_.size() - 1);
      std::size_t                                repl;
      do
         repl = pick(rng_);
      while (in_genome_[repl]);
      for (auto i : g.genes)
         in_genome_[i] = 0;
      g.genes[slot(rng_)] = repl;
   }

   std::span<const Candidate> cand_;
   std::size_t                k_;
   double                     theta_;
   double                     penalty_{0.0};
   const GaConfig&            ga_;
   std::mt19937_64            rng_;
   std::vector<char>          in_genome_;
   std::optional<Genome>      best_feasible_;
   std::optional<Genome>      least_slow_;
};

void check_candidates(std::span<const Candidate> candidates, std::size_t K, double theta) {
   if (K == 0 || candidates.size() < K)
      throw Error(ErrorCode::invalid_argument, "need at least K candidates");
   if (!(theta > 0))
      throw Error(ErrorCode::invalid_argument, "theta must be positive");
}

} // namespace

GaOutcome ga_propose(std::span<const Candidate> candidates, std::size_t K, double theta, const GaConfig& ga) {
   check_candidates(candidates, K, theta);
   ga.validate();
   return GaRun(candidates, K, theta, ga).run();
}

GaOutcome exhaustive_propose(std::span<const Candidate> candidates, std::size_t K, double theta) {
   check_candidates(candidates, K, theta);
   const std::size_t n = candidates.size();
   std::vector<char> mask(n, 0);
   std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(K), 1);

   std::optional<GaOutcome> best_ok, least_slow;
   do {
      GaOutcome o;
      for (std::size_t i = 0; i < n; ++i)
         if (mask[i]) {
            o.members.push_back(candidates[i].id);
            o.reputation_sum += candidates[i].reputation;
            o.slowness_sum += candidates[i].slowness;
         }
      o.feasible = o.slowness_sum <= theta;
      if (o.feasible && (!best_ok || o.reputation_sum > best_ok->reputation_sum))
         best_ok = o;
      if (!least_slow || o.slowness_sum < least_slow->slowness_sum)
         least_slow = o;
   } while (std::prev_permutation(mask.begin(), mask.end()));

   GaOutcome out = best_ok ? *best_ok : *least_slow;
   std::sort(out.members.begin(), out.members.end());
   return out;
}

SubscriptionResult subscribe(std::span<const std::vector<NodeId>> member_lists, std::size_t K) {
   std::map<NodeId, std::size_t> counts;
   for (const auto& list : member_lists) {
      if (list.size() != K)
         throw Error(ErrorCode::invalid_argument, "subscription list length differs from K");
      std::set<NodeId> distinct(list.begin(), list.end());
      for (auto n : distinct)
         ++counts[n];
   }
   const std::size_t m    = member_lists.size();
   const std::size_t need = (m + 1) / 2;
   std::vector<std::pair<NodeId, std::size_t>> qualified;
   for (auto [n, c] : counts)
      if (c >= need)
         qualified.emplace_back(n, c);
   std::stable_sort(qualified.begin(), qualified.end(),
                    [](const auto& a, const auto& b) { return a.second > b.second; });
   SubscriptionResult out;
   for (std::size_t i = 0; i < qualified.size() && i < K; ++i)
      out.committee.push_back(qualified[i].first);
   out.complete = out.committee.size() >= K;
   return out;
}

CommitteeState rebuild_committee(const CommitteeState& current, std::span<const Candidate> candidates,
                                 const CommitteeConfig& cfg, const GaConfig& ga, std::uint64_t global_seed,
                                 RebuildReport* report) {
   const std::size_t K = cfg.K;
   if (candidates.size() < K)
      throw Error(ErrorCode::invalid_argument, "fewer nodes than committee seats");
   const double theta = cfg.resolved_theta(candidates.size());

   std::vector<Candidate> pool;
   for (const auto& c : candidates)
      if (!current.contains(c.id))
         pool.push_back(c);
   // Too few outsiders to form a disjoint committee: let members stand again.
   if (pool.size() < K)
      pool.assign(candidates.begin(), candidates.end());

   std::vector<NodeId> chosen;
   std::set<NodeId>    chosen_set;
   RebuildReport       rep;
   for (std::size_t round = 0; round < cfg.max_subscription_rounds && chosen.size() < K; ++round) {
      ++rep.subscription_rounds;
      std::vector<std::vector<NodeId>> lists;
      for (auto member : current.members) {
         GaConfig member_ga = ga;
         member_ga.seed =
            mix_seed(mix_seed(mix_seed(global_seed, current.term_id), member.value), ga.seed + round);
         lists.push_back(ga_propose(pool, K, theta, member_ga).members);
      }
      for (auto n : subscribe(lists, K).committee)
         if (chosen.size() < K && chosen_set.insert(n).second)
            chosen.push_back(n);
   }

   if (chosen.size() < K) {
      std::vector<const Candidate*> rest;
      for (const auto& c : pool)
         if (!chosen_set.count(c.id))
            rest.push_back(&c);
      std::stable_sort(rest.begin(), rest.end(), [](const Candidate* a, const Candidate* b) {
         double ra = a->reputation / (1.0 + a->slowness), rb = b->reputation / (1.0 + b->slowness);
         return ra > rb || (ra == rb && a->id < b->id);
      });
      for (std::size_t i = 0; chosen.size() < K; ++i) {
         chosen.push_back(rest[i]->id);
         ++rep.fallback_seats;
      }
   }

   CommitteeState next = init_committee(chosen, K, mix_seed(global_seed, current.term_id + 1));
   next.term_id        = current.term_id + 1;
   if (report)
      *report = rep;
   return next;
}

} // namespace qcchain
