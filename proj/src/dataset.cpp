#include <qcchain/dataset.hpp>
#include <qcchain/error.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace qcchain {

double DatasetConfig::sigma() const { return variance_is_sigma ? ref_variance : std::sqrt(ref_variance); }

void DatasetConfig::validate() const {
   if (n_artifacts == 0)
      throw Error(ErrorCode::invalid_argument, "dataset needs at least one artifact");
   if (!(ref_variance >= 0))
      throw Error(ErrorCode::invalid_argument, "reference-count variance must be nonnegative");
}

namespace {

std::vector<std::size_t> uniform_targets(std::mt19937_64& rng, std::size_t existing, std::size_t c) {
   // Floyd's sampling: c distinct values from [0, existing)
   std::vector<std::size_t> picked;
   std::vector<char>        taken(existing, 0);
   for (std::size_t j = existing - c; j < existing; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      std::size_t                                t = pick(rng);
      if (taken[t])
         t = j;
      taken[t] = 1;
      picked.push_back(t);
   }
   return picked;
}

std::vector<std::size_t> preferential_targets(std::mt19937_64& rng, const std::vector<double>& weight,
                                              std::size_t existing, std::size_t c) {
   std::vector<double>      w(weight.begin(), weight.begin() + static_cast<std::ptrdiff_t>(existing));
   std::vector<std::size_t> picked;
   for (std::size_t i = 0; i < c; ++i) {
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      std::size_t                             t = pick(rng);
      w[t]                                      = 0.0;
      picked.push_back(t);
   }
   return picked;
}

} // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
   cfg.validate();
   std::mt19937_64                  rng(cfg.seed);
   std::normal_distribution<double> refs(cfg.ref_mean, cfg.sigma());
   std::vector<double>              attach(cfg.n_artifacts, 1.0); // in-degree + 1

   Dataset ds;
   ds.entries.reserve(cfg.n_artifacts);
   for (std::size_t k = 1; k <= cfg.n_artifacts; ++k) {
      const auto drawn = static_cast<std::int64_t>(std::llround(refs(rng)));
      ds.drawn_counts.push_back(drawn);
      const auto existing = k - 1;
      const auto c        = static_cast<std::size_t>(std::clamp<std::int64_t>(drawn, 0, existing));

      auto idx = cfg.target_rule == TargetRule::uniform ? uniform_targets(rng, existing, c)
                                                        : preferential_targets(rng, attach, existing, c);
      DatasetEntry e{ArtifactId{k}, {}};
      for (auto i : idx) {
         e.endorsed.push_back(ArtifactId{i + 1});
         attach[i] += 1.0;
      }
      std::sort(e.endorsed.begin(), e.endorsed.end());
      ds.entries.push_back(std::move(e));
   }
   return ds;
}

std::vector<Transaction> to_workload(const Dataset& ds) {
   std::vector<Transaction> out;
   out.reserve(ds.entries.size());
   for (std::size_t i = 0; i < ds.entries.size(); ++i)
      out.push_back(make_endorsement(TxnId{i + 1}, static_cast<double>(i), ds.entries[i].id, ds.entries[i].endorsed));
   return out;
}

ArtifactDag to_dag(const Dataset& ds, double initial_score) {
   ArtifactDag dag;
   for (const auto& e : ds.entries) {
      dag.add_artifact(e.id, e.endorsed, initial_score);
      dag.mark_propagated(e.id);
   }
   return dag;
}

} // namespace qcchain
