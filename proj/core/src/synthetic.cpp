#include "ckrl/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>

#include "ckrl/error.hpp"
#include "ckrl/rng.hpp"

namespace ckrl {

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.types == 0 || spec.entities < 2 * spec.types)
    throw UsageError("synthetic graph needs at least two entities per type");
  if (spec.composed_relations * 2 > spec.relations)
    throw UsageError("too many composed relations for the base relation count");
  Rng rng(spec.seed);
  const std::size_t k = spec.latent_dim;

  std::vector<std::vector<double>> latent(spec.entities, std::vector<double>(k));
  for (auto& v : latent)
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
  std::vector<std::vector<EntityId>> by_type(spec.types);
  for (std::size_t e = 0; e < spec.entities; ++e) by_type[e % spec.types].push_back(static_cast<EntityId>(e));

  const std::size_t base = spec.relations - spec.composed_relations;
  std::vector<std::size_t> head_type(spec.relations), tail_type(spec.relations);
  // First tail of each head under each base relation, used for composition.
  std::vector<std::vector<std::optional<EntityId>>> first_tail(
      base, std::vector<std::optional<EntityId>>(spec.entities));

  std::set<Triple> triples;
  for (std::size_t r = 0; r < base; ++r) {
    head_type[r] = rng.uniform(spec.types);
    tail_type[r] = rng.uniform(spec.types);
    std::vector<double> shift(k);
    for (double& x : shift) x = rng.uniform(-0.8, 0.8);

    auto heads = by_type[head_type[r]];
    for (std::size_t i = heads.size(); i > 1; --i) std::swap(heads[i - 1], heads[rng.uniform(i)]);
    heads.resize(std::max<std::size_t>(1, static_cast<std::size_t>(spec.head_fraction * static_cast<double>(heads.size()))));

    for (const EntityId h : heads) {
      std::vector<std::pair<double, EntityId>> scored;
      for (const EntityId c : by_type[tail_type[r]]) {
        if (c == h) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const double x = latent[h][i] + shift[i] - latent[c][i];
          d += x * x;
        }
        scored.emplace_back(d, c);
      }
      std::sort(scored.begin(), scored.end());
      const std::size_t m = std::min(spec.tails_per_head, scored.size());
      for (std::size_t j = 0; j < m; ++j)
        triples.insert({h, static_cast<RelationId>(r), scored[j].second});
      if (m > 0) first_tail[r][h] = scored[0].second;
    }
  }

  for (std::size_t c = 0; c < spec.composed_relations; ++c) {
    const auto r = static_cast<RelationId>(base + c);
    // Pick a chainable pair a: A->B, b: B->C when one exists.
    std::size_t a = rng.uniform(base), b = rng.uniform(base);
    for (int attempt = 0; attempt < 64 && tail_type[a] != head_type[b]; ++attempt) {
      a = rng.uniform(base);
      b = rng.uniform(base);
    }
    for (std::size_t h = 0; h < spec.entities; ++h) {
      const auto m = first_tail[a][h];
      if (!m) continue;
      const auto t = first_tail[b][*m];
      if (!t || *t == h) continue;
      triples.insert({static_cast<EntityId>(h), r, *t});
    }
  }

  std::vector<Triple> all(triples.begin(), triples.end());
  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.uniform(i)]);
  const auto n_valid = static_cast<std::size_t>(spec.valid_fraction * static_cast<double>(all.size()));
  const auto n_test = static_cast<std::size_t>(spec.test_fraction * static_cast<double>(all.size()));

  Dataset d;
  d.entities = Vocabulary::numbered(spec.entities, "e");
  d.relations = Vocabulary::numbered(spec.relations, "r");
  d.test.assign(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
  d.valid.assign(all.end() - static_cast<std::ptrdiff_t>(n_test + n_valid),
                 all.end() - static_cast<std::ptrdiff_t>(n_test));
  d.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_test + n_valid));
  return d;
}

}  // namespace ckrl
