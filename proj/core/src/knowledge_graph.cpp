#include "ckrl/knowledge_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ckrl/error.hpp"
#include "ckrl/log.hpp"

namespace ckrl {

Vocabulary Vocabulary::numbered(std::size_t n, std::string_view prefix) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.intern(std::string(prefix) + std::to_string(i));
  return v;
}

std::uint32_t Vocabulary::intern(std::string_view name) {
  auto [it, inserted] = ids_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::uint32_t Vocabulary::id(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) throw DataError("unknown name '" + std::string(name) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view name) const { return ids_.contains(std::string(name)); }

void Vocabulary::dump(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < names_.size(); ++i) out << i << '\t' << names_[i] << '\n';
}

ColumnOrder parse_column_order(std::string_view s) {
  if (s == "hrt" || s == "HRT") return ColumnOrder::HRT;
  if (s == "htr" || s == "HTR") return ColumnOrder::HTR;
  throw UsageError("column order must be 'hrt' or 'htr', got '" + std::string(s) + "'");
}

TripleList load_triples(const std::filesystem::path& path, ColumnOrder order,
                        Vocabulary& entities, Vocabulary& relations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open triple file " + path.string());

  TripleList triples;
  std::string line;
  std::size_t line_no = 0;
  std::string_view fields[3];
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    std::size_t count = 0;
    while (true) {
      const auto tab = rest.find('\t');
      if (count < 3) fields[count] = rest.substr(0, tab);
      ++count;
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (count != 3)
      throw ParseError(path.string(), line_no,
                       "expected 3 tab-separated fields, found " + std::to_string(count));
    for (const auto& f : fields)
      if (f.empty()) throw ParseError(path.string(), line_no, "empty field");

    const std::string_view rel = order == ColumnOrder::HRT ? fields[1] : fields[2];
    const std::string_view tail = order == ColumnOrder::HRT ? fields[2] : fields[1];
    Triple t;
    t.head = entities.intern(fields[0]);
    t.relation = relations.intern(rel);
    t.tail = entities.intern(tail);
    triples.push_back(t);
  }
  if (triples.empty()) throw DataError("triple file " + path.string() + " is empty");
  return triples;
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   ColumnOrder order, const Vocabulary& entities, const Vocabulary& relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : triples) {
    const auto& h = entities.name(t.head);
    const auto& r = relations.name(t.relation);
    const auto& tl = entities.name(t.tail);
    if (order == ColumnOrder::HRT)
      out << h << '\t' << r << '\t' << tl << '\n';
    else
      out << h << '\t' << tl << '\t' << r << '\n';
  }
}

KnowledgeGraph KnowledgeGraph::build(std::size_t num_entities, std::size_t num_relations,
                                     TripleList train, std::span<const Triple> extra_known) {
  return build(Vocabulary::numbered(num_entities, "e"), Vocabulary::numbered(num_relations, "r"),
               std::move(train), extra_known);
}

KnowledgeGraph KnowledgeGraph::build(Vocabulary entities, Vocabulary relations, TripleList train,
                                     std::span<const Triple> extra_known) {
  KnowledgeGraph kg;
  kg.entities_ = std::move(entities);
  kg.relations_ = std::move(relations);
  const auto num_e = kg.entities_.size();
  const auto num_r = kg.relations_.size();

  auto check = [&](const Triple& t) {
    if (t.head >= num_e || t.tail >= num_e || t.relation >= num_r)
      throw DataError("triple id out of range");
  };

  kg.triples_.reserve(train.size());
  kg.known_.reserve(train.size() + extra_known.size());
  for (const auto& t : train) {
    check(t);
    if (kg.known_.insert(t).second)
      kg.triples_.push_back(t);
    else
      ++kg.duplicates_dropped_;
  }
  if (kg.duplicates_dropped_ > 0)
    log_warning("dropped " + std::to_string(kg.duplicates_dropped_) + " duplicate training triples");
  for (const auto& t : extra_known) {
    check(t);
    kg.known_.insert(t);
  }

  // CSR adjacency over the 2|R| edge space.
  std::vector<std::size_t> degree(num_e, 0);
  for (const auto& t : kg.triples_) {
    ++degree[t.head];
    ++degree[t.tail];
  }
  kg.offsets_.assign(num_e + 1, 0);
  for (std::size_t e = 0; e < num_e; ++e) kg.offsets_[e + 1] = kg.offsets_[e] + degree[e];
  std::vector<std::pair<EdgeId, EntityId>> edges(kg.offsets_[num_e]);
  std::vector<std::size_t> cursor(kg.offsets_.begin(), kg.offsets_.end() - 1);
  const auto r_count = static_cast<EdgeId>(num_r);
  for (const auto& t : kg.triples_) {
    edges[cursor[t.head]++] = {t.relation, t.tail};
    edges[cursor[t.tail]++] = {t.relation + r_count, t.head};
  }
  for (std::size_t e = 0; e < num_e; ++e)
    std::sort(edges.begin() + static_cast<std::ptrdiff_t>(kg.offsets_[e]),
              edges.begin() + static_cast<std::ptrdiff_t>(kg.offsets_[e + 1]));
  // Triples are unique, so (edge, target) pairs per entity are unique too.
  kg.edge_ids_.resize(edges.size());
  kg.targets_.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    kg.edge_ids_[i] = edges[i].first;
    kg.targets_[i] = edges[i].second;
  }

  kg.head_domain_.assign(num_r, {});
  kg.tail_domain_.assign(num_r, {});
  for (const auto& t : kg.triples_) {
    kg.head_domain_[t.relation].push_back(t.head);
    kg.tail_domain_[t.relation].push_back(t.tail);
  }
  for (auto* domains : {&kg.head_domain_, &kg.tail_domain_}) {
    for (auto& d : *domains) {
      std::sort(d.begin(), d.end());
      d.erase(std::unique(d.begin(), d.end()), d.end());
    }
  }
  return kg;
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId e, EdgeId edge) const {
  const auto ids = out_edge_ids(e);
  const auto lo = std::lower_bound(ids.begin(), ids.end(), edge);
  const auto hi = std::upper_bound(lo, ids.end(), edge);
  const auto base = offsets_[e];
  return {targets_.data() + base + static_cast<std::size_t>(lo - ids.begin()),
          static_cast<std::size_t>(hi - lo)};
}

KnowledgeGraph Dataset::index() const {
  TripleList extra;
  extra.reserve(valid.size() + test.size());
  extra.insert(extra.end(), valid.begin(), valid.end());
  extra.insert(extra.end(), test.begin(), test.end());
  return KnowledgeGraph::build(entities, relations, train, extra);
}

Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test, ColumnOrder order) {
  Dataset d;
  d.train = load_triples(train, order, d.entities, d.relations);
  if (!valid.empty()) d.valid = load_triples(valid, order, d.entities, d.relations);
  if (!test.empty()) d.test = load_triples(test, order, d.entities, d.relations);
  return d;
}

void check_ids(const KnowledgeGraph& kg, std::span<const Triple> triples, std::string_view what) {
  for (const auto& t : triples) {
    if (t.head >= kg.num_entities() || t.tail >= kg.num_entities() ||
        t.relation >= kg.num_relations())
      throw DataError(std::string(what) + ": triple id out of vocabulary range");
  }
}

}  // namespace ckrl
