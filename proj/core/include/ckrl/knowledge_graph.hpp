#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ckrl {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
// Edge ids live in [0, 2|R|): id r is relation r traversed forward,
// id r + |R| is relation r traversed from tail to head.
using EdgeId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    x ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
    x ^= x >> 29;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 32;
    return static_cast<std::size_t>(x);
  }
};

using TripleList = std::vector<Triple>;

// Bidirectional string <-> dense id map. Ids are assigned contiguously from 0
// in order of first appearance.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Vocabulary of `n` synthetic names "<prefix><i>".
  static Vocabulary numbered(std::size_t n, std::string_view prefix);

  std::uint32_t intern(std::string_view name);
  // Throws DataError for unknown names.
  std::uint32_t id(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

  // "id<TAB>name" per line.
  void dump(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Column layout of a triple file. FB15K ships head<TAB>tail<TAB>relation.
enum class ColumnOrder { HRT, HTR };

ColumnOrder parse_column_order(std::string_view s);

// Reads one tab-separated triple per line, interning names into the given
// vocabularies. Returns triples in file order. Throws ParseError on a line
// with other than three fields, DataError on an empty or unreadable file.
TripleList load_triples(const std::filesystem::path& path, ColumnOrder order,
                        Vocabulary& entities, Vocabulary& relations);

// Writes triples back in the given column order using vocabulary names.
void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   ColumnOrder order, const Vocabulary& entities, const Vocabulary& relations);

// Immutable indexed triple store.
//
// `triples()` is the training set T (deduplicated, first-occurrence order);
// adjacency and head/tail domains are built from T only. The membership set
// used by `contains` covers T plus any extra known triples (valid/test), so
// negative sampling and filtered ranking see every known fact.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  static KnowledgeGraph build(Vocabulary entities, Vocabulary relations, TripleList train,
                              std::span<const Triple> extra_known = {});
  // Same, with numbered vocabularies.
  static KnowledgeGraph build(std::size_t num_entities, std::size_t num_relations,
                              TripleList train, std::span<const Triple> extra_known = {});

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_edges() const { return 2 * relations_.size(); }
  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }

  const TripleList& triples() const { return triples_; }
  // Number of duplicate training triples dropped during build.
  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

  bool contains(const Triple& t) const { return known_.contains(t); }
  std::size_t num_known() const { return known_.size(); }

  EdgeId reverse_edge(EdgeId e) const {
    const auto r = static_cast<EdgeId>(relations_.size());
    return e < r ? e + r : e - r;
  }

  // Sorted, deduplicated successors of `e` along edge id `edge`.
  std::span<const EntityId> neighbors(EntityId e, EdgeId edge) const;

  // All outgoing (edge, target) pairs of `e` as two parallel spans, sorted by
  // edge id then target.
  std::span<const EdgeId> out_edge_ids(EntityId e) const {
    return {edge_ids_.data() + offsets_[e], edge_ids_.data() + offsets_[e + 1]};
  }
  std::span<const EntityId> out_targets(EntityId e) const {
    return {targets_.data() + offsets_[e], targets_.data() + offsets_[e + 1]};
  }

  std::span<const EntityId> head_domain(RelationId r) const { return head_domain_[r]; }
  std::span<const EntityId> tail_domain(RelationId r) const { return tail_domain_[r]; }

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  TripleList triples_;
  std::size_t duplicates_dropped_ = 0;
  std::unordered_set<Triple, TripleHash> known_;
  std::vector<std::size_t> offsets_;
  std::vector<EdgeId> edge_ids_;
  std::vector<EntityId> targets_;
  std::vector<std::vector<EntityId>> head_domain_;
  std::vector<std::vector<EntityId>> tail_domain_;
};

// Train/valid/test splits sharing one vocabulary. Splits are loaded in the
// order train, valid, test so ids are stable across runs.
struct Dataset {
  Vocabulary entities;
  Vocabulary relations;
  TripleList train;
  TripleList valid;
  TripleList test;

  // Indexes `train`, with valid and test added to the membership set.
  KnowledgeGraph index() const;
};

// Empty `valid`/`test` paths leave those splits empty.
Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test, ColumnOrder order);

// Checks every id in `triples` against the graph's vocabulary sizes.
void check_ids(const KnowledgeGraph& kg, std::span<const Triple> triples, std::string_view what);

}  // namespace ckrl
