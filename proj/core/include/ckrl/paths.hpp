#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ckrl/knowledge_graph.hpp"

namespace ckrl {

// Relation path of one or two steps over the edge-id space (reversed
// relations included).
struct RelationPath {
  std::array<EdgeId, 2> edges{};
  std::uint8_t length = 0;

  static RelationPath of(EdgeId a) { return {{a, 0}, 1}; }
  static RelationPath of(EdgeId a, EdgeId b) { return {{a, b}, 2}; }

  std::span<const EdgeId> steps() const { return {edges.data(), length}; }

  friend auto operator<=>(const RelationPath&, const RelationPath&) = default;
};

struct RelationPathHash {
  std::size_t operator()(const RelationPath& p) const noexcept {
    std::uint64_t x = (static_cast<std::uint64_t>(p.edges[0]) << 32) ^ p.edges[1];
    x = (x ^ p.length) * 0x9E3779B97F4A7C15ULL;
    return static_cast<std::size_t>(x ^ (x >> 31));
  }
};

// "e1" or "e1,e2".
std::string format_path(const RelationPath& p);
RelationPath parse_path(std::string_view s);

struct PathIndexEntry {
  RelationPath path;
  double reliability = 0.0;  // PCRA resource reaching the tail, in (0, 1]
};

inline constexpr std::size_t kDefaultMaxFanout = 200;

struct PathOptions {
  // Only the first `max_fanout` sorted neighbors of each (entity, edge) are
  // expanded during enumeration. Reliabilities always use full adjacency.
  std::size_t max_fanout = kDefaultMaxFanout;
  std::size_t threads = 1;
};

// All paths of length <= 2 from `head` to `tail`, sorted. `excluded` drops
// the single-step path over that edge (a triple's own relation).
std::vector<RelationPath> enumerate_paths(const KnowledgeGraph& kg, EntityId head, EntityId tail,
                                          std::optional<EdgeId> excluded = std::nullopt,
                                          std::size_t max_fanout = kDefaultMaxFanout);

// Resource distribution after each step of `path`, starting from a unit
// resource at `head`. Element i holds (entity, resource) pairs sorted by
// entity for step i + 1. Entities without a successor along the next edge
// drop their resource.
using ResourceLayer = std::vector<std::pair<EntityId, double>>;
std::vector<ResourceLayer> pcra_flow(const KnowledgeGraph& kg, EntityId head,
                                     const RelationPath& path);

// Resource arriving at `tail`; 0 when the path does not connect the pair.
double pcra_reliability(const KnowledgeGraph& kg, EntityId head, const RelationPath& path,
                        EntityId tail);

// Per-training-triple path sets with reliabilities, aligned with the triple
// order it was built from.
class PathIndex {
 public:
  PathIndex() = default;
  explicit PathIndex(std::vector<Triple> triples);

  std::size_t size() const { return triples_.size(); }
  const Triple& triple(std::size_t i) const { return triples_[i]; }
  std::span<const PathIndexEntry> entries(std::size_t i) const { return entries_[i]; }
  std::vector<PathIndexEntry>& mutable_entries(std::size_t i) { return entries_[i]; }
  // Position of `t` in the index, if present.
  std::optional<std::size_t> position(const Triple& t) const;
  std::size_t total_entries() const;

  friend bool operator==(const PathIndex& a, const PathIndex& b);

 private:
  std::vector<Triple> triples_;
  std::vector<std::vector<PathIndexEntry>> entries_;
  std::unordered_map<Triple, std::size_t, TripleHash> position_;
};

PathIndex build_path_index(const KnowledgeGraph& kg, std::span<const Triple> train,
                           const PathOptions& options = {});

// Prior relation-path co-occurrence counts. The population is the set of
// training triples: pair_count[p] counts distinct (head, tail) pairs of
// training triples whose path set contains p, co_count[(r, p)] counts
// training triples of relation r whose path set contains p.
struct PathStats {
  std::map<RelationPath, std::uint64_t> pair_count;
  std::map<std::pair<RelationId, RelationPath>, std::uint64_t> co_count;
  double epsilon = 0.01;

  std::uint64_t pairs(const RelationPath& p) const;
  std::uint64_t co(RelationId r, const RelationPath& p) const;

  friend bool operator==(const PathStats&, const PathStats&) = default;
};

inline constexpr double kDefaultEpsilon = 0.01;

PathStats build_path_stats(const KnowledgeGraph& kg, std::span<const Triple> train,
                           double epsilon = kDefaultEpsilon, const PathOptions& options = {});
// Same counts, read off an index built from the same training triples.
PathStats build_path_stats(const PathIndex& index, double epsilon = kDefaultEpsilon);

// Cache files carry a versioned header with the fingerprint of the inputs
// they were computed from.
struct CacheInfo {
  std::uint64_t source_digest = 0;
  std::size_t max_fanout = kDefaultMaxFanout;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t num_triples = 0;

  friend bool operator==(const CacheInfo&, const CacheInfo&) = default;
};

void save_path_index(const std::filesystem::path& file, const PathIndex& index,
                     const CacheInfo& info);
// Rebuilds the index for `train` from a cache file. Throws DataError if the
// header is missing, corrupted or does not match `train`.
PathIndex load_path_index(const std::filesystem::path& file, std::span<const Triple> train,
                          CacheInfo* info = nullptr);
CacheInfo read_path_index_info(const std::filesystem::path& file);

void save_path_stats(const std::filesystem::path& file, const PathStats& stats,
                     const CacheInfo& info);
PathStats load_path_stats(const std::filesystem::path& file, CacheInfo* info = nullptr);

}  // namespace ckrl
