#include "ckrl/paths.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "ckrl/error.hpp"
#include "ckrl/io.hpp"

namespace ckrl {

std::string format_path(const RelationPath& p) {
  std::string s = std::to_string(p.edges[0]);
  if (p.length == 2) s += "," + std::to_string(p.edges[1]);
  return s;
}

RelationPath parse_path(std::string_view s) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) return RelationPath::of(static_cast<EdgeId>(parse_uint(s)));
  const auto b = s.substr(comma + 1);
  if (b.find(',') != std::string_view::npos) throw DataError("paths longer than 2 steps: " + std::string(s));
  return RelationPath::of(static_cast<EdgeId>(parse_uint(s.substr(0, comma))),
                          static_cast<EdgeId>(parse_uint(b)));
}

std::vector<RelationPath> enumerate_paths(const KnowledgeGraph& kg, EntityId head, EntityId tail,
                                          std::optional<EdgeId> excluded, std::size_t max_fanout) {
  std::vector<RelationPath> paths;
  const auto h_edges = kg.out_edge_ids(head);
  const auto h_targets = kg.out_targets(head);

  // Tail-side join table: (middle entity, edge from middle to tail). An edge
  // middle -e2-> tail is the reverse of tail -rev(e2)-> middle.
  std::vector<std::pair<EntityId, EdgeId>> into_tail;
  {
    const auto t_edges = kg.out_edge_ids(tail);
    const auto t_targets = kg.out_targets(tail);
    std::size_t run = 0;
    for (std::size_t i = 0; i < t_edges.size(); ++i) {
      run = (i > 0 && t_edges[i] == t_edges[i - 1]) ? run + 1 : 0;
      if (run >= max_fanout) continue;
      into_tail.emplace_back(t_targets[i], kg.reverse_edge(t_edges[i]));
    }
    std::sort(into_tail.begin(), into_tail.end());
  }

  std::size_t run = 0;
  for (std::size_t i = 0; i < h_edges.size(); ++i) {
    const EdgeId e1 = h_edges[i];
    const EntityId middle = h_targets[i];
    if (middle == tail && e1 != excluded) paths.push_back(RelationPath::of(e1));
    run = (i > 0 && e1 == h_edges[i - 1]) ? run + 1 : 0;
    if (run >= max_fanout) continue;
    auto it = std::lower_bound(into_tail.begin(), into_tail.end(), std::make_pair(middle, EdgeId{0}));
    for (; it != into_tail.end() && it->first == middle; ++it)
      paths.push_back(RelationPath::of(e1, it->second));
  }
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  return paths;
}

std::vector<ResourceLayer> pcra_flow(const KnowledgeGraph& kg, EntityId head,
                                     const RelationPath& path) {
  std::vector<ResourceLayer> layers;
  ResourceLayer current{{head, 1.0}};
  for (const EdgeId edge : path.steps()) {
    std::map<EntityId, double> next;
    for (const auto& [entity, resource] : current) {
      const auto successors = kg.neighbors(entity, edge);
      if (successors.empty()) continue;
      const double share = resource / static_cast<double>(successors.size());
      for (const EntityId s : successors) next[s] += share;
    }
    current.assign(next.begin(), next.end());
    layers.push_back(current);
  }
  return layers;
}

double pcra_reliability(const KnowledgeGraph& kg, EntityId head, const RelationPath& path,
                        EntityId tail) {
  if (path.length == 0) return 0.0;
  const auto layers = pcra_flow(kg, head, path);
  const auto& last = layers.back();
  auto it = std::lower_bound(last.begin(), last.end(), std::make_pair(tail, 0.0),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  return (it != last.end() && it->first == tail) ? it->second : 0.0;
}

PathIndex::PathIndex(std::vector<Triple> triples)
    : triples_(std::move(triples)), entries_(triples_.size()) {
  position_.reserve(triples_.size());
  for (std::size_t i = 0; i < triples_.size(); ++i) position_.emplace(triples_[i], i);
}

std::optional<std::size_t> PathIndex::position(const Triple& t) const {
  auto it = position_.find(t);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

std::size_t PathIndex::total_entries() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.size();
  return n;
}

bool operator==(const PathIndex& a, const PathIndex& b) {
  if (a.triples_ != b.triples_) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.size() != y.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j].path != y[j].path || x[j].reliability != y[j].reliability) return false;
  }
  return true;
}

PathIndex build_path_index(const KnowledgeGraph& kg, std::span<const Triple> train,
                           const PathOptions& options) {
  PathIndex index(std::vector<Triple>(train.begin(), train.end()));
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < train.size(); i += stride) {
      const auto& t = train[i];
      auto& entries = index.mutable_entries(i);
      for (const auto& p : enumerate_paths(kg, t.head, t.tail, t.relation, options.max_fanout)) {
        const double r = pcra_reliability(kg, t.head, p, t.tail);
        if (r > 0.0) entries.push_back({p, r});
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    // Each worker owns a disjoint stride of positions, so the result does not
    // depend on scheduling.
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
  }
  return index;
}

std::uint64_t PathStats::pairs(const RelationPath& p) const {
  auto it = pair_count.find(p);
  return it == pair_count.end() ? 0 : it->second;
}

std::uint64_t PathStats::co(RelationId r, const RelationPath& p) const {
  auto it = co_count.find({r, p});
  return it == co_count.end() ? 0 : it->second;
}

namespace {

struct PairPath {
  EntityId head;
  EntityId tail;
  RelationPath path;
  friend bool operator==(const PairPath&, const PairPath&) = default;
};

struct PairPathHash {
  std::size_t operator()(const PairPath& k) const noexcept {
    return TripleHash{}({k.head, 0, k.tail}) * 31 + RelationPathHash{}(k.path);
  }
};

template <typename PathsOf>
PathStats count_stats(std::span<const Triple> train, double epsilon, PathsOf&& paths_of) {
  PathStats stats;
  stats.epsilon = epsilon;
  std::unordered_set<PairPath, PairPathHash> seen;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& t = train[i];
    for (const RelationPath& p : paths_of(i)) {
      ++stats.co_count[{t.relation, p}];
      if (seen.insert({t.head, t.tail, p}).second) ++stats.pair_count[p];
    }
  }
  return stats;
}

}  // namespace

PathStats build_path_stats(const KnowledgeGraph& kg, std::span<const Triple> train,
                           double epsilon, const PathOptions& options) {
  return count_stats(train, epsilon, [&](std::size_t i) {
    const auto& t = train[i];
    return enumerate_paths(kg, t.head, t.tail, t.relation, options.max_fanout);
  });
}

PathStats build_path_stats(const PathIndex& index, double epsilon) {
  std::vector<Triple> triples(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) triples[i] = index.triple(i);
  return count_stats(triples, epsilon, [&](std::size_t i) {
    std::vector<RelationPath> paths;
    for (const auto& e : index.entries(i)) paths.push_back(e.path);
    return paths;
  });
}

namespace {

constexpr std::string_view kIndexMagic = "#ckrl-path-index";
constexpr std::string_view kStatsMagic = "#ckrl-path-stats";
constexpr std::string_view kCacheVersion = "v1";

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> f;
  for (auto tab = line.find('\t'); tab != std::string_view::npos; tab = line.find('\t')) {
    f.push_back(line.substr(0, tab));
    line.remove_prefix(tab + 1);
  }
  f.push_back(line);
  return f;
}

std::string header_line(std::string_view magic, const CacheInfo& info, std::string_view extra) {
  std::ostringstream h;
  h << magic << '\t' << kCacheVersion << "\tsource=" << to_hex(info.source_digest)
    << "\tmax_fanout=" << info.max_fanout << "\tentities=" << info.num_entities
    << "\trelations=" << info.num_relations << "\ttriples=" << info.num_triples;
  if (!extra.empty()) h << '\t' << extra;
  return h.str();
}

[[noreturn]] void corrupted(const std::filesystem::path& file, std::string_view why) {
  throw DataError("path cache " + file.string() + " is corrupted (" + std::string(why) +
                  "); delete it and regenerate with `ckrl precompute-paths`");
}

// Parses the header; returns key=value fields beyond the fixed ones.
std::map<std::string, std::string> parse_header(const std::filesystem::path& file,
                                                std::string_view magic, std::string_view line,
                                                CacheInfo& info) {
  const auto f = split_tabs(line);
  if (f.size() < 2 || f[0] != magic) corrupted(file, "bad magic");
  if (f[1] != kCacheVersion) corrupted(file, "unsupported version " + std::string(f[1]));
  std::map<std::string, std::string> kv;
  for (std::size_t i = 2; i < f.size(); ++i) {
    const auto eq = f[i].find('=');
    if (eq == std::string_view::npos) corrupted(file, "malformed header field");
    kv.emplace(std::string(f[i].substr(0, eq)), std::string(f[i].substr(eq + 1)));
  }
  try {
    info.source_digest = std::stoull(kv.at("source"), nullptr, 16);
    info.max_fanout = parse_uint(kv.at("max_fanout"));
    info.num_entities = parse_uint(kv.at("entities"));
    info.num_relations = parse_uint(kv.at("relations"));
    info.num_triples = parse_uint(kv.at("triples"));
  } catch (const std::exception&) {
    corrupted(file, "missing or invalid header field");
  }
  return kv;
}

}  // namespace

void save_path_index(const std::filesystem::path& file, const PathIndex& index,
                     const CacheInfo& info) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << header_line(kIndexMagic, info, "") << '\n';
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& t = index.triple(i);
    for (const auto& e : index.entries(i))
      out << t.head << '\t' << t.relation << '\t' << t.tail << '\t' << format_path(e.path) << '\t'
          << format_double(e.reliability) << '\n';
  }
}

CacheInfo read_path_index_info(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open path cache " + file.string());
  std::string line;
  if (!std::getline(in, line)) corrupted(file, "empty file");
  CacheInfo info;
  parse_header(file, kIndexMagic, line, info);
  return info;
}

PathIndex load_path_index(const std::filesystem::path& file, std::span<const Triple> train,
                          CacheInfo* info_out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open path cache " + file.string());
  std::string line;
  if (!std::getline(in, line)) corrupted(file, "empty file");
  CacheInfo info;
  parse_header(file, kIndexMagic, line, info);
  if (info.num_triples != train.size())
    throw DataError("path cache " + file.string() + " was built for " +
                    std::to_string(info.num_triples) + " training triples, got " +
                    std::to_string(train.size()) + "; rerun `ckrl precompute-paths`");

  PathIndex index(std::vector<Triple>(train.begin(), train.end()));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) throw ParseError(file.string(), line_no, "expected 5 fields");
    try {
      const Triple t{static_cast<EntityId>(parse_uint(f[0])), static_cast<RelationId>(parse_uint(f[1])),
                     static_cast<EntityId>(parse_uint(f[2]))};
      const auto pos = index.position(t);
      if (!pos) throw DataError("triple not in training set");
      index.mutable_entries(*pos).push_back({parse_path(f[3]), parse_double(f[4])});
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(file.string(), line_no, e.what());
    }
  }
  if (info_out) *info_out = info;
  return index;
}

void save_path_stats(const std::filesystem::path& file, const PathStats& stats,
                     const CacheInfo& info) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << header_line(kStatsMagic, info, "epsilon=" + format_double(stats.epsilon)) << '\n';
  for (const auto& [p, n] : stats.pair_count) out << "P\t" << format_path(p) << '\t' << n << '\n';
  for (const auto& [key, n] : stats.co_count)
    out << "C\t" << key.first << '\t' << format_path(key.second) << '\t' << n << '\n';
}

PathStats load_path_stats(const std::filesystem::path& file, CacheInfo* info_out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open path cache " + file.string());
  std::string line;
  if (!std::getline(in, line)) corrupted(file, "empty file");
  CacheInfo info;
  const auto kv = parse_header(file, kStatsMagic, line, info);
  PathStats stats;
  try {
    stats.epsilon = parse_double(kv.at("epsilon"));
  } catch (const std::exception&) {
    corrupted(file, "missing epsilon");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    try {
      if (f[0] == "P" && f.size() == 3)
        stats.pair_count[parse_path(f[1])] = parse_uint(f[2]);
      else if (f[0] == "C" && f.size() == 4)
        stats.co_count[{static_cast<RelationId>(parse_uint(f[1])), parse_path(f[2])}] = parse_uint(f[3]);
      else
        throw DataError("unknown record");
    } catch (const DataError& e) {
      throw ParseError(file.string(), line_no, e.what());
    }
  }
  if (info_out) *info_out = info;
  return stats;
}

}  // namespace ckrl
