#include "ckrl/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ckrl/error.hpp"
#include "ckrl/io.hpp"

namespace ckrl {

Variant parse_variant(std::string_view s) {
  if (s == "transe") return Variant::TransE;
  if (s == "lt") return Variant::LT;
  if (s == "lt+pp") return Variant::LT_PP;
  if (s == "lt+pp+ap") return Variant::LT_PP_AP;
  throw UsageError("variant must be one of transe, lt, lt+pp, lt+pp+ap; got '" + std::string(s) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::TransE: return "transe";
    case Variant::LT: return "lt";
    case Variant::LT_PP: return "lt+pp";
    case Variant::LT_PP_AP: return "lt+pp+ap";
  }
  return "?";
}

ConfidenceWeights default_weights(Variant v) {
  switch (v) {
    case Variant::TransE:
    case Variant::LT: return {1.0, 0.0, 0.0};
    case Variant::LT_PP: return {0.9, 0.1, 0.0};
    case Variant::LT_PP_AP: return {1.5, 0.1, 0.4};
  }
  return {};
}

ConfidenceConfig ConfidenceConfig::for_variant(Variant v) {
  ConfidenceConfig cfg;
  cfg.weights = default_weights(v);
  return cfg;
}

void ConfidenceConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in (0, 1]");
  if (!(beta >= 0.0)) throw UsageError("beta must be >= 0");
  if (!(weights.lt >= 0.0 && weights.pp >= 0.0 && weights.ap >= 0.0))
    throw UsageError("confidence weights must be >= 0");
  if (weights.lt + weights.pp + weights.ap <= 0.0)
    throw UsageError("at least one confidence weight must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  if (!(ap_guard > 0.0)) throw UsageError("ap_guard must be > 0");
}

double triple_quality(double energy_pos, double energy_neg, double margin) {
  return -(margin + energy_pos - energy_neg);
}

LocalConfidenceTable::LocalConfidenceTable(std::span<const Triple> triples)
    : values_(triples.size(), 1.0) {
  position_.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) position_.emplace(triples[i], i);
}

std::size_t LocalConfidenceTable::position(const Triple& t) const {
  auto it = position_.find(t);
  if (it == position_.end()) throw DataError("triple is not a training triple");
  return it->second;
}

double LocalConfidenceTable::value(const Triple& t) const { return values_[position(t)]; }

double LocalConfidenceTable::update_at(std::size_t i, double quality, const ConfidenceConfig& cfg) {
  double& v = values_[i];
  if (quality <= 0.0)
    v = std::max(cfg.alpha * v, std::numeric_limits<double>::min());
  else
    v = std::min(v + cfg.beta, 1.0);
  return v;
}

void LocalConfidenceTable::assign(std::span<const double> values) {
  if (values.size() != values_.size())
    throw DataError("local confidence table size mismatch: expected " +
                    std::to_string(values_.size()) + ", got " + std::to_string(values.size()));
  for (double v : values)
    if (!(v > 0.0 && v <= 1.0)) throw DataError("local confidence value outside (0, 1]");
  std::copy(values.begin(), values.end(), values_.begin());
}

double LocalConfidenceTable::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double update_lt(LocalConfidenceTable& table, const Triple& t, double quality,
                 const ConfidenceConfig& cfg) {
  return table.update_at(table.position(t), quality, cfg);
}

double prior_path_confidence(const Triple& t, std::span<const PathIndexEntry> paths,
                             const PathStats& stats) {
  double sum = 0.0;
  for (const auto& entry : paths) {
    const auto pairs = stats.pairs(entry.path);
    if (pairs == 0)
      throw DataError("path " + format_path(entry.path) +
                      " has no prior count; path statistics and index were built from different data");
    const double ratio = static_cast<double>(stats.co(t.relation, entry.path)) / static_cast<double>(pairs);
    const double quality = stats.epsilon + (1.0 - stats.epsilon) * ratio;
    sum += quality * entry.reliability;
  }
  return sum;
}

double relation_path_distance(const EmbeddingModel& model, RelationId r, const RelationPath& p) {
  const auto num_r = static_cast<EdgeId>(model.num_relations());
  const auto rel = model.relation(r);
  double s = 0.0;
  for (std::size_t i = 0; i < model.dim(); ++i) {
    double d = rel[i];
    for (const EdgeId e : p.steps())
      d -= e < num_r ? model.relation(e)[i] : -model.relation(e - num_r)[i];
    s += model.norm() == Norm::L1 ? std::fabs(d) : d * d;
  }
  return model.norm() == Norm::L1 ? s : std::sqrt(s);
}

double adaptive_path_confidence(const Triple& t, std::span<const PathIndexEntry> paths,
                                const EmbeddingModel& model, const ConfidenceConfig& cfg) {
  if (paths.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& entry : paths)
    sum += entry.reliability / std::max(relation_path_distance(model, t.relation, entry.path), cfg.ap_guard);
  return 1.0 / (1.0 + std::exp(-sum));
}

double combined_confidence(double lt, double pp, double ap, const ConfidenceConfig& cfg) {
  return cfg.weights.lt * lt + cfg.weights.pp * pp + cfg.weights.ap * ap;
}

PriorPathCache::PriorPathCache(const PathIndex& index, const PathStats& stats)
    : values_(index.size()) {
  for (std::size_t i = 0; i < index.size(); ++i)
    values_[i] = prior_path_confidence(index.triple(i), index.entries(i), stats);
}

void write_confidences(const std::filesystem::path& path, std::span<const ConfidenceRow> rows,
                       const Vocabulary& entities, const Vocabulary& relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& row : rows) {
    out << entities.name(row.triple.head) << '\t' << relations.name(row.triple.relation) << '\t'
        << entities.name(row.triple.tail) << '\t' << format_double(row.lt) << '\t'
        << format_double(row.pp) << '\t' << format_double(row.ap) << '\t'
        << format_double(row.combined) << '\n';
  }
}

}  // namespace ckrl
