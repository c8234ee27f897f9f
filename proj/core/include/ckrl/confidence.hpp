#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ckrl/knowledge_graph.hpp"
#include "ckrl/model.hpp"
#include "ckrl/paths.hpp"

namespace ckrl {

// Which confidences weight the margin loss. TransE uses C = 1 throughout.
enum class Variant { TransE, LT, LT_PP, LT_PP_AP };

Variant parse_variant(std::string_view s);
std::string_view to_string(Variant v);

struct ConfidenceWeights {
  double lt = 1.0;
  double pp = 0.0;
  double ap = 0.0;
};

// LT: (1, 0, 0). LT+PP: (0.9, 0.1, 0). LT+PP+AP: (1.5, 0.1, 0.4).
ConfidenceWeights default_weights(Variant v);

struct ConfidenceConfig {
  double alpha = 0.9;     // LT descend factor
  double beta = 0.0001;   // LT ascend step
  ConfidenceWeights weights;
  double epsilon = kDefaultEpsilon;
  double ap_guard = 1e-6;  // lower bound on the relation-path distance

  static ConfidenceConfig for_variant(Variant v);
  // alpha in (0, 1], beta >= 0, weights >= 0, ap_guard > 0.
  void validate() const;
};

// Q = -(margin + E(pos) - E(neg)).
double triple_quality(double energy_pos, double energy_neg, double margin);

// Local triple confidence per training triple, starting at 1.
class LocalConfidenceTable {
 public:
  LocalConfidenceTable() = default;
  explicit LocalConfidenceTable(std::span<const Triple> triples);

  std::size_t size() const { return values_.size(); }
  double at(std::size_t i) const { return values_[i]; }
  // Throws DataError for triples that are not in the table.
  double value(const Triple& t) const;
  std::size_t position(const Triple& t) const;

  // Q <= 0 scales by alpha, Q > 0 adds beta; the result stays in (0, 1].
  double update_at(std::size_t i, double quality, const ConfidenceConfig& cfg);

  std::span<const double> values() const { return values_; }
  // Restores values from a checkpoint; sizes must match.
  void assign(std::span<const double> values);
  double mean() const;

 private:
  std::vector<double> values_;
  std::unordered_map<Triple, std::size_t, TripleHash> position_;
};

double update_lt(LocalConfidenceTable& table, const Triple& t, double quality,
                 const ConfidenceConfig& cfg);

// Sum over paths of Q_PP(r, p) * R(h, p, t), with
// Q_PP = eps + (1 - eps) * co_count(r, p) / pair_count(p). Empty lists give 0.
double prior_path_confidence(const Triple& t, std::span<const PathIndexEntry> paths,
                             const PathStats& stats);

// Distance between a relation and a path under the model norm; reversed
// edges contribute the negated relation vector.
double relation_path_distance(const EmbeddingModel& model, RelationId r, const RelationPath& p);

// sigmoid(sum over paths of R / max(distance, ap_guard)); empty lists give 0.
double adaptive_path_confidence(const Triple& t, std::span<const PathIndexEntry> paths,
                                const EmbeddingModel& model, const ConfidenceConfig& cfg);

double combined_confidence(double lt, double pp, double ap, const ConfidenceConfig& cfg);

// Static PP values aligned with a path index.
class PriorPathCache {
 public:
  PriorPathCache() = default;
  PriorPathCache(const PathIndex& index, const PathStats& stats);

  double at(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

struct ConfidenceRow {
  Triple triple;
  double lt = 0;
  double pp = 0;
  double ap = 0;
  double combined = 0;
};

// "h<TAB>r<TAB>t<TAB>LT<TAB>PP<TAB>AP<TAB>C", names resolved via the vocabularies.
void write_confidences(const std::filesystem::path& path, std::span<const ConfidenceRow> rows,
                       const Vocabulary& entities, const Vocabulary& relations);

}  // namespace ckrl
