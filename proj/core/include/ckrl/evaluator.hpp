#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckrl/knowledge_graph.hpp"
#include "ckrl/model.hpp"
#include "ckrl/noise.hpp"

namespace ckrl {

// ---------------------------------------------------------------------------
// Noise detection

struct PRPoint {
  std::size_t rank = 0;  // 1-based cut position in the ranked list
  double recall = 0;
  double precision = 0;
};

// Precision/recall sampled at every rank holding a true noise triple.
struct PRCurve {
  std::vector<PRPoint> points;
  double auc = 0;  // area under the step curve (average precision)
  std::size_t num_noise = 0;
  std::size_t num_triples = 0;

  // Precision at the first point whose recall reaches `recall`.
  double precision_at(double recall) const;
};

// Ranks triples by descending `scores` (ties keep input order) and sweeps the
// list. Throws DataError when no triple is labeled Noise.
PRCurve pr_curve(std::span<const double> scores, std::span<const LabeledTriple> labeled);

// Noise detection by energy: higher energy is ranked as more likely noise.
PRCurve detect_noise(const EmbeddingModel& model, std::span<const LabeledTriple> labeled);

// "rank,recall,precision".
void write_pr_curve(const std::filesystem::path& path, const PRCurve& curve);

// ---------------------------------------------------------------------------
// Entity prediction

struct QueryRank {
  std::size_t raw = 0;
  std::size_t filtered = 0;
};

struct RankingReport {
  double mean_rank_raw = 0;
  double mean_rank_filter = 0;
  double hits10_raw = 0;
  double hits10_filter = 0;
  std::size_t queries = 0;
  // Head query then tail query per test triple, when requested.
  std::vector<QueryRank> ranks;
};

struct RankingOptions {
  std::size_t threads = 1;
  bool keep_ranks = false;
};

// Ranks the true head and tail of each test triple against every entity by
// ascending energy. A candidate outranks the truth only with strictly lower
// energy. The filtered rank skips candidates that form triples known to `kg`.
RankingReport entity_prediction(const EmbeddingModel& model, std::span<const Triple> test,
                                const KnowledgeGraph& kg, const RankingOptions& options = {});

// Same protocol over relations (one query per test triple).
RankingReport relation_prediction(const EmbeddingModel& model, std::span<const Triple> test,
                                  const KnowledgeGraph& kg, const RankingOptions& options = {});

// ---------------------------------------------------------------------------
// Triple classification

struct ScoredLabel {
  double energy = 0;
  bool positive = false;
};

struct ThresholdFit {
  double threshold = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Best threshold for "positive iff energy < threshold" among -inf, midpoints
// between consecutive distinct energies, and +inf. Ties go to the smallest
// threshold.
ThresholdFit best_threshold(std::span<const ScoredLabel> examples);

struct ClassifierThresholds {
  std::map<RelationId, double> per_relation;
  double global_fallback = 0;
  // Validation examples classified correctly by their own relation threshold.
  std::size_t validation_correct = 0;
  std::size_t validation_total = 0;

  double threshold(RelationId r) const;
  double validation_accuracy() const;
};

ClassifierThresholds fit_thresholds(const EmbeddingModel& model,
                                    std::span<const LabeledTriple> valid);

// Accuracy of the rule energy < threshold(r) => positive.
double classify(const EmbeddingModel& model, const ClassifierThresholds& thresholds,
                std::span<const LabeledTriple> test);

// Flat JSON object of named metrics.
void write_report(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, double>>& metrics);

}  // namespace ckrl
