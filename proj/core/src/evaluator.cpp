#include "ckrl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "ckrl/error.hpp"
#include "ckrl/io.hpp"

namespace ckrl {

double PRCurve::precision_at(double recall) const {
  for (const auto& p : points)
    if (p.recall >= recall - 1e-12) return p.precision;
  return 0.0;
}

PRCurve pr_curve(std::span<const double> scores, std::span<const LabeledTriple> labeled) {
  if (scores.size() != labeled.size()) throw UsageError("scores and labels differ in length");
  PRCurve curve;
  curve.num_triples = labeled.size();
  curve.num_noise = static_cast<std::size_t>(std::count_if(
      labeled.begin(), labeled.end(), [](const auto& l) { return l.label == Label::Noise; }));
  if (curve.num_noise == 0) throw DataError("noise detection needs at least one noise triple");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double total = static_cast<double>(curve.num_noise);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labeled[order[k]].label != Label::Noise) continue;
    ++hits;
    const double precision = static_cast<double>(hits) / static_cast<double>(k + 1);
    curve.points.push_back({k + 1, static_cast<double>(hits) / total, precision});
    curve.auc += precision / total;
  }
  return curve;
}

PRCurve detect_noise(const EmbeddingModel& model, std::span<const LabeledTriple> labeled) {
  std::vector<double> scores(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) scores[i] = energy(model, labeled[i].triple);
  return pr_curve(scores, labeled);
}

void write_pr_curve(const std::filesystem::path& path, const PRCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "rank,recall,precision\n";
  for (const auto& p : curve.points)
    out << p.rank << ',' << format_double(p.recall) << ',' << format_double(p.precision) << '\n';
}

namespace {

// Runs fn(i) for i in [0, n) over `threads` workers with disjoint strides.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
}

// Energy of entity `e` offset by a fixed vector: ||e + offset|| or ||offset - e||.
double offset_energy(const EmbeddingModel& model, std::span<const double> e,
                     std::span<const double> offset, bool subtract) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double d = subtract ? offset[i] - e[i] : e[i] + offset[i];
    s += model.norm() == Norm::L1 ? std::fabs(d) : d * d;
  }
  return model.norm() == Norm::L1 ? s : std::sqrt(s);
}

QueryRank rank_entity(const EmbeddingModel& model, const KnowledgeGraph& kg, const Triple& t,
                      bool replace_head, std::vector<double>& offset) {
  const std::size_t d = model.dim();
  offset.resize(d);
  const auto h = model.entity(t.head);
  const auto r = model.relation(t.relation);
  const auto tl = model.entity(t.tail);
  // Head query scores ||c + (r - t)||; tail query scores ||(h + r) - c||.
  for (std::size_t i = 0; i < d; ++i) offset[i] = replace_head ? r[i] - tl[i] : h[i] + r[i];
  const EntityId truth = replace_head ? t.head : t.tail;
  const double target = offset_energy(model, model.entity(truth), offset, !replace_head);

  QueryRank rank{1, 1};
  for (EntityId c = 0; c < model.num_entities(); ++c) {
    if (c == truth) continue;
    if (offset_energy(model, model.entity(c), offset, !replace_head) >= target) continue;
    ++rank.raw;
    Triple corrupted = t;
    (replace_head ? corrupted.head : corrupted.tail) = c;
    if (!kg.contains(corrupted)) ++rank.filtered;
  }
  return rank;
}

RankingReport summarize(std::vector<QueryRank> ranks, bool keep) {
  RankingReport report;
  report.queries = ranks.size();
  if (ranks.empty()) return report;
  double raw = 0, filtered = 0, hits_raw = 0, hits_filtered = 0;
  for (const auto& q : ranks) {
    raw += static_cast<double>(q.raw);
    filtered += static_cast<double>(q.filtered);
    hits_raw += q.raw <= 10 ? 1.0 : 0.0;
    hits_filtered += q.filtered <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  report.mean_rank_raw = raw / n;
  report.mean_rank_filter = filtered / n;
  report.hits10_raw = hits_raw / n;
  report.hits10_filter = hits_filtered / n;
  if (keep) report.ranks = std::move(ranks);
  return report;
}

void check_model(const EmbeddingModel& model, const KnowledgeGraph& kg,
                 std::span<const Triple> test) {
  if (model.num_entities() != kg.num_entities() || model.num_relations() != kg.num_relations())
    throw DataError("model vocabulary does not match the knowledge graph");
  check_ids(kg, test, "test set");
}

}  // namespace

RankingReport entity_prediction(const EmbeddingModel& model, std::span<const Triple> test,
                                const KnowledgeGraph& kg, const RankingOptions& options) {
  check_model(model, kg, test);
  std::vector<QueryRank> ranks(2 * test.size());
  parallel_for(test.size(), options.threads, [&](std::size_t i) {
    thread_local std::vector<double> offset;
    ranks[2 * i] = rank_entity(model, kg, test[i], true, offset);
    ranks[2 * i + 1] = rank_entity(model, kg, test[i], false, offset);
  });
  return summarize(std::move(ranks), options.keep_ranks);
}

RankingReport relation_prediction(const EmbeddingModel& model, std::span<const Triple> test,
                                  const KnowledgeGraph& kg, const RankingOptions& options) {
  check_model(model, kg, test);
  std::vector<QueryRank> ranks(test.size());
  parallel_for(test.size(), options.threads, [&](std::size_t i) {
    const Triple& t = test[i];
    const double target = energy(model, t);
    QueryRank q{1, 1};
    for (RelationId r = 0; r < model.num_relations(); ++r) {
      if (r == t.relation) continue;
      const Triple c{t.head, r, t.tail};
      if (energy(model, c) >= target) continue;
      ++q.raw;
      if (!kg.contains(c)) ++q.filtered;
    }
    ranks[i] = q;
  });
  return summarize(std::move(ranks), options.keep_ranks);
}

ThresholdFit best_threshold(std::span<const ScoredLabel> examples) {
  const std::size_t n = examples.size();
  std::vector<ScoredLabel> sorted(examples.begin(), examples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.energy < b.energy; });

  // Threshold -inf classifies everything negative.
  const auto negatives = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](const auto& x) { return !x.positive; }));
  std::ptrdiff_t correct = static_cast<std::ptrdiff_t>(negatives);
  ThresholdFit best{-std::numeric_limits<double>::infinity(), negatives, n};

  for (std::size_t i = 0; i < n;) {
    const double value = sorted[i].energy;
    std::size_t j = i;
    for (; j < n && sorted[j].energy == value; ++j) correct += sorted[j].positive ? 1 : -1;
    double threshold = std::numeric_limits<double>::infinity();
    if (j < n) {
      const double next = sorted[j].energy;
      threshold = value + (next - value) / 2.0;
      if (!(threshold > value)) threshold = next;
    }
    if (static_cast<std::size_t>(correct) > best.correct)
      best = {threshold, static_cast<std::size_t>(correct), n};
    i = j;
  }
  return best;
}

double ClassifierThresholds::threshold(RelationId r) const {
  auto it = per_relation.find(r);
  return it == per_relation.end() ? global_fallback : it->second;
}

double ClassifierThresholds::validation_accuracy() const {
  return validation_total == 0 ? 0.0
                               : static_cast<double>(validation_correct) /
                                     static_cast<double>(validation_total);
}

ClassifierThresholds fit_thresholds(const EmbeddingModel& model,
                                    std::span<const LabeledTriple> valid) {
  if (valid.empty()) throw DataError("threshold fitting needs a non-empty validation set");
  std::map<RelationId, std::vector<ScoredLabel>> groups;
  std::vector<ScoredLabel> pooled;
  pooled.reserve(valid.size());
  for (const auto& lt : valid) {
    const ScoredLabel x{energy(model, lt.triple), lt.label == Label::Positive};
    groups[lt.triple.relation].push_back(x);
    pooled.push_back(x);
  }

  ClassifierThresholds out;
  for (const auto& [r, examples] : groups) {
    const auto f = best_threshold(examples);
    out.per_relation[r] = f.threshold;
    out.validation_correct += f.correct;
    out.validation_total += f.total;
  }
  out.global_fallback = best_threshold(pooled).threshold;
  return out;
}

double classify(const EmbeddingModel& model, const ClassifierThresholds& thresholds,
                std::span<const LabeledTriple> test) {
  if (test.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& lt : test) {
    const bool predicted_positive = energy(model, lt.triple) < thresholds.threshold(lt.triple.relation);
    correct += predicted_positive == (lt.label == Label::Positive) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void write_report(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, double>>& metrics) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ckrl
