#include <cmath>

#include <gtest/gtest.h>

#include "ckrl/confidence.hpp"
#include "ckrl/error.hpp"
#include "ckrl/trainer.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

namespace ckrl {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(TripleQuality, Examples) {
  EXPECT_EQ(triple_quality(0.0, 1.0, 1.0), 0.0);
  EXPECT_EQ(triple_quality(0.5, 2.0, 1.0), 0.5);
  EXPECT_EQ(triple_quality(2.0, 0.5, 1.0), -2.5);
}

TEST(UpdateLt, ViolationScalesByAlpha) {
  const TripleList triples{{0, 0, 1}};
  LocalConfidenceTable table(triples);
  ConfidenceConfig cfg;
  EXPECT_EQ(update_lt(table, triples[0], -0.3, cfg), 0.9);
  EXPECT_EQ(table.value(triples[0]), 0.9);
}

TEST(UpdateLt, SatisfiedTripleGainsBeta) {
  const TripleList triples{{0, 0, 1}};
  LocalConfidenceTable table(triples);
  table.assign(std::vector<double>{0.5});
  ConfidenceConfig cfg;
  EXPECT_DOUBLE_EQ(update_lt(table, triples[0], 0.2, cfg), 0.5001);
}

TEST(UpdateLt, ClampsAtOne) {
  const TripleList triples{{0, 0, 1}};
  LocalConfidenceTable table(triples);
  EXPECT_EQ(update_lt(table, triples[0], 0.2, ConfidenceConfig{}), 1.0);
}

TEST(UpdateLt, ZeroQualityCountsAsViolation) {
  const TripleList triples{{0, 0, 1}};
  LocalConfidenceTable table(triples);
  EXPECT_EQ(update_lt(table, triples[0], 0.0, ConfidenceConfig{}), 0.9);
}

TEST(UpdateLt, UnknownTripleIsAnError) {
  const TripleList triples{{0, 0, 1}};
  LocalConfidenceTable table(triples);
  EXPECT_THROW(update_lt(table, {1, 0, 0}, 0.5, ConfidenceConfig{}), DataError);
}

TEST(LocalConfidenceTable, InitializesEveryTrainingTripleToOne) {
  const TripleList triples{{0, 0, 1}, {1, 0, 2}, {2, 1, 0}};
  LocalConfidenceTable table(triples);
  ASSERT_EQ(table.size(), 3u);
  for (const auto& t : triples) EXPECT_EQ(table.value(t), 1.0);
  EXPECT_THROW(table.assign(std::vector<double>{1.0}), DataError);
  EXPECT_THROW(table.assign(std::vector<double>{1.0, 0.0, 1.0}), DataError);
  EXPECT_THROW(table.assign(std::vector<double>{1.0, 1.5, 1.0}), DataError);
}

TEST(LtProperty, KViolationsFromOneGiveAlphaToTheK) {
  const TripleList triples{{0, 0, 1}};
  ConfidenceConfig cfg;
  for (int k = 1; k <= 40; ++k) {
    LocalConfidenceTable table(triples);
    double expected = 1.0;
    for (int i = 0; i < k; ++i) {
      update_lt(table, triples[0], -1.0, cfg);
      expected *= cfg.alpha;
    }
    EXPECT_EQ(table.at(0), expected) << k;
  }
}

TEST(LtProperty, RandomUpdateSequencesStayInUnitInterval) {
  Rng rng(41);
  const TripleList triples{{0, 0, 1}, {1, 0, 2}};
  for (int round = 0; round < 50; ++round) {
    ConfidenceConfig cfg;
    cfg.alpha = 0.01 + 0.98 * rng.uniform01();
    cfg.beta = rng.uniform01() * 0.5;
    LocalConfidenceTable table(triples);
    for (int step = 0; step < 20000; ++step) {
      const double q = rng.uniform(-2.0, 1.0);
      const double v = table.update_at(rng.uniform(2), q, cfg);
      ASSERT_GT(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(ConfidenceConfig, ValidatesRanges) {
  ConfidenceConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.beta = -1e-3;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.weights = {0, 0, 0};
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.ap_guard = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Variants, DefaultWeights) {
  EXPECT_EQ(default_weights(Variant::LT).lt, 1.0);
  EXPECT_EQ(default_weights(Variant::LT).pp, 0.0);
  EXPECT_EQ(default_weights(Variant::LT_PP).lt, 0.9);
  EXPECT_EQ(default_weights(Variant::LT_PP).pp, 0.1);
  EXPECT_EQ(default_weights(Variant::LT_PP_AP).lt, 1.5);
  EXPECT_EQ(default_weights(Variant::LT_PP_AP).pp, 0.1);
  EXPECT_EQ(default_weights(Variant::LT_PP_AP).ap, 0.4);
  for (auto v : {Variant::TransE, Variant::LT, Variant::LT_PP, Variant::LT_PP_AP})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("ckrl"), UsageError);
}

TEST(PriorPath, EmptyPathListIsZero) {
  PathStats stats;
  EXPECT_EQ(prior_path_confidence({0, 0, 1}, {}, stats), 0.0);
}

TEST(PriorPath, SinglePathArithmetic) {
  PathStats stats;
  stats.epsilon = 0.01;
  const auto p = RelationPath::of(1, 2);
  stats.pair_count[p] = 4;
  stats.co_count[{0, p}] = 3;
  const std::vector<PathIndexEntry> paths{{p, 1.0}};
  EXPECT_DOUBLE_EQ(prior_path_confidence({0, 0, 1}, paths, stats), 0.7525);
}

TEST(PriorPath, TwoPathSummation) {
  // Q_PP = 0.5 via epsilon 0 and ratio 1/2; Q_PP = 1.0 via ratio 1.
  PathStats stats;
  stats.epsilon = 0.0;
  const auto p1 = RelationPath::of(1), p2 = RelationPath::of(2, 3);
  stats.pair_count[p1] = 2;
  stats.co_count[{0, p1}] = 1;
  stats.pair_count[p2] = 5;
  stats.co_count[{0, p2}] = 5;
  const std::vector<PathIndexEntry> paths{{p1, 0.5}, {p2, 0.25}};
  EXPECT_DOUBLE_EQ(prior_path_confidence({0, 0, 1}, paths, stats), 0.5);
}

TEST(PriorPath, MissingPairCountIsAConsistencyError) {
  PathStats stats;
  const std::vector<PathIndexEntry> paths{{RelationPath::of(1), 1.0}};
  EXPECT_THROW(prior_path_confidence({0, 0, 1}, paths, stats), DataError);
}

TEST(AdaptivePath, EmptyPathListIsZeroNotHalf) {
  const EmbeddingModel model(2, 1, 2, Norm::L1);
  EXPECT_EQ(adaptive_path_confidence({0, 0, 1}, {}, model, ConfidenceConfig{}), 0.0);
}

TEST(AdaptivePath, PerfectMatchSaturatesThroughTheGuard) {
  EmbeddingModel model(2, 2, 2, Norm::L1);
  std::ranges::copy(std::vector<double>{0.3, -0.2}, model.relation(0).begin());
  std::ranges::copy(std::vector<double>{0.3, -0.2}, model.relation(1).begin());
  const std::vector<PathIndexEntry> paths{{RelationPath::of(1), 1.0}};
  ConfidenceConfig cfg;
  EXPECT_EQ(relation_path_distance(model, 0, paths[0].path), 0.0);
  EXPECT_EQ(adaptive_path_confidence({0, 0, 1}, paths, model, cfg), sigmoid(1.0 / cfg.ap_guard));
  EXPECT_NEAR(adaptive_path_confidence({0, 0, 1}, paths, model, cfg), 1.0, 1e-12);
}

TEST(AdaptivePath, HalfReliabilityAtUnitDistance) {
  EmbeddingModel model(2, 2, 2, Norm::L1);
  std::ranges::copy(std::vector<double>{1.0, 0.5}, model.relation(0).begin());
  std::ranges::copy(std::vector<double>{0.5, 0.0}, model.relation(1).begin());
  const std::vector<PathIndexEntry> paths{{RelationPath::of(1), 0.5}};
  EXPECT_EQ(relation_path_distance(model, 0, paths[0].path), 1.0);
  EXPECT_NEAR(adaptive_path_confidence({0, 0, 1}, paths, model, ConfidenceConfig{}), 0.6225,
              5e-5);
}

TEST(AdaptivePath, ReverseEdgesUseNegatedRelation) {
  // r0 = (1, 0), r1 = (-1, 0); path [r1 reversed] sums to (1, 0) = r0.
  EmbeddingModel model(2, 2, 2, Norm::L2);
  std::ranges::copy(std::vector<double>{1.0, 0.0}, model.relation(0).begin());
  std::ranges::copy(std::vector<double>{-1.0, 0.0}, model.relation(1).begin());
  EXPECT_EQ(relation_path_distance(model, 0, RelationPath::of(1 + 2)), 0.0);
  EXPECT_EQ(relation_path_distance(model, 0, RelationPath::of(0, 1 + 2)), 1.0);
  EXPECT_EQ(relation_path_distance(model, 0, RelationPath::of(1)), 2.0);
}

TEST(AdaptivePathProperty, NonEmptyListsLieStrictlyAboveHalf) {
  Rng rng(42);
  for (int round = 0; round < 500; ++round) {
    const std::size_t d = 1 + rng.uniform(8), nr = 1 + rng.uniform(5);
    EmbeddingModel model(2, nr, d, rng.coin() ? Norm::L1 : Norm::L2);
    for (double& x : model.relation_matrix()) x = rng.uniform(-3.0, 3.0);
    std::vector<PathIndexEntry> paths;
    const std::size_t n = rng.uniform(4);
    for (std::size_t k = 0; k < n; ++k)
      paths.push_back({RelationPath::of(static_cast<EdgeId>(rng.uniform(2 * nr)),
                                        static_cast<EdgeId>(rng.uniform(2 * nr))),
                       1e-3 + rng.uniform01() * (1.0 - 1e-3)});
    const double ap = adaptive_path_confidence({0, 0, 1}, paths, model, ConfidenceConfig{});
    if (paths.empty()) {
      EXPECT_EQ(ap, 0.0);
    } else {
      EXPECT_GT(ap, 0.5);
      EXPECT_LE(ap, 1.0);
    }
  }
}

TEST(Combined, Examples) {
  ConfidenceConfig cfg;
  cfg.weights = {0.9, 0.1, 0.0};
  EXPECT_DOUBLE_EQ(combined_confidence(1.0, 1.0, 0.0, cfg), 1.0);
  cfg.weights = {1.5, 0.1, 0.4};
  EXPECT_DOUBLE_EQ(combined_confidence(1.0, 0.0, 0.5, cfg), 1.7);
  cfg.weights = {1.0, 0.0, 0.0};
  EXPECT_EQ(combined_confidence(0.375, 4.0, 0.9, cfg), 0.375);
}

TEST(CombinedProperty, LinearInEachComponent) {
  Rng rng(43);
  for (int round = 0; round < 1000; ++round) {
    ConfidenceConfig cfg;
    cfg.weights = {rng.uniform01() * 2, rng.uniform01(), rng.uniform01()};
    const double a[3] = {rng.uniform01(), rng.uniform01() * 3, rng.uniform01()};
    const double b[3] = {rng.uniform01(), rng.uniform01() * 3, rng.uniform01()};
    const double s = rng.uniform01() * 4;
    const double lhs = combined_confidence(a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], cfg);
    const double rhs = combined_confidence(a[0], a[1], a[2], cfg) +
                       s * combined_confidence(b[0], b[1], b[2], cfg);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(PriorPathProperty, CacheIsUnchangedByTraining) {
  testing::TempDir dir;
  Rng rng(44);
  const auto train = oracle::random_triples(30, 4, 150, rng);
  const auto kg = KnowledgeGraph::build(30, 4, train);
  const auto index = build_path_index(kg, kg.triples());
  const auto stats = build_path_stats(index);
  const CacheInfo info{1, kDefaultMaxFanout, 30, 4, kg.triples().size()};
  save_path_index(dir / "before_index.tsv", index, info);
  save_path_stats(dir / "before_stats.tsv", stats, info);

  TrainingConfig tc;
  tc.variant = Variant::LT_PP_AP;
  tc.epochs = 5;
  tc.dim = 8;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(tc.variant), &index, &stats);
  std::vector<double> pp_before;
  for (std::size_t i = 0; i < index.size(); ++i) pp_before.push_back(trainer.prior_path(i));
  trainer.run();
  for (std::size_t i = 0; i < index.size(); ++i) EXPECT_EQ(trainer.prior_path(i), pp_before[i]);

  save_path_index(dir / "after_index.tsv", index, info);
  save_path_stats(dir / "after_stats.tsv", stats, info);
  EXPECT_EQ(testing::read_file(dir / "before_index.tsv"), testing::read_file(dir / "after_index.tsv"));
  EXPECT_EQ(testing::read_file(dir / "before_stats.tsv"), testing::read_file(dir / "after_stats.tsv"));
}

TEST(PriorPathProperty, ZeroExactlyWhenPathListIsEmpty) {
  Rng rng(45);
  const auto train = oracle::random_triples(40, 3, 120, rng);
  const auto kg = KnowledgeGraph::build(40, 3, train);
  const auto index = build_path_index(kg, kg.triples());
  const PriorPathCache cache(index, build_path_stats(index));
  std::size_t empty = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    EXPECT_EQ(cache.at(i) == 0.0, index.entries(i).empty());
    empty += index.entries(i).empty() ? 1 : 0;
  }
  EXPECT_GT(empty, 0u);
  EXPECT_LT(empty, index.size());
}

TEST(ConfidenceDump, WritesSevenColumns) {
  testing::TempDir dir;
  const auto e = Vocabulary::numbered(2, "e");
  const auto r = Vocabulary::numbered(1, "r");
  const std::vector<ConfidenceRow> rows{{{0, 0, 1}, 0.5, 0.25, 0.75, 1.0}};
  write_confidences(dir / "c.tsv", rows, e, r);
  EXPECT_EQ(testing::read_file(dir / "c.tsv"), "e0\tr0\te1\t0.5\t0.25\t0.75\t1\n");
}

}  // namespace
}  // namespace ckrl
