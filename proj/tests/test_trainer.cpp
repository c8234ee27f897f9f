#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ckrl/error.hpp"
#include "ckrl/noise.hpp"
#include "ckrl/synthetic.hpp"
#include "ckrl/trainer.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

namespace ckrl {
namespace {

void set_row(std::span<double> row, std::initializer_list<double> values) {
  std::copy(values.begin(), values.end(), row.begin());
}

double l2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(Energy, Examples) {
  EmbeddingModel m(4, 2, 2, Norm::L1);
  set_row(m.entity(0), {0, 0});
  set_row(m.relation(0), {1, 2});
  set_row(m.entity(1), {1, 2});
  EXPECT_EQ(energy(m, {0, 0, 1}), 0.0);

  set_row(m.entity(2), {1, 2});
  set_row(m.relation(1), {0, 1});
  set_row(m.entity(3), {0, 0});
  EXPECT_EQ(energy(m, {2, 1, 3}), 4.0);

  EmbeddingModel m2(2, 1, 2, Norm::L2);
  set_row(m2.entity(0), {1, 0});
  set_row(m2.relation(0), {0, 0});
  set_row(m2.entity(1), {0, 1});
  EXPECT_DOUBLE_EQ(energy(m2, {0, 0, 1}), std::sqrt(2.0));
}

TEST(SampleNegative, EnumeratedExampleSet) {
  const auto kg = KnowledgeGraph::build(3, 2, {{0, 0, 1}});
  const std::set<Triple> allowed{{1, 0, 1}, {2, 0, 1}, {0, 0, 0}, {0, 0, 2}, {0, 1, 1}};
  std::set<Triple> seen;
  Rng rng(51);
  for (int i = 0; i < 5000; ++i) {
    const Triple n = sample_negative(kg, {0, 0, 1}, CorruptionWeights{}, rng);
    EXPECT_TRUE(allowed.contains(n));
    seen.insert(n);
  }
  EXPECT_EQ(seen, allowed);
}

TEST(SampleNegative, HeadOnlyWeights) {
  Rng rng(52);
  const auto triples = oracle::random_triples(20, 3, 60, rng);
  const auto kg = KnowledgeGraph::build(20, 3, triples);
  for (int i = 0; i < 2000; ++i) {
    const auto& t = triples[rng.uniform(triples.size())];
    const Triple n = sample_negative(kg, t, {1.0, 0.0, 0.0}, rng);
    EXPECT_NE(n.head, t.head);
    EXPECT_EQ(n.relation, t.relation);
    EXPECT_EQ(n.tail, t.tail);
    EXPECT_FALSE(kg.contains(n));
  }
}

TEST(SampleNegative, PositionFrequenciesMatchWeights) {
  Rng rng(53);
  const auto triples = oracle::random_triples(50, 5, 200, rng);
  const auto kg = KnowledgeGraph::build(50, 5, triples);
  const CorruptionWeights w;
  double head = 0, tail = 0, rel = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto& t = triples[rng.uniform(triples.size())];
    const Triple c = sample_negative(kg, t, w, rng);
    head += c.head != t.head;
    tail += c.tail != t.tail;
    rel += c.relation != t.relation;
  }
  EXPECT_NEAR(head / n, w.head, 0.01);
  EXPECT_NEAR(tail / n, w.tail, 0.01);
  EXPECT_NEAR(rel / n, w.relation, 0.01);
}

TEST(SampleNegative, ExhaustedRetriesNameThePositive) {
  const auto kg = KnowledgeGraph::build(2, 1, {{0, 0, 1}, {1, 0, 1}});
  Rng rng(54);
  try {
    sample_negative(kg, {0, 0, 1}, {1.0, 0.0, 0.0}, rng);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 0, 1)"), std::string::npos) << e.what();
  }
}

TEST(HingeLoss, Examples) {
  EXPECT_EQ(hinge_loss(0.0, 2.0, 1.0, 1.0), 0.0);
  EXPECT_EQ(hinge_loss(1.0, 1.0, 1.0, 0.5), 0.5);
  EXPECT_EQ(hinge_loss(3.0, 0.0, 1.0, 0.0), 0.0);
}

EmbeddingModel random_model(std::size_t ne, std::size_t nr, std::size_t d, Norm norm, Rng& rng) {
  EmbeddingModel m(ne, nr, d, norm);
  for (double& x : m.entity_matrix()) x = rng.uniform(-1.0, 1.0);
  for (double& x : m.relation_matrix()) x = rng.uniform(-1.0, 1.0);
  return m;
}

TEST(SgdStep, InactiveHingeLeavesModelBitIdentical) {
  Rng rng(55);
  auto m = random_model(4, 2, 4, Norm::L1, rng);
  const Triple pos{0, 0, 1}, neg{2, 0, 1};
  const double margin = energy(m, neg) - energy(m, pos) - 0.1;
  const auto before = m;
  EXPECT_FALSE(sgd_step(m, pos, neg, 1.0, margin, 0.5));
  EXPECT_EQ(m, before);
}

TEST(SgdStep, ZeroConfidenceLeavesModelBitIdentical) {
  Rng rng(56);
  auto m = random_model(4, 2, 4, Norm::L2, rng);
  const auto before = m;
  EXPECT_FALSE(sgd_step(m, {0, 0, 1}, {2, 0, 1}, 0.0, 100.0, 0.5));
  EXPECT_EQ(m, before);
}

TEST(SgdStep, MatchesFiniteDifferencesAtDimensionFour) {
  Rng rng(57);
  int checked = 0;
  for (int round = 0; round < 200; ++round) {
    const Norm norm = round % 2 ? Norm::L1 : Norm::L2;
    const auto m = random_model(5, 3, 4, norm, rng);
    const Triple pos{0, 1, 2};
    const Triple neg = round % 3 == 0 ? Triple{3, 1, 2} : round % 3 == 1 ? Triple{0, 1, 4} : Triple{0, 2, 2};
    if (norm == Norm::L1) {
      bool near_kink = false;
      for (const Triple& t : {pos, neg})
        for (std::size_t i = 0; i < 4; ++i)
          near_kink |= std::fabs(m.entity(t.head)[i] + m.relation(t.relation)[i] - m.entity(t.tail)[i]) <= 1e-3;
      if (near_kink) continue;
    }
    const double margin = 1.0 + std::max(0.0, energy(m, neg) - energy(m, pos));
    EXPECT_LT(oracle::sgd_gradient_error(m, pos, neg, 0.7, margin), 1e-4);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(InitEmbeddings, ComponentsAreDrawnWithinTheBoundThenNormalized) {
  const std::size_t ne = 30, nr = 7, d = 50;
  Rng rng(58);
  const auto m = init_embeddings(ne, nr, d, Norm::L1, rng);
  // Replay the draws: relations first, then entities.
  Rng replay(58);
  const double bound = 6.0 / std::sqrt(50.0);
  std::vector<double> rel(nr * d), ent(ne * d);
  for (double& x : rel) x = replay.uniform(-bound, bound);
  for (double& x : ent) x = replay.uniform(-bound, bound);
  for (double x : rel) ASSERT_LE(std::fabs(x), bound);
  for (double x : ent) ASSERT_LE(std::fabs(x), bound);
  for (std::size_t r = 0; r < nr; ++r) {
    const double n = l2({rel.data() + r * d, d});
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(m.relation(r)[i], rel[r * d + i] / n, 1e-15);
    EXPECT_NEAR(l2(m.relation(r)), 1.0, 1e-9);
  }
  for (std::size_t e = 0; e < ne; ++e) {
    const double n = l2({ent.data() + e * d, d});
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(m.entity(e)[i], ent[e * d + i] / n, 1e-15);
    EXPECT_NEAR(l2(m.entity(e)), 1.0, 1e-9);
  }
}

TEST(InitEmbeddings, SameSeedSameMatrices) {
  Rng a(59), b(59), c(60);
  const auto ma = init_embeddings(10, 3, 8, Norm::L2, a);
  EXPECT_EQ(ma, init_embeddings(10, 3, 8, Norm::L2, b));
  EXPECT_NE(ma, init_embeddings(10, 3, 8, Norm::L2, c));
  EXPECT_THROW(init_embeddings(10, 3, 0, Norm::L2, a), UsageError);
}

TEST(TrainingConfig, RejectsInvalidValues) {
  TrainingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.corruption = {0.5, 0.5, 0.5};
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.margin = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

// Three triples, fixed negatives, one batch: every value below follows by hand
// from the update rules with margin 1, learning rate 0.1, alpha 0.9, L1.
TEST(Trainer, OneEpochHandTrace) {
  const TripleList train{{0, 0, 1}, {1, 0, 2}, {2, 1, 3}};
  const TripleList negatives{{0, 0, 3}, {1, 0, 0}, {2, 1, 0}};
  const auto kg = KnowledgeGraph::build(4, 2, train);
  TrainingConfig tc;
  tc.dim = 2;
  tc.margin = 1.0;
  tc.learning_rate = 0.1;
  tc.batch_size = 3;
  tc.epochs = 1;
  tc.shuffle = false;
  tc.variant = Variant::LT;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(Variant::LT));
  EmbeddingModel m(4, 2, 2, Norm::L1);
  set_row(m.entity(0), {0, 0});
  set_row(m.entity(1), {1, 0});
  set_row(m.entity(2), {1, 1});
  set_row(m.entity(3), {0, 1});
  set_row(m.relation(0), {1, 0});
  set_row(m.relation(1), {-1, 0});
  trainer.set_model(m);
  trainer.set_negative_sampler([&](std::size_t i, const Triple&, Rng&) { return negatives[i]; });

  const EpochLog log = trainer.run_epoch();

  // Triple 0: E+ = 0, E- = 2, Q = 1 -> LT stays 1, loss 0, no update.
  // Triple 1: E+ = 2, E- = 2, Q = -1 -> LT 0.9, loss 0.9; step 0.09 with
  //   sign(h+r-t) = (1,-1) for the positive and (1,0) for the negative:
  //   e1 = (1, 0.09), r0 = (1, 0.09), e2 = (1.09, 0.91), e0 = (-0.09, 0).
  // Triple 2: E+ = |0.09| + |-0.09| = 0.18, E- = |0.18| + |0.91| = 1.09,
  //   Q = -0.09 -> LT 0.9, loss 0.9 * 0.09 = 0.081; step 0.09 with signs
  //   (1,-1) and (1,1): e2 = (1.09, 1.09), r1 = (-1, 0.18), e3 = (0.09, 0.91),
  //   e0 = (-0.18, -0.09).
  EXPECT_EQ(log.epoch, 1);
  EXPECT_NEAR(log.mean_loss, (0.0 + 0.9 + 0.081) / 3.0, 1e-12);
  EXPECT_NEAR(log.mean_lt, (1.0 + 0.9 + 0.9) / 3.0, 1e-12);
  EXPECT_EQ(trainer.local_confidence().at(0), 1.0);
  EXPECT_NEAR(trainer.local_confidence().at(1), 0.9, 1e-15);
  EXPECT_NEAR(trainer.local_confidence().at(2), 0.9, 1e-15);

  const auto& out = trainer.model();
  auto expect_row = [](std::span<const double> row, double x, double y, bool normalize) {
    const double n = normalize ? std::hypot(x, y) : 1.0;
    EXPECT_NEAR(row[0], x / n, 1e-12);
    EXPECT_NEAR(row[1], y / n, 1e-12);
  };
  expect_row(out.relation(0), 1.0, 0.09, false);
  expect_row(out.relation(1), -1.0, 0.18, false);
  expect_row(out.entity(0), -0.18, -0.09, true);
  expect_row(out.entity(1), 1.0, 0.09, true);
  expect_row(out.entity(2), 1.09, 1.09, true);
  expect_row(out.entity(3), 0.09, 0.91, true);
}

TEST(Trainer, TransEMatchesLtWithoutDecayOrGrowth) {
  Rng rng(61);
  const auto train = oracle::random_triples(30, 4, 150, rng);
  const auto kg = KnowledgeGraph::build(30, 4, train);
  TrainingConfig tc;
  tc.dim = 8;
  tc.epochs = 10;
  tc.batch_size = 32;
  tc.learning_rate = 0.01;
  tc.seed = 99;
  tc.variant = Variant::TransE;
  Trainer transe(kg, tc, ConfidenceConfig::for_variant(Variant::TransE));
  tc.variant = Variant::LT;
  auto cc = ConfidenceConfig::for_variant(Variant::LT);
  cc.alpha = 1.0;
  cc.beta = 0.0;
  Trainer lt(kg, tc, cc);
  for (int e = 0; e < tc.epochs; ++e) {
    const auto a = transe.run_epoch();
    const auto b = lt.run_epoch();
    ASSERT_EQ(a.mean_loss, b.mean_loss);
    ASSERT_EQ(transe.model(), lt.model());
  }
}

TEST(Trainer, EntityRowsHaveUnitNormAfterEveryBatch) {
  Rng rng(62);
  const auto train = oracle::random_triples(25, 3, 100, rng);
  const auto kg = KnowledgeGraph::build(25, 3, train);
  TrainingConfig tc;
  tc.dim = 6;
  tc.batch_size = 7;
  tc.learning_rate = 0.05;
  tc.shuffle = false;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(Variant::LT));
  int batches_checked = 0;
  trainer.set_negative_sampler([&](std::size_t i, const Triple& pos, Rng& r) {
    if (i % tc.batch_size == 0 && i > 0) {
      for (EntityId e = 0; e < kg.num_entities(); ++e)
        EXPECT_NEAR(l2(trainer.model().entity(e)), 1.0, 1e-9);
      ++batches_checked;
    }
    return sample_negative(kg, pos, tc.corruption, r);
  });
  for (int e = 0; e < 3; ++e) trainer.run_epoch();
  for (EntityId e = 0; e < kg.num_entities(); ++e)
    EXPECT_NEAR(l2(trainer.model().entity(e)), 1.0, 1e-9);
  EXPECT_GT(batches_checked, 30);
}

TEST(Trainer, ZeroConfidenceTriplesNeverMoveEmbeddings) {
  // Two isolated triples have no paths, so PP = 0 and C = 0 under weights (0, 1, 0).
  const TripleList train{{0, 0, 1}, {2, 1, 3}};
  const auto kg = KnowledgeGraph::build(4, 2, train);
  const auto index = build_path_index(kg, kg.triples());
  const auto stats = build_path_stats(index);
  TrainingConfig tc;
  tc.dim = 4;
  tc.variant = Variant::LT_PP;
  tc.learning_rate = 0.5;
  auto cc = ConfidenceConfig::for_variant(Variant::LT_PP);
  cc.weights = {0.0, 1.0, 0.0};
  Trainer trainer(kg, tc, cc, &index, &stats);
  const EmbeddingModel before = trainer.model();
  for (int e = 0; e < 5; ++e) {
    const auto log = trainer.run_epoch();
    EXPECT_EQ(log.mean_loss, 0.0);
  }
  EXPECT_TRUE(std::ranges::equal(trainer.model().relation_matrix(), before.relation_matrix()));
  for (std::size_t i = 0; i < before.entity_matrix().size(); ++i)
    EXPECT_NEAR(trainer.model().entity_matrix()[i], before.entity_matrix()[i], 1e-15);
}

TEST(Trainer, PathVariantWithoutCacheIsAUsageError) {
  const auto kg = KnowledgeGraph::build(3, 1, {{0, 0, 1}});
  TrainingConfig tc;
  tc.variant = Variant::LT_PP_AP;
  try {
    Trainer t(kg, tc, ConfidenceConfig::for_variant(tc.variant));
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("precompute-paths"), std::string::npos);
  }
  tc.variant = Variant::TransE;
  EXPECT_NO_THROW(Trainer(kg, tc, ConfidenceConfig::for_variant(tc.variant)));
}

TEST(Trainer, NonFiniteLossAborts) {
  const auto kg = KnowledgeGraph::build(3, 2, {{0, 0, 1}, {1, 1, 2}});
  TrainingConfig tc;
  tc.dim = 2;
  tc.margin = 1e308;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(Variant::LT));
  EmbeddingModel m(3, 2, 2, Norm::L1);
  m.entity(0)[0] = 1e308;
  m.entity(1)[0] = -1e308;
  m.entity(2)[0] = 1e308;
  trainer.set_model(m);
  EXPECT_THROW(trainer.run_epoch(), NumericalError);
}

TEST(Trainer, SmoothedLossDecreasesOnACleanGraph) {
  SyntheticSpec spec;
  spec.entities = 60;
  spec.relations = 4;
  spec.composed_relations = 0;
  spec.types = 3;
  spec.tails_per_head = 2;
  spec.valid_fraction = 0;
  spec.test_fraction = 0;
  spec.seed = 3;
  const auto ds = make_synthetic(spec);
  const auto kg = ds.index();
  ASSERT_GE(kg.triples().size(), 90u);
  ASSERT_LE(kg.triples().size(), 200u);
  TrainingConfig tc;
  tc.dim = 16;
  tc.epochs = 60;
  tc.batch_size = 20;
  tc.learning_rate = 0.01;
  tc.norm = Norm::L2;
  tc.variant = Variant::TransE;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(tc.variant));
  const auto logs = trainer.run();
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 5 <= logs.size(); i += 5) {
    double s = 0;
    for (std::size_t k = i; k < i + 5; ++k) s += logs[k].mean_loss;
    smooth.push_back(s / 5);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i)
    EXPECT_LE(smooth[i], smooth[i - 1] * 1.05 + 1e-3) << "window " << i;
  EXPECT_LT(smooth.back(), 0.5 * smooth.front());
}

TEST(Trainer, NoiseEndsWithLowerLocalConfidence) {
  SyntheticSpec spec;
  spec.entities = 300;
  spec.relations = 10;
  spec.composed_relations = 2;
  spec.seed = 5;
  const auto ds = make_synthetic(spec);
  const auto clean = ds.index();
  const auto labeled = inject_noise(clean, ds.train, {0.1, 6});
  TripleList noisy;
  for (const auto& l : labeled) noisy.push_back(l.triple);
  const auto kg = KnowledgeGraph::build(ds.entities, ds.relations, noisy);
  ASSERT_EQ(kg.triples().size(), labeled.size());

  TrainingConfig tc;
  tc.dim = 30;
  tc.norm = Norm::L2;
  tc.learning_rate = 0.01;
  tc.batch_size = 100;
  tc.epochs = 100;
  tc.variant = Variant::TransE;
  Trainer pre(kg, tc, ConfidenceConfig::for_variant(tc.variant));
  pre.run();
  tc.variant = Variant::LT;
  Trainer lt(kg, tc, ConfidenceConfig::for_variant(tc.variant));
  lt.set_model(pre.model());
  lt.run();

  std::vector<double> noise_lt, clean_lt;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    (labeled[i].label == Label::Noise ? noise_lt : clean_lt).push_back(lt.local_confidence().at(i));
  EXPECT_LT(oracle::rank_sum_p_less(noise_lt, clean_lt), 0.01);
}

TEST(Trainer, SameSeedGivesBitIdenticalCheckpoints) {
  testing::TempDir dir;
  Rng rng(63);
  const auto train = oracle::random_triples(30, 4, 120, rng);
  const auto kg = KnowledgeGraph::build(30, 4, train);
  TrainingConfig tc;
  tc.dim = 8;
  tc.epochs = 5;
  tc.batch_size = 16;
  for (const char* name : {"a.bin", "b.bin"}) {
    Trainer t(kg, tc, ConfidenceConfig::for_variant(tc.variant));
    t.run();
    save_checkpoint(dir / name, t.model(), tc.variant, t.local_confidence().values());
  }
  EXPECT_EQ(testing::read_file(dir / "a.bin"), testing::read_file(dir / "b.bin"));
}

TEST(Checkpoint, RoundTripsModelVariantAndLocalConfidence) {
  testing::TempDir dir;
  Rng rng(64);
  const auto m = random_model(5, 3, 4, Norm::L2, rng);
  const std::vector<double> lt{1.0, 0.5, 0.25};
  save_checkpoint(dir / "c.bin", m, Variant::LT_PP, lt);
  const auto c = load_checkpoint(dir / "c.bin");
  EXPECT_EQ(c.model, m);
  EXPECT_EQ(c.variant, Variant::LT_PP);
  EXPECT_EQ(c.local_confidence, lt);
  EXPECT_NO_THROW(load_checkpoint(dir / "c.bin", 5, 3, 4));
  EXPECT_THROW(load_checkpoint(dir / "c.bin", 5, 3, 8), DataError);
  EXPECT_THROW(load_checkpoint(dir / "c.bin", 6, 3, 4), DataError);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
  testing::TempDir dir;
  testing::write_file(dir / "x.bin", "not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(dir / "x.bin"), DataError);
  Rng rng(65);
  save_checkpoint(dir / "c.bin", random_model(5, 3, 4, Norm::L1, rng), Variant::LT, {});
  auto bytes = testing::read_file(dir / "c.bin");
  testing::write_file(dir / "c.bin", bytes.substr(0, bytes.size() - 12));
  EXPECT_THROW(load_checkpoint(dir / "c.bin"), DataError);
}

TEST(Checkpoint, PretrainedInitLoadsIntoTrainer) {
  testing::TempDir dir;
  const auto kg = KnowledgeGraph::build(4, 2, {{0, 0, 1}, {1, 1, 2}});
  Rng rng(66);
  const auto m = random_model(4, 2, 3, Norm::L1, rng);
  save_checkpoint(dir / "c.bin", m, Variant::TransE, std::vector<double>{1.0, 1.0});
  TrainingConfig tc;
  tc.dim = 3;
  tc.init = Init::Pretrained;
  Trainer t(kg, tc, ConfidenceConfig{});
  t.set_model(load_checkpoint(dir / "c.bin", 4, 2, 3).model);
  EXPECT_EQ(t.model(), m);
  EXPECT_THROW(t.set_model(random_model(4, 2, 5, Norm::L1, rng)), DataError);
}

TEST(ExportEmbeddings, WritesNameAndCommaSeparatedVector) {
  testing::TempDir dir;
  EmbeddingModel m(2, 1, 2, Norm::L1);
  set_row(m.entity(0), {0.5, -1});
  set_row(m.entity(1), {0, 2});
  set_row(m.relation(0), {0.25, 0.125});
  export_embeddings(dir / "e.tsv", dir / "r.tsv", m, Vocabulary::numbered(2, "e"),
                    Vocabulary::numbered(1, "r"));
  EXPECT_EQ(testing::read_file(dir / "e.tsv"), "e0\t0.5,-1\ne1\t0,2\n");
  EXPECT_EQ(testing::read_file(dir / "r.tsv"), "r0\t0.25,0.125\n");
}

TEST(TrainingLog, CsvHeaderAndRows) {
  testing::TempDir dir;
  const std::vector<EpochLog> logs{{1, 0.5, 0.75, 12.0}, {2, 0.25, 0.5, 11.5}};
  write_training_log(dir / "log.csv", logs);
  EXPECT_EQ(testing::read_file(dir / "log.csv"),
            "epoch,mean_loss,mean_lt,wall_ms\n1,0.5,0.75,12\n2,0.25,0.5,11.5\n");
}

}  // namespace
}  // namespace ckrl
