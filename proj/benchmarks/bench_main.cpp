#include <benchmark/benchmark.h>

#include "ckrl/evaluator.hpp"
#include "ckrl/log.hpp"
#include "ckrl/paths.hpp"
#include "ckrl/synthetic.hpp"
#include "ckrl/trainer.hpp"

namespace ckrl {
namespace {

const Dataset& bench_dataset() {
  static const Dataset ds = [] {
    set_quiet(true);
    SyntheticSpec spec;
    spec.entities = 500;
    spec.relations = 20;
    spec.composed_relations = 4;
    return make_synthetic(spec);
  }();
  return ds;
}

const KnowledgeGraph& bench_graph() {
  static const KnowledgeGraph kg = bench_dataset().index();
  return kg;
}

EmbeddingModel bench_model(std::size_t dim, Norm norm) {
  Rng rng(1);
  const auto& kg = bench_graph();
  return init_embeddings(kg.num_entities(), kg.num_relations(), dim, norm, rng);
}

void BM_Energy(benchmark::State& state) {
  const auto norm = state.range(1) ? Norm::L2 : Norm::L1;
  const auto model = bench_model(static_cast<std::size_t>(state.range(0)), norm);
  const auto& triples = bench_graph().triples();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(energy(model, triples[i]));
    i = (i + 1) % triples.size();
  }
}
BENCHMARK(BM_Energy)->ArgsProduct({{50, 100}, {0, 1}});

void BM_SgdStep(benchmark::State& state) {
  auto model = bench_model(static_cast<std::size_t>(state.range(0)), Norm::L1);
  const auto& kg = bench_graph();
  const auto& triples = kg.triples();
  Rng rng(2);
  std::vector<Triple> negatives;
  for (const auto& t : triples) negatives.push_back(sample_negative(kg, t, {}, rng));
  std::size_t i = 0;
  for (auto _ : state) {
    // Large margin keeps the hinge active so every call does the full update.
    benchmark::DoNotOptimize(sgd_step(model, triples[i], negatives[i], 1.0, 100.0, 1e-6));
    i = (i + 1) % triples.size();
  }
}
BENCHMARK(BM_SgdStep)->Arg(50)->Arg(100);

void BM_PcraReliability(benchmark::State& state) {
  const auto& kg = bench_graph();
  std::vector<std::pair<Triple, RelationPath>> queries;
  for (const auto& t : kg.triples()) {
    for (const auto& p : enumerate_paths(kg, t.head, t.tail, t.relation)) queries.emplace_back(t, p);
    if (queries.size() > 2000) break;
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [t, p] = queries[i];
    benchmark::DoNotOptimize(pcra_reliability(kg, t.head, p, t.tail));
    i = (i + 1) % queries.size();
  }
}
BENCHMARK(BM_PcraReliability);

void BM_BuildPathIndex(benchmark::State& state) {
  const auto& kg = bench_graph();
  const PathOptions options{kDefaultMaxFanout, static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(build_path_index(kg, kg.triples(), options));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kg.triples().size()));
}
BENCHMARK(BM_BuildPathIndex)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_EntityPrediction(benchmark::State& state) {
  const auto& kg = bench_graph();
  const auto model = bench_model(50, Norm::L1);
  const auto& test = bench_dataset().test;
  const RankingOptions options{static_cast<std::size_t>(state.range(0)), false};
  for (auto _ : state) benchmark::DoNotOptimize(entity_prediction(model, test, kg, options));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * test.size()));
}
BENCHMARK(BM_EntityPrediction)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto& kg = bench_graph();
  TrainingConfig tc;
  tc.batch_size = 100;
  tc.variant = Variant::LT;
  Trainer trainer(kg, tc, ConfidenceConfig::for_variant(tc.variant));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kg.triples().size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ckrl

BENCHMARK_MAIN();
