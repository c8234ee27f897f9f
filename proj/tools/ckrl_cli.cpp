#include "ckrl_cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string_view>
#include <utility>

#include <CLI11.hpp>

#include "ckrl/confidence.hpp"
#include "ckrl/error.hpp"
#include "ckrl/evaluator.hpp"
#include "ckrl/io.hpp"
#include "ckrl/knowledge_graph.hpp"
#include "ckrl/log.hpp"
#include "ckrl/noise.hpp"
#include "ckrl/paths.hpp"
#include "ckrl/synthetic.hpp"
#include "ckrl/trainer.hpp"

namespace ckrl::cli {

namespace fs = std::filesystem;

namespace {

using Metrics = std::vector<std::pair<std::string, double>>;

std::string default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env != nullptr && *env != '\0' ? env : kDefaultOutputRoot;
}

fs::path cache_dir(const RunConfig& cfg) {
  return cfg.cache_dir.empty() ? fs::path(cfg.out) / "paths" : fs::path(cfg.cache_dir);
}

fs::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? fs::path(cfg.out) / "checkpoint.bin" : fs::path(cfg.checkpoint);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

Dataset load(const RunConfig& cfg) {
  if (cfg.train_file.empty()) throw UsageError("--train-file is required");
  return load_dataset(cfg.train_file, cfg.valid_file, cfg.test_file,
                      parse_column_order(cfg.column_order));
}

// Fingerprint of the data files the path caches depend on.
std::uint64_t data_digest(const RunConfig& cfg) {
  std::vector<fs::path> files;
  for (const auto* f : {&cfg.train_file, &cfg.valid_file, &cfg.test_file})
    if (!f->empty()) files.emplace_back(*f);
  return file_digest(files);
}

void print_metrics(std::string_view task, const Metrics& metrics) {
  for (const auto& [name, value] : metrics)
    std::cout << std::left << std::setw(18) << task << std::setw(28) << name << format_double(value)
              << '\n';
}

// ---------------------------------------------------------------------------

void cmd_make_demo(const RunConfig& cfg) {
  SyntheticSpec spec;
  spec.entities = cfg.demo_entities;
  spec.relations = cfg.demo_relations;
  spec.composed_relations = cfg.demo_composed;
  spec.seed = cfg.seed;
  const Dataset ds = make_synthetic(spec);
  const fs::path out(cfg.out);
  make_dir(out);
  const auto order = parse_column_order(cfg.column_order);
  write_triples(out / "train.txt", ds.train, order, ds.entities, ds.relations);
  write_triples(out / "valid.txt", ds.valid, order, ds.entities, ds.relations);
  write_triples(out / "test.txt", ds.test, order, ds.entities, ds.relations);
  log_info("demo graph: " + std::to_string(ds.entities.size()) + " entities, " +
           std::to_string(ds.relations.size()) + " relations, " + std::to_string(ds.train.size()) +
           "/" + std::to_string(ds.valid.size()) + "/" + std::to_string(ds.test.size()) +
           " train/valid/test triples in " + out.string());
}

void cmd_inject_noise(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  const KnowledgeGraph kg = ds.index();
  const auto order = parse_column_order(cfg.column_order);
  const fs::path root(cfg.out);
  make_dir(root);

  TripleList held_out = ds.valid;
  held_out.insert(held_out.end(), ds.test.begin(), ds.test.end());

  std::ofstream stats(root / "noise_stats.tsv", std::ios::binary);
  if (!stats) throw DataError("cannot write " + (root / "noise_stats.tsv").string());
  stats << "dataset\trelations\tentities\ttrain\tvalid\ttest\tnoise\n";

  for (std::size_t i = 0; i < cfg.ratios.size(); ++i) {
    const std::string name = "N" + std::to_string(i + 1);
    const fs::path dir = root / name;
    make_dir(dir);

    const auto labeled = inject_noise(kg, ds.train, {cfg.ratios[i], cfg.seed + i});
    TripleList noisy;
    noisy.reserve(labeled.size());
    for (const auto& l : labeled) noisy.push_back(l.triple);
    const std::size_t noise = labeled.size() - ds.train.size();

    write_triples(dir / "train.txt", noisy, order, ds.entities, ds.relations);
    write_labeled(dir / "train_labels.tsv", labeled, ds.entities, ds.relations);

    // Classification negatives must not collide with anything the noisy
    // training file will contain, including injected noise.
    const KnowledgeGraph noisy_kg = KnowledgeGraph::build(ds.entities, ds.relations, noisy, held_out);
    if (!ds.valid.empty()) {
      write_triples(dir / "valid.txt", ds.valid, order, ds.entities, ds.relations);
      write_labeled(dir / "valid_labeled.tsv",
                    generate_classification_negatives(noisy_kg, ds.valid, cfg.seed + 1000 + i),
                    ds.entities, ds.relations);
    }
    if (!ds.test.empty()) {
      write_triples(dir / "test.txt", ds.test, order, ds.entities, ds.relations);
      write_labeled(dir / "test_labeled.tsv",
                    generate_classification_negatives(noisy_kg, ds.test, cfg.seed + 2000 + i),
                    ds.entities, ds.relations);
    }

    std::ostringstream row;
    row << name << '\t' << ds.relations.size() << '\t' << ds.entities.size() << '\t'
        << noisy.size() << '\t' << ds.valid.size() << '\t' << ds.test.size() << '\t' << noise;
    stats << row.str() << '\n';
    std::ofstream single(dir / "stats.tsv", std::ios::binary);
    single << "dataset\trelations\tentities\ttrain\tvalid\ttest\tnoise\n" << row.str() << '\n';
    log_info(name + ": ratio " + format_double(cfg.ratios[i]) + ", " + std::to_string(noise) +
             " noise triples added to " + std::to_string(ds.train.size()) + " positives");
  }
}

bool cache_is_current(const fs::path& index_file, const fs::path& stats_file,
                      const CacheInfo& expected, double epsilon) {
  if (!fs::exists(index_file) || !fs::exists(stats_file)) return false;
  try {
    if (read_path_index_info(index_file) != expected) return false;
    CacheInfo info;
    const PathStats stats = load_path_stats(stats_file, &info);
    return info == expected && stats.epsilon == epsilon;
  } catch (const DataError& e) {
    log_warning(std::string("ignoring unusable path cache: ") + e.what());
    return false;
  }
}

void cmd_precompute_paths(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  const KnowledgeGraph kg = ds.index();
  const CacheInfo info{data_digest(cfg), cfg.max_fanout, kg.num_entities(), kg.num_relations(),
                       kg.triples().size()};
  const fs::path dir = cache_dir(cfg);
  const fs::path index_file = dir / "path_index.tsv";
  const fs::path stats_file = dir / "path_stats.tsv";
  if (cfg.reuse_cache && cache_is_current(index_file, stats_file, info, cfg.epsilon)) {
    log_info("path cache in " + dir.string() + " is current; nothing to do");
    return;
  }
  make_dir(dir);
  const PathIndex index = build_path_index(kg, kg.triples(), {cfg.max_fanout, cfg.threads});
  const PathStats stats = build_path_stats(index, cfg.epsilon);
  save_path_index(index_file, index, info);
  save_path_stats(stats_file, stats, info);
  log_info("path cache written to " + dir.string() + ": " + std::to_string(index.total_entries()) +
           " paths over " + std::to_string(index.size()) + " triples, " +
           std::to_string(stats.pair_count.size()) + " distinct paths");
}

ConfidenceWeights parse_lambdas(const std::string& s, Variant variant) {
  if (s == "auto") return default_weights(variant);
  std::vector<double> v;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      v.push_back(parse_double(item));
    } catch (const DataError&) {
      throw UsageError("--lambdas must be 'auto' or three comma-separated numbers");
    }
  }
  if (v.size() != 3) throw UsageError("--lambdas must be 'auto' or three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

void cmd_train(const RunConfig& cfg) {
  TrainingConfig tc;
  tc.margin = cfg.margin;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.dim = cfg.dim;
  tc.norm = parse_norm(cfg.norm);
  tc.variant = parse_variant(cfg.variant);
  if (cfg.corruption.size() != 3)
    throw UsageError("--corruption needs three weights (head, tail, relation)");
  tc.corruption = {cfg.corruption[0], cfg.corruption[1], cfg.corruption[2]};
  tc.seed = cfg.seed;
  tc.init = cfg.init == "pretrained" ? Init::Pretrained : Init::Random;
  tc.fresh_lt_negative = cfg.fresh_lt_negative;
  if (tc.init == Init::Pretrained && cfg.pretrained.empty())
    throw UsageError("--init pretrained needs --pretrained <checkpoint>");
  if (cfg.checkpoint_every < 0) throw UsageError("--checkpoint-every must be >= 0");

  ConfidenceConfig cc = ConfidenceConfig::for_variant(tc.variant);
  cc.alpha = cfg.alpha;
  cc.beta = cfg.beta;
  cc.ap_guard = cfg.ap_guard;
  cc.epsilon = cfg.epsilon;
  cc.weights = parse_lambdas(cfg.lambdas, tc.variant);
  tc.validate();
  cc.validate();

  const Dataset ds = load(cfg);
  const KnowledgeGraph kg = ds.index();

  PathIndex index;
  PathStats stats;
  const bool needs_paths =
      tc.variant != Variant::TransE && (cc.weights.pp > 0.0 || cc.weights.ap > 0.0);
  if (needs_paths) {
    const fs::path dir = cache_dir(cfg);
    const fs::path index_file = dir / "path_index.tsv";
    const fs::path stats_file = dir / "path_stats.tsv";
    if (!fs::exists(index_file) || !fs::exists(stats_file))
      throw UsageError("variant " + cfg.variant + " needs path caches in " + dir.string() +
                       "; run `ckrl precompute-paths` with the same data files first");
    CacheInfo info;
    index = load_path_index(index_file, kg.triples(), &info);
    if (info.source_digest != data_digest(cfg))
      throw DataError("path cache in " + dir.string() +
                      " was built from different data files; rerun `ckrl precompute-paths`");
    CacheInfo stats_info;
    stats = load_path_stats(stats_file, &stats_info);
    if (stats_info != info)
      throw DataError("path index and statistics in " + dir.string() +
                      " do not belong together; rerun `ckrl precompute-paths`");
    cc.epsilon = stats.epsilon;
  }

  Trainer trainer(kg, tc, cc, needs_paths ? &index : nullptr, needs_paths ? &stats : nullptr);
  if (tc.init == Init::Pretrained) {
    auto ck = load_checkpoint(cfg.pretrained, kg.num_entities(), kg.num_relations(), tc.dim);
    if (ck.model.norm() != tc.norm)
      log_warning("pretrained checkpoint used norm " + std::string(to_string(ck.model.norm())) +
                  "; continuing with " + std::string(to_string(tc.norm)));
    ck.model = [&] {
      EmbeddingModel m(kg.num_entities(), kg.num_relations(), tc.dim, tc.norm);
      std::copy(ck.model.entity_matrix().begin(), ck.model.entity_matrix().end(),
                m.entity_matrix().begin());
      std::copy(ck.model.relation_matrix().begin(), ck.model.relation_matrix().end(),
                m.relation_matrix().begin());
      return m;
    }();
    trainer.set_model(std::move(ck.model));
    if (tc.variant != Variant::TransE && ck.local_confidence.size() == kg.triples().size())
      trainer.set_local_confidence(ck.local_confidence);
  }

  const fs::path out(cfg.out);
  make_dir(out);
  log_info("training " + std::string(to_string(tc.variant)) + " on " +
           std::to_string(kg.triples().size()) + " triples: norm=" +
           std::string(to_string(tc.norm)) + " d=" + std::to_string(tc.dim) +
           " lr=" + format_double(tc.learning_rate) + " margin=" + format_double(tc.margin) +
           " epochs=" + std::to_string(tc.epochs) + " batch=" + std::to_string(tc.batch_size) +
           " lambdas=" + format_double(cc.weights.lt) + "," + format_double(cc.weights.pp) + "," +
           format_double(cc.weights.ap));

  const int report_every = std::max(1, tc.epochs / 20);
  const auto logs = trainer.run([&](const EpochLog& e) {
    if (e.epoch % report_every == 0 || e.epoch == tc.epochs)
      log_info("epoch " + std::to_string(e.epoch) + ": mean loss " + format_double(e.mean_loss) +
               ", mean LT " + format_double(e.mean_lt));
    if (cfg.checkpoint_every > 0 && e.epoch % cfg.checkpoint_every == 0 && e.epoch != tc.epochs)
      save_checkpoint(out / ("checkpoint_epoch" + std::to_string(e.epoch) + ".bin"),
                      trainer.model(), tc.variant, trainer.local_confidence().values());
  });

  save_checkpoint(out / "checkpoint.bin", trainer.model(), tc.variant,
                  trainer.local_confidence().values());
  write_confidences(out / "confidences.tsv", trainer.confidence_rows(), ds.entities, ds.relations);
  write_training_log(out / "train_log.csv", logs);
  export_embeddings(out / "entity_embeddings.tsv", out / "relation_embeddings.tsv",
                    trainer.model(), ds.entities, ds.relations);
  log_info("checkpoint written to " + (out / "checkpoint.bin").string());
}

std::vector<LabeledTriple> classification_set(const std::string& file, const TripleList& clean,
                                              const Dataset& ds, const KnowledgeGraph& kg,
                                              std::uint64_t seed, std::string_view split) {
  if (!file.empty()) return read_labeled(file, ds.entities, ds.relations);
  if (clean.empty())
    throw UsageError("classification needs --" + std::string(split) + "-labeled or --" +
                     std::string(split) + "-file");
  return generate_classification_negatives(kg, clean, seed);
}

void cmd_evaluate(const RunConfig& cfg) {
  bool want_noise = false, want_completion = false, want_classification = false;
  for (const auto& t : cfg.tasks) {
    if (t == "noise-detection") want_noise = true;
    else if (t == "completion") want_completion = true;
    else if (t == "classification") want_classification = true;
    else throw UsageError("unknown task '" + t + "'");
  }
  if (want_noise && cfg.labels.empty())
    throw UsageError("noise-detection needs --labels (the train_labels.tsv written by inject-noise)");

  const Dataset ds = load(cfg);
  const KnowledgeGraph kg = ds.index();
  const auto ck = load_checkpoint(checkpoint_path(cfg));
  if (ck.model.num_entities() != kg.num_entities() ||
      ck.model.num_relations() != kg.num_relations())
    throw DataError("checkpoint " + checkpoint_path(cfg).string() +
                    " does not match the vocabulary of the data files");
  const EmbeddingModel& model = ck.model;
  const fs::path out(cfg.out);
  make_dir(out);

  if (want_noise) {
    const auto labeled = read_labeled(cfg.labels, ds.entities, ds.relations);
    const PRCurve curve = detect_noise(model, labeled);
    write_pr_curve(out / "pr_curve.csv", curve);
    Metrics m{{"auc", curve.auc},
              {"num_triples", static_cast<double>(curve.num_triples)},
              {"num_noise", static_cast<double>(curve.num_noise)}};
    for (int k = 1; k <= 9; ++k) {
      const double recall = k / 10.0;
      m.emplace_back("precision_at_recall_0." + std::to_string(k), curve.precision_at(recall));
    }
    write_report(out / "noise_detection.json", m);
    print_metrics("noise-detection", m);
  }

  if (want_completion) {
    if (ds.test.empty()) throw UsageError("completion needs --test-file");
    const RankingOptions opts{cfg.threads, false};
    const auto r = entity_prediction(model, ds.test, kg, opts);
    Metrics m{{"mean_rank_raw", r.mean_rank_raw},
              {"mean_rank_filter", r.mean_rank_filter},
              {"hits10_raw", r.hits10_raw},
              {"hits10_filter", r.hits10_filter},
              {"queries", static_cast<double>(r.queries)}};
    if (cfg.relation_prediction) {
      const auto rel = relation_prediction(model, ds.test, kg, opts);
      m.emplace_back("relation_mean_rank_raw", rel.mean_rank_raw);
      m.emplace_back("relation_mean_rank_filter", rel.mean_rank_filter);
      m.emplace_back("relation_hits10_raw", rel.hits10_raw);
      m.emplace_back("relation_hits10_filter", rel.hits10_filter);
    }
    write_report(out / "completion.json", m);
    print_metrics("completion", m);
  }

  if (want_classification) {
    const auto valid = classification_set(cfg.valid_labeled, ds.valid, ds, kg, cfg.seed + 1, "valid");
    const auto test = classification_set(cfg.test_labeled, ds.test, ds, kg, cfg.seed + 2, "test");
    const auto thresholds = fit_thresholds(model, valid);
    Metrics m{{"valid_accuracy", thresholds.validation_accuracy()},
              {"test_accuracy", classify(model, thresholds, test)},
              {"relations_with_threshold", static_cast<double>(thresholds.per_relation.size())},
              {"valid_examples", static_cast<double>(valid.size())},
              {"test_examples", static_cast<double>(test.size())}};
    write_report(out / "classification.json", m);
    print_metrics("classification", m);
  }
}

// Writes the fully resolved configuration next to the outputs so the run
// can be repeated with `ckrl --config <file> <subcommand>`.
void dump_config(const CLI::App& app, const RunConfig& cfg, std::string_view command) {
  const fs::path out(cfg.out);
  make_dir(out);
  std::ofstream f(out / (std::string(command) + ".config.ini"), std::ios::binary);
  if (!f) throw DataError("cannot write the effective config to " + out.string());
  f << app.config_to_str(true, false);
}

}  // namespace

int run(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Confidence-aware knowledge representation learning"};
  app.name("ckrl");
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; command-line flags override its values");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--train-file", cfg.train_file, "Training triples (TSV)");
  app.add_option("--valid-file", cfg.valid_file, "Validation triples (TSV)");
  app.add_option("--test-file", cfg.test_file, "Test triples (TSV)");
  app.add_option("--column-order", cfg.column_order, "Column layout of triple files")
      ->check(CLI::IsMember({"htr", "hrt"}))
      ->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")
      ->default_val(default_output_root())
      ->envname(kOutputRootEnv);
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads for path enumeration and evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--quiet", cfg.quiet, "Suppress progress messages");

  auto* demo = app.add_subcommand("make-demo", "Write a small synthetic train/valid/test split");
  demo->add_option("--entities", cfg.demo_entities)->capture_default_str();
  demo->add_option("--relations", cfg.demo_relations)->capture_default_str();
  demo->add_option("--composed", cfg.demo_composed, "Relations implied by two-step paths")
      ->capture_default_str();

  auto* noise = app.add_subcommand("inject-noise", "Build noisy training sets N1, N2, ...");
  noise->add_option("--ratios", cfg.ratios, "Noise ratios, one output directory each")
      ->delimiter(',')
      ->capture_default_str();

  auto* paths = app.add_subcommand("precompute-paths", "Build the path index and statistics caches");
  paths->add_option("--cache-dir", cfg.cache_dir, "Cache directory (default <out>/paths)");
  paths->add_option("--max-fanout", cfg.max_fanout, "Neighbors expanded per (entity, edge)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  paths->add_option("--epsilon", cfg.epsilon, "Prior path smoothing")->capture_default_str();
  paths->add_flag("--reuse-cache", cfg.reuse_cache, "Skip work when the cache is current");

  auto* train = app.add_subcommand("train", "Train embeddings and triple confidences");
  train->add_option("--cache-dir", cfg.cache_dir, "Path cache directory (default <out>/paths)");
  train->add_option("--variant", cfg.variant)
      ->check(CLI::IsMember({"transe", "lt", "lt+pp", "lt+pp+ap"}))
      ->capture_default_str();
  train->add_option("--norm", cfg.norm)->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
  train->add_option("--dim", cfg.dim)->capture_default_str();
  train->add_option("--margin", cfg.margin)->capture_default_str();
  train->add_option("--learning-rate", cfg.learning_rate)->capture_default_str();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  train->add_option("--alpha", cfg.alpha, "LT decay on violated triples")->capture_default_str();
  train->add_option("--beta", cfg.beta, "LT increment on satisfied triples")->capture_default_str();
  train->add_option("--lambdas", cfg.lambdas, "Confidence weights 'lt,pp,ap' or auto")
      ->capture_default_str();
  train->add_option("--ap-guard", cfg.ap_guard, "Lower bound on the path distance in AP")
      ->capture_default_str();
  train->add_option("--epsilon", cfg.epsilon, "Prior path smoothing")->capture_default_str();
  train->add_option("--corruption", cfg.corruption, "Head, tail, relation corruption weights")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--init", cfg.init)
      ->check(CLI::IsMember({"random", "pretrained"}))
      ->capture_default_str();
  train->add_option("--pretrained", cfg.pretrained, "Checkpoint for --init pretrained");
  train->add_option("--checkpoint-every", cfg.checkpoint_every, "Intermediate checkpoint cadence")
      ->capture_default_str();
  train->add_flag("--fresh-lt-negative", cfg.fresh_lt_negative,
                  "Draw a separate negative for the LT update");

  auto* eval = app.add_subcommand("evaluate", "Noise detection, completion and classification");
  eval->add_option("--checkpoint", cfg.checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  eval->add_option("--tasks", cfg.tasks)
      ->delimiter(',')
      ->check(CLI::IsMember({"noise-detection", "completion", "classification"}))
      ->capture_default_str();
  eval->add_option("--labels", cfg.labels, "Ground-truth labels of the training triples");
  eval->add_option("--valid-labeled", cfg.valid_labeled, "Labeled validation triples");
  eval->add_option("--test-labeled", cfg.test_labeled, "Labeled test triples");
  eval->add_flag("--relation-prediction", cfg.relation_prediction,
                 "Also rank relations in completion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  set_quiet(cfg.quiet);
  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (sub == demo) cmd_make_demo(cfg);
    else if (sub == noise) cmd_inject_noise(cfg);
    else if (sub == paths) cmd_precompute_paths(cfg);
    else if (sub == train) cmd_train(cfg);
    else if (sub == eval) cmd_evaluate(cfg);
    dump_config(app, cfg, name);
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "ckrl: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "ckrl: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "ckrl: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ckrl: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "ckrl: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace ckrl::cli
