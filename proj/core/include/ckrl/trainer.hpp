#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ckrl/confidence.hpp"
#include "ckrl/knowledge_graph.hpp"
#include "ckrl/model.hpp"
#include "ckrl/paths.hpp"
#include "ckrl/rng.hpp"

namespace ckrl {

// Probability of replacing the head, tail or relation when corrupting a
// positive triple.
struct CorruptionWeights {
  double head = 0.4;
  double tail = 0.4;
  double relation = 0.2;
};

enum class Init { Random, Pretrained };

struct TrainingConfig {
  double margin = 1.0;
  double learning_rate = 0.001;
  int epochs = 1000;
  std::size_t batch_size = 4096;
  std::size_t dim = 50;
  Norm norm = Norm::L1;
  Variant variant = Variant::LT;
  CorruptionWeights corruption;
  std::uint64_t seed = 1;
  Init init = Init::Random;
  bool shuffle = true;
  // Draw an independent negative for the LT quality instead of reusing the
  // loss negative.
  bool fresh_lt_negative = false;

  void validate() const;
};

inline constexpr int kNegativeRetries = 1000;

// Random init: components uniform in [-6/sqrt(d), 6/sqrt(d)], then every
// relation and entity row scaled to unit L2 norm.
EmbeddingModel init_embeddings(std::size_t num_entities, std::size_t num_relations,
                               std::size_t dim, Norm norm, Rng& rng);

// Replaces one position of `positive` (chosen by `weights`) with a different
// uniformly drawn id, rejecting candidates known to `kg`.
Triple sample_negative(const KnowledgeGraph& kg, const Triple& positive,
                       const CorruptionWeights& weights, Rng& rng);

// C * max(0, margin + E(pos) - E(neg)).
double hinge_loss(double energy_pos, double energy_neg, double margin, double confidence);

// One SGD update of the confidence-weighted hinge for a (positive, negative)
// pair. Returns false (and leaves the model untouched) when the hinge is
// inactive or the confidence is zero.
bool sgd_step(EmbeddingModel& model, const Triple& positive, const Triple& negative,
              double confidence, double margin, double learning_rate);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  double mean_lt = 0;
  double wall_ms = 0;
};

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log);

// Confidence-aware margin trainer over the training triples of a graph.
// Path-based variants need a path index aligned with `kg.triples()` and the
// matching statistics.
class Trainer {
 public:
  using NegativeSampler = std::function<Triple(std::size_t index, const Triple& positive, Rng& rng)>;

  Trainer(const KnowledgeGraph& kg, const TrainingConfig& config,
          const ConfidenceConfig& confidence, const PathIndex* paths = nullptr,
          const PathStats* stats = nullptr);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Replaces the random initial model (pretrained init).
  void set_model(EmbeddingModel model);
  void set_local_confidence(std::span<const double> values) { lt_.assign(values); }
  void set_negative_sampler(NegativeSampler sampler) { sampler_ = std::move(sampler); }

  EpochLog run_epoch();
  // Runs the configured number of epochs, invoking `on_epoch` after each.
  std::vector<EpochLog> run(const std::function<void(const EpochLog&)>& on_epoch = {});

  const EmbeddingModel& model() const { return model_; }
  const LocalConfidenceTable& local_confidence() const { return lt_; }
  const TrainingConfig& config() const { return config_; }
  int epochs_done() const { return epoch_; }

  double prior_path(std::size_t i) const { return pp_.size() ? pp_.at(i) : 0.0; }
  // AP from the current embeddings.
  double adaptive_path(std::size_t i) const;
  // C for training triple i under the configured variant.
  double confidence(std::size_t i) const;
  std::vector<ConfidenceRow> confidence_rows() const;

 private:
  const KnowledgeGraph& kg_;
  TrainingConfig config_;
  ConfidenceConfig confidence_;
  const PathIndex* paths_;
  PriorPathCache pp_;
  EmbeddingModel model_;
  LocalConfidenceTable lt_;
  Rng rng_;
  NegativeSampler sampler_;
  std::vector<std::size_t> order_;
  int epoch_ = 0;
};

// Binary checkpoint: header (version, d, |E|, |R|, norm, variant),
// row-major entity and relation matrices, then the LT table.
struct Checkpoint {
  EmbeddingModel model;
  Variant variant = Variant::TransE;
  std::vector<double> local_confidence;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     Variant variant, std::span<const double> local_confidence);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Loads a checkpoint and verifies its shape; throws DataError on mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::size_t num_entities,
                           std::size_t num_relations, std::size_t dim);

// "name<TAB>v1,...,vd" per row.
void export_embeddings(const std::filesystem::path& entity_file,
                       const std::filesystem::path& relation_file, const EmbeddingModel& model,
                       const Vocabulary& entities, const Vocabulary& relations);

}  // namespace ckrl
