#include "ckrl/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ckrl/error.hpp"
#include "ckrl/io.hpp"

namespace ckrl {

void TrainingConfig::validate() const {
  if (!(margin > 0.0)) throw UsageError("margin must be > 0");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (dim == 0) throw UsageError("dimension must be >= 1");
  const auto& w = corruption;
  if (!(w.head >= 0.0 && w.tail >= 0.0 && w.relation >= 0.0))
    throw UsageError("corruption weights must be >= 0");
  if (std::fabs(w.head + w.tail + w.relation - 1.0) > 1e-9)
    throw UsageError("corruption weights must sum to 1");
}

EmbeddingModel init_embeddings(std::size_t num_entities, std::size_t num_relations,
                               std::size_t dim, Norm norm, Rng& rng) {
  if (dim == 0) throw UsageError("dimension must be >= 1");
  EmbeddingModel model(num_entities, num_relations, dim, norm);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : model.relation_matrix()) x = rng.uniform(-bound, bound);
  for (double& x : model.entity_matrix()) x = rng.uniform(-bound, bound);
  normalize_rows(model.relation_matrix(), dim);
  normalize_rows(model.entity_matrix(), dim);
  return model;
}

Triple sample_negative(const KnowledgeGraph& kg, const Triple& positive,
                       const CorruptionWeights& weights, Rng& rng) {
  const double total = weights.head + weights.tail + weights.relation;
  const double u = rng.uniform01() * total;
  enum { Head, Tail, Relation } position = u < weights.head                  ? Head
                                           : u < weights.head + weights.tail ? Tail
                                                                             : Relation;
  const std::size_t n = position == Relation ? kg.num_relations() : kg.num_entities();
  if (n < 2) throw UsageError("negative sampling needs at least two candidate ids");
  for (int attempt = 0; attempt < kNegativeRetries; ++attempt) {
    Triple c = positive;
    std::uint32_t& slot = position == Head ? c.head : position == Tail ? c.tail : c.relation;
    auto id = static_cast<std::uint32_t>(rng.uniform(n - 1));
    if (id >= slot) ++id;
    slot = id;
    if (!kg.contains(c)) return c;
  }
  throw DataError("no negative found for triple (" + std::to_string(positive.head) + ", " +
                  std::to_string(positive.relation) + ", " + std::to_string(positive.tail) +
                  ") after " + std::to_string(kNegativeRetries) + " attempts");
}

double hinge_loss(double energy_pos, double energy_neg, double margin, double confidence) {
  return confidence * std::max(0.0, margin + energy_pos - energy_neg);
}

namespace {

// dE/d(h + r - t) for the triple, written into `grad`.
void energy_gradient(const EmbeddingModel& model, const Triple& t, std::vector<double>& grad) {
  const auto h = model.entity(t.head);
  const auto r = model.relation(t.relation);
  const auto tl = model.entity(t.tail);
  const std::size_t d = model.dim();
  grad.resize(d);
  if (model.norm() == Norm::L1) {
    for (std::size_t i = 0; i < d; ++i) {
      const double x = h[i] + r[i] - tl[i];
      grad[i] = x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0;
    }
    return;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    grad[i] = h[i] + r[i] - tl[i];
    s += grad[i] * grad[i];
  }
  const double len = std::sqrt(s);
  for (double& g : grad) g = len > 0.0 ? g / len : 0.0;
}

}  // namespace

bool sgd_step(EmbeddingModel& model, const Triple& positive, const Triple& negative,
              double confidence, double margin, double learning_rate) {
  if (!(confidence > 0.0)) return false;
  if (margin + energy(model, positive) - energy(model, negative) <= 0.0) return false;

  thread_local std::vector<double> gp, gn;
  energy_gradient(model, positive, gp);
  energy_gradient(model, negative, gn);
  const double step = learning_rate * confidence;
  auto ph = model.entity(positive.head);
  auto pr = model.relation(positive.relation);
  auto pt = model.entity(positive.tail);
  auto nh = model.entity(negative.head);
  auto nr = model.relation(negative.relation);
  auto nt = model.entity(negative.tail);
  for (std::size_t i = 0; i < model.dim(); ++i) {
    ph[i] -= step * gp[i];
    pr[i] -= step * gp[i];
    pt[i] += step * gp[i];
    nh[i] += step * gn[i];
    nr[i] += step * gn[i];
    nt[i] -= step * gn[i];
  }
  return true;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,mean_loss,mean_lt,wall_ms\n";
  for (const auto& e : log)
    out << e.epoch << ',' << format_double(e.mean_loss) << ',' << format_double(e.mean_lt) << ','
        << format_double(std::round(e.wall_ms * 1000.0) / 1000.0) << '\n';
}

Trainer::Trainer(const KnowledgeGraph& kg, const TrainingConfig& config,
                 const ConfidenceConfig& confidence, const PathIndex* paths,
                 const PathStats* stats)
    : kg_(kg),
      config_(config),
      confidence_(confidence),
      paths_(paths),
      lt_(kg.triples()),
      rng_(config.seed) {
  config_.validate();
  confidence_.validate();
  const bool needs_paths = config_.variant != Variant::TransE &&
                           (confidence_.weights.pp > 0.0 || confidence_.weights.ap > 0.0);
  if (needs_paths) {
    if (paths == nullptr || (confidence_.weights.pp > 0.0 && stats == nullptr))
      throw UsageError("variant " + std::string(to_string(config_.variant)) +
                       " needs a path cache; run `ckrl precompute-paths` first");
    const auto& triples = kg.triples();
    if (paths->size() != triples.size())
      throw DataError("path index does not match the training triples");
    for (std::size_t i = 0; i < triples.size(); ++i)
      if (paths->triple(i) != triples[i])
        throw DataError("path index does not match the training triples");
    if (confidence_.weights.pp > 0.0) pp_ = PriorPathCache(*paths, *stats);
  } else {
    paths_ = nullptr;
  }
  model_ = init_embeddings(kg.num_entities(), kg.num_relations(), config_.dim, config_.norm, rng_);
  sampler_ = [this](std::size_t, const Triple& positive, Rng& rng) {
    return sample_negative(kg_, positive, config_.corruption, rng);
  };
  order_.resize(kg.triples().size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

void Trainer::set_model(EmbeddingModel model) {
  if (model.num_entities() != kg_.num_entities() || model.num_relations() != kg_.num_relations() ||
      model.dim() != config_.dim)
    throw DataError("initial model shape does not match the graph and configured dimension");
  model_ = std::move(model);
}

double Trainer::adaptive_path(std::size_t i) const {
  if (paths_ == nullptr) return 0.0;
  return adaptive_path_confidence(kg_.triples()[i], paths_->entries(i), model_, confidence_);
}

double Trainer::confidence(std::size_t i) const {
  if (config_.variant == Variant::TransE) return 1.0;
  const auto& w = confidence_.weights;
  const double pp = w.pp > 0.0 ? prior_path(i) : 0.0;
  const double ap = w.ap > 0.0 ? adaptive_path(i) : 0.0;
  return combined_confidence(lt_.at(i), pp, ap, confidence_);
}

std::vector<ConfidenceRow> Trainer::confidence_rows() const {
  std::vector<ConfidenceRow> rows(kg_.triples().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].triple = kg_.triples()[i];
    rows[i].lt = lt_.at(i);
    rows[i].pp = prior_path(i);
    rows[i].ap = adaptive_path(i);
    rows[i].combined = confidence(i);
  }
  return rows;
}

EpochLog Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const auto& triples = kg_.triples();
  if (config_.shuffle) {
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[rng_.uniform(i)]);
  }

  const bool track_lt = config_.variant != Variant::TransE;
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < order_.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(order_.size(), begin + config_.batch_size);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = order_[k];
      const Triple& positive = triples[i];
      const Triple negative = sampler_(i, positive, rng_);
      const double e_pos = energy(model_, positive);
      const double e_neg = energy(model_, negative);
      if (track_lt) {
        double e_quality = e_neg;
        if (config_.fresh_lt_negative) e_quality = energy(model_, sampler_(i, positive, rng_));
        lt_.update_at(i, triple_quality(e_pos, e_quality, config_.margin), confidence_);
      }
      const double c = confidence(i);
      const double loss = hinge_loss(e_pos, e_neg, config_.margin, c);
      if (!std::isfinite(loss))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch_ + 1) +
                             ", training triple " + std::to_string(i) + " (E+=" +
                             format_double(e_pos) + ", E-=" + format_double(e_neg) +
                             ", C=" + format_double(c) + ")");
      loss_sum += loss;
      sgd_step(model_, positive, negative, c, config_.margin, config_.learning_rate);
    }
    normalize_entities(model_);
  }

  ++epoch_;
  EpochLog log;
  log.epoch = epoch_;
  log.mean_loss = triples.empty() ? 0.0 : loss_sum / static_cast<double>(triples.size());
  log.mean_lt = lt_.mean();
  log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return log;
}

std::vector<EpochLog> Trainer::run(const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  for (int e = 0; e < config_.epochs; ++e) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");

constexpr char kCheckpointMagic[8] = {'C', 'K', 'R', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError("checkpoint " + path.string() + " is truncated");
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

void get_doubles(std::istream& in, std::span<double> v, const std::filesystem::path& path) {
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes())))
    throw DataError("checkpoint " + path.string() + " is truncated");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model,
                     Variant variant, std::span<const double> local_confidence) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_entities()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_relations()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(model.norm()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(variant));
  put<std::uint16_t>(out, 0);
  put_doubles(out, model.entity_matrix());
  put_doubles(out, model.relation_matrix());
  put<std::uint64_t>(out, local_confidence.size());
  put_doubles(out, local_confidence);
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw DataError(path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto dim = get<std::uint32_t>(in, path);
  const auto ne = get<std::uint32_t>(in, path);
  const auto nr = get<std::uint32_t>(in, path);
  const auto norm = get<std::uint8_t>(in, path);
  const auto variant = get<std::uint8_t>(in, path);
  get<std::uint16_t>(in, path);
  if (norm > 1 || variant > 3) throw DataError("checkpoint " + path.string() + " has a corrupted header");

  Checkpoint c;
  c.variant = static_cast<Variant>(variant);
  c.model = EmbeddingModel(ne, nr, dim, static_cast<Norm>(norm));
  get_doubles(in, c.model.entity_matrix(), path);
  get_doubles(in, c.model.relation_matrix(), path);
  const auto lt_count = get<std::uint64_t>(in, path);
  if (lt_count > (1ULL << 34)) throw DataError("checkpoint " + path.string() + " has a corrupted LT table");
  c.local_confidence.resize(lt_count);
  get_doubles(in, c.local_confidence, path);
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::size_t num_entities,
                           std::size_t num_relations, std::size_t dim) {
  auto c = load_checkpoint(path);
  if (c.model.num_entities() != num_entities || c.model.num_relations() != num_relations ||
      c.model.dim() != dim)
    throw DataError("checkpoint " + path.string() + " has shape (|E|=" +
                    std::to_string(c.model.num_entities()) + ", |R|=" +
                    std::to_string(c.model.num_relations()) + ", d=" +
                    std::to_string(c.model.dim()) + "), expected (|E|=" +
                    std::to_string(num_entities) + ", |R|=" + std::to_string(num_relations) +
                    ", d=" + std::to_string(dim) + ")");
  return c;
}

void export_embeddings(const std::filesystem::path& entity_file,
                       const std::filesystem::path& relation_file, const EmbeddingModel& model,
                       const Vocabulary& entities, const Vocabulary& relations) {
  auto write = [&](const std::filesystem::path& file, std::size_t rows, const Vocabulary& vocab,
                   auto row_of) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    for (std::size_t i = 0; i < rows; ++i) {
      out << vocab.name(static_cast<std::uint32_t>(i)) << '\t';
      const auto v = row_of(i);
      for (std::size_t k = 0; k < v.size(); ++k) out << (k ? "," : "") << format_double(v[k]);
      out << '\n';
    }
  };
  write(entity_file, model.num_entities(), entities,
        [&](std::size_t i) { return model.entity(static_cast<EntityId>(i)); });
  write(relation_file, model.num_relations(), relations,
        [&](std::size_t i) { return model.relation(static_cast<RelationId>(i)); });
}

}  // namespace ckrl
