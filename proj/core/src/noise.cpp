#include "ckrl/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_set>

#include "ckrl/error.hpp"
#include "ckrl/log.hpp"
#include "ckrl/rng.hpp"

namespace ckrl {
namespace {

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Draws a replacement for `original` from `domain` \ {original}, or nullopt
// when that set is empty.
std::optional<EntityId> draw_replacement(std::span<const EntityId> domain, EntityId original,
                                         Rng& rng) {
  const bool present = std::binary_search(domain.begin(), domain.end(), original);
  const std::size_t choices = domain.size() - (present ? 1 : 0);
  if (choices == 0) return std::nullopt;
  auto j = static_cast<std::size_t>(rng.uniform(choices));
  if (present) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(domain.begin(), domain.end(), original) - domain.begin());
    if (j >= pos) ++j;
  }
  return domain[j];
}

// One corruption attempt of `seed`. The side is chosen by a fair coin; if the
// chosen side's domain offers no alternative the other side is used.
std::optional<Triple> try_corrupt(const KnowledgeGraph& kg, const Triple& seed,
                                  const TripleSet& emitted, Rng& rng) {
  if (seed.relation >= kg.num_relations()) return std::nullopt;
  const bool head_first = rng.coin();
  for (int k = 0; k < 2; ++k) {
    const bool head_side = (k == 0) == head_first;
    const auto domain = head_side ? kg.head_domain(seed.relation) : kg.tail_domain(seed.relation);
    const auto replacement = draw_replacement(domain, head_side ? seed.head : seed.tail, rng);
    if (!replacement) continue;
    Triple c = seed;
    (head_side ? c.head : c.tail) = *replacement;
    if (kg.contains(c) || emitted.contains(c)) return std::nullopt;
    return c;
  }
  return std::nullopt;
}

std::vector<LabeledTriple> label_all(std::span<const Triple> triples) {
  std::vector<LabeledTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back({t, Label::Positive});
  return out;
}

}  // namespace

std::vector<LabeledTriple> inject_noise(const KnowledgeGraph& kg, std::span<const Triple> train,
                                        const NoiseSpec& spec) {
  if (!(spec.ratio >= 0.0)) throw UsageError("noise ratio must be >= 0");
  auto out = label_all(train);
  const auto target = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(train.size())));
  if (target == 0) return out;
  if (train.empty()) throw DataError("cannot inject noise into an empty training set");

  Rng rng(spec.seed);
  TripleSet emitted;
  std::size_t skipped = 0;
  while (emitted.size() < target) {
    std::optional<Triple> noise;
    for (int attempt = 0; attempt < kCorruptionRetries && !noise; ++attempt) {
      const auto& seed = train[rng.uniform(train.size())];
      noise = try_corrupt(kg, seed, emitted, rng);
      if (!noise) ++skipped;
    }
    if (!noise)
      throw DataError("noise injection reached " + std::to_string(emitted.size()) + " of " +
                      std::to_string(target) + " requested triples before exhausting retries");
    emitted.insert(*noise);
    out.push_back({*noise, Label::Noise});
  }
  if (skipped > 0)
    log_info("noise injection resampled " + std::to_string(skipped) +
             " degenerate or colliding corruptions");
  return out;
}

std::vector<LabeledTriple> generate_classification_negatives(const KnowledgeGraph& kg,
                                                             std::span<const Triple> positives,
                                                             std::uint64_t seed) {
  auto out = label_all(positives);
  Rng rng(seed);
  TripleSet emitted;
  for (const auto& positive : positives) {
    std::optional<Triple> negative;
    for (int attempt = 0; attempt < kCorruptionRetries && !negative; ++attempt)
      negative = try_corrupt(kg, positive, emitted, rng);
    if (!negative) {
      // Positive cannot be corrupted within its relation's domain; fall back
      // to other positives so the output stays balanced.
      log_warning("positive triple cannot be corrupted, drawing another seed triple");
      for (int attempt = 0; attempt < kCorruptionRetries && !negative; ++attempt)
        negative = try_corrupt(kg, positives[rng.uniform(positives.size())], emitted, rng);
    }
    if (!negative)
      throw DataError("classification negatives reached " + std::to_string(emitted.size()) +
                      " of " + std::to_string(positives.size()) +
                      " requested triples before exhausting retries");
    emitted.insert(*negative);
    out.push_back({*negative, Label::Noise});
  }
  return out;
}

void write_labeled(const std::filesystem::path& path, std::span<const LabeledTriple> triples,
                   const Vocabulary& entities, const Vocabulary& relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& lt : triples) {
    out << entities.name(lt.triple.head) << '\t' << relations.name(lt.triple.relation) << '\t'
        << entities.name(lt.triple.tail) << '\t' << (lt.label == Label::Positive ? "1" : "-1")
        << '\n';
  }
}

std::vector<LabeledTriple> read_labeled(const std::filesystem::path& path,
                                        const Vocabulary& entities, const Vocabulary& relations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open labeled triple file " + path.string());
  std::vector<LabeledTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (auto tab = rest.find('\t'); tab != std::string_view::npos; tab = rest.find('\t')) {
      f.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    f.push_back(rest);
    if (f.size() != 4) throw ParseError(path.string(), line_no, "expected 4 tab-separated fields");
    LabeledTriple lt;
    try {
      lt.triple = {entities.id(f[0]), relations.id(f[1]), entities.id(f[2])};
    } catch (const DataError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (f[3] == "1")
      lt.label = Label::Positive;
    else if (f[3] == "-1")
      lt.label = Label::Noise;
    else
      throw ParseError(path.string(), line_no, "label must be 1 or -1");
    out.push_back(lt);
  }
  if (out.empty()) throw DataError("labeled triple file " + path.string() + " is empty");
  return out;
}

}  // namespace ckrl
