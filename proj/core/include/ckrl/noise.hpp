#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ckrl/knowledge_graph.hpp"

namespace ckrl {

enum class Label : std::int8_t { Positive = 1, Noise = -1 };

struct LabeledTriple {
  Triple triple;
  Label label = Label::Positive;

  friend bool operator==(const LabeledTriple&, const LabeledTriple&) = default;
};

struct NoiseSpec {
  double ratio = 0.0;  // noise count as a fraction of |train|
  std::uint64_t seed = 0;
};

// Attempts allowed per emitted corruption before giving up on it.
inline constexpr int kCorruptionRetries = 100;

// Type-constrained noise injection. Each noise triple swaps the head (or
// tail) of a uniformly drawn training triple for another entity observed in
// that position with the same relation in `kg`. Noise triples are distinct and
// never known to `kg`. Returns `train` labeled Positive, followed by
// round(ratio * |train|) Noise triples.
std::vector<LabeledTriple> inject_noise(const KnowledgeGraph& kg, std::span<const Triple> train,
                                        const NoiseSpec& spec);

// Balanced positive/negative set for triple classification: `positives`
// labeled Positive, then one corruption per positive using the same
// mechanics as inject_noise.
std::vector<LabeledTriple> generate_classification_negatives(const KnowledgeGraph& kg,
                                                             std::span<const Triple> positives,
                                                             std::uint64_t seed);

// "head<TAB>relation<TAB>tail<TAB>label" with label 1 or -1, using names.
void write_labeled(const std::filesystem::path& path, std::span<const LabeledTriple> triples,
                   const Vocabulary& entities, const Vocabulary& relations);
std::vector<LabeledTriple> read_labeled(const std::filesystem::path& path,
                                        const Vocabulary& entities, const Vocabulary& relations);

}  // namespace ckrl
