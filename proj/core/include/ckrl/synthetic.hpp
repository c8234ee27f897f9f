#pragma once

#include <cstddef>
#include <cstdint>

#include "ckrl/knowledge_graph.hpp"

namespace ckrl {

// Planted translational knowledge graph for desk-scale experiments.
//
// Entities carry hidden latent vectors and belong to one of `types` blocks.
// Each base relation links a head type to a tail type by a hidden latent
// translation: every head is connected to its `tails_per_head` nearest tail-
// type entities around head + translation. Composed relations chain two base
// relations (a: A->B, b: B->C gives A->C through each head's first a-tail's
// first b-tail), so two-step paths support them.
struct SyntheticSpec {
  std::size_t entities = 500;
  std::size_t relations = 20;
  std::size_t composed_relations = 4;
  std::size_t types = 5;
  std::size_t latent_dim = 6;
  std::size_t tails_per_head = 3;
  double head_fraction = 0.9;  // share of the head type used per base relation
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  std::uint64_t seed = 7;
};

Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace ckrl
