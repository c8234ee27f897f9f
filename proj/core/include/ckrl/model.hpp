#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ckrl/knowledge_graph.hpp"

namespace ckrl {

enum class Norm { L1, L2 };

Norm parse_norm(std::string_view s);
std::string_view to_string(Norm n);

// Dense entity and relation embeddings, row-major.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t num_entities, std::size_t num_relations, std::size_t dim, Norm norm);

  std::size_t dim() const { return dim_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  Norm norm() const { return norm_; }

  std::span<double> entity(EntityId e) { return {entities_.data() + e * dim_, dim_}; }
  std::span<const double> entity(EntityId e) const { return {entities_.data() + e * dim_, dim_}; }
  std::span<double> relation(RelationId r) { return {relations_.data() + r * dim_, dim_}; }
  std::span<const double> relation(RelationId r) const {
    return {relations_.data() + r * dim_, dim_};
  }

  std::span<const double> entity_matrix() const { return entities_; }
  std::span<const double> relation_matrix() const { return relations_; }
  std::span<double> entity_matrix() { return entities_; }
  std::span<double> relation_matrix() { return relations_; }

  // Vector norm under the model's configured norm.
  double norm_of(std::span<const double> v) const;

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::size_t dim_ = 0;
  Norm norm_ = Norm::L1;
  std::vector<double> entities_;
  std::vector<double> relations_;
};

// ||h + r - t|| under the model norm.
double energy(const EmbeddingModel& model, const Triple& t);

// Scales every entity row to unit L2 norm (zero rows are left alone).
void normalize_entities(EmbeddingModel& model);
void normalize_rows(std::span<double> matrix, std::size_t dim);

}  // namespace ckrl
