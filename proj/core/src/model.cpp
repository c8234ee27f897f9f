#include "ckrl/model.hpp"

#include <cmath>

#include "ckrl/error.hpp"

namespace ckrl {

Norm parse_norm(std::string_view s) {
  if (s == "l1" || s == "L1") return Norm::L1;
  if (s == "l2" || s == "L2") return Norm::L2;
  throw UsageError("norm must be 'l1' or 'l2', got '" + std::string(s) + "'");
}

std::string_view to_string(Norm n) { return n == Norm::L1 ? "l1" : "l2"; }

EmbeddingModel::EmbeddingModel(std::size_t num_entities, std::size_t num_relations,
                               std::size_t dim, Norm norm)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      dim_(dim),
      norm_(norm),
      entities_(num_entities * dim, 0.0),
      relations_(num_relations * dim, 0.0) {}

double EmbeddingModel::norm_of(std::span<const double> v) const {
  double s = 0.0;
  if (norm_ == Norm::L1) {
    for (double x : v) s += std::fabs(x);
    return s;
  }
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double energy(const EmbeddingModel& model, const Triple& t) {
  const auto h = model.entity(t.head);
  const auto r = model.relation(t.relation);
  const auto tl = model.entity(t.tail);
  double s = 0.0;
  if (model.norm() == Norm::L1) {
    for (std::size_t i = 0; i < h.size(); ++i) s += std::fabs(h[i] + r[i] - tl[i]);
    return s;
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = h[i] + r[i] - tl[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void normalize_rows(std::span<double> matrix, std::size_t dim) {
  for (std::size_t off = 0; off + dim <= matrix.size(); off += dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += matrix[off + i] * matrix[off + i];
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < dim; ++i) matrix[off + i] *= inv;
  }
}

void normalize_entities(EmbeddingModel& model) {
  normalize_rows(model.entity_matrix(), model.dim());
}

}  // namespace ckrl
