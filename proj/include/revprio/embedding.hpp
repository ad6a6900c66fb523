#pragma once

#include <optional>
#include <string>
#include <vector>

namespace revprio {

// Sentence embedding of one review; the unit stored in the vector index.
struct EmbeddingVector {
  std::vector<float> values;
  std::optional<std::string> review_id;
};

}  // namespace revprio
