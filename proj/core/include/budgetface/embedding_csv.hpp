#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "budgetface/numeric.hpp"

namespace budgetface {

// Rows of vectors keyed by an id column. Used for embeddings, anchor sets
// and raw synthetic inputs alike.
struct LabeledVectors {
  std::vector<std::string> ids;
  Matrix values;
};

// Header `id,dim0,...,dim{d-1}`, one row per vector, %.17g values.
void write_vectors_csv(std::ostream& out, const LabeledVectors& vectors);
LabeledVectors read_vectors_csv(std::istream& in);

void write_vectors_csv(const std::string& path, const LabeledVectors& vectors);
LabeledVectors read_vectors_csv(const std::string& path);

void write_anchor_csv(std::ostream& out, const AnchorSet& anchors);
AnchorSet read_anchor_csv(std::istream& in);

}  // namespace budgetface
