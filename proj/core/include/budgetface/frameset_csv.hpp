#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "budgetface/quality.hpp"

namespace budgetface {

// Columns `set_id,frame_idx,quality,dim0..dim{d-1}`; the quality cell may be
// empty, but must be empty for every frame of a set or for none.
void write_framesets_csv(std::ostream& out, const std::vector<FrameSet>& sets);
std::vector<FrameSet> read_framesets_csv(std::istream& in);

void write_framesets_csv(const std::string& path, const std::vector<FrameSet>& sets);
std::vector<FrameSet> read_framesets_csv(const std::string& path);

// Unit vector from file data: adopted as-is when within the unit tolerance,
// renormalized otherwise.
Embedding embedding_from_row(std::span<const double> row);

}  // namespace budgetface
