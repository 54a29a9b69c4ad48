#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "budgetface/model.hpp"

namespace budgetface {

struct Checkpoint {
  ModelParams params;
  std::vector<std::string> class_ids;
  std::int64_t iteration = 0;
  std::uint64_t config_hash = 0;
  std::string loss;

  AnchorSet anchor_set() const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// JSON document; doubles are written in shortest round-trip form, so
// save -> load -> save is byte-identical.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace budgetface
