#include "budgetface/frameset_csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "budgetface/error.hpp"
#include "csv_util.hpp"

namespace budgetface {

Embedding embedding_from_row(std::span<const double> row) {
  for (double x : row) require(std::isfinite(x), ErrorCode::kNonFiniteInput, "non-finite vector entry");
  if (std::abs(l2_norm(row) - 1.0) <= Embedding::kUnitTolerance)
    return Embedding::from_unit(std::vector<double>(row.begin(), row.end()));
  return normalize(row);
}

void write_framesets_csv(std::ostream& out, const std::vector<FrameSet>& sets) {
  std::size_t dim = 0;
  for (const auto& s : sets)
    if (!s.frames.empty()) {
      dim = s.frames.front().dim();
      break;
    }
  out << "set_id,frame_idx,quality";
  for (std::size_t k = 0; k < dim; ++k) out << ",dim" << k;
  out << '\n';
  for (const auto& s : sets) {
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      require(s.frames[i].dim() == dim, ErrorCode::kDimensionMismatch, "frames differ in dimension");
      out << s.set_id << ',' << i << ',';
      if (s.qualities) out << detail::format_double(s.qualities->at(i));
      for (double x : s.frames[i].values()) out << ',' << detail::format_double(x);
      out << '\n';
    }
  }
}

std::vector<FrameSet> read_framesets_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParseError, "missing CSV header");
  const auto header = detail::split_csv(detail::trim(line));
  require(header.size() >= 3 && detail::trim(header[0]) == "set_id" && detail::trim(header[1]) == "frame_idx" &&
              detail::trim(header[2]) == "quality",
          ErrorCode::kParseError, "header must start with set_id,frame_idx,quality");
  const std::size_t dim = header.size() - 3;
  for (std::size_t k = 0; k < dim; ++k)
    require(detail::trim(header[k + 3]) == "dim" + std::to_string(k), ErrorCode::kParseError,
            "unexpected header column '" + std::string(header[k + 3]) + "'");

  struct Row {
    long long idx;
    std::optional<double> quality;
    std::vector<double> values;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  while (std::getline(in, line)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split_csv(trimmed);
    require(cells.size() == dim + 3, ErrorCode::kDimensionMismatch, "frame row has wrong column count");
    std::string id(detail::trim(cells[0]));
    Row r;
    r.idx = detail::parse_int(cells[1], "frame_idx");
    if (!detail::trim(cells[2]).empty()) r.quality = detail::parse_double(cells[2], "quality");
    for (std::size_t k = 0; k < dim; ++k) r.values.push_back(detail::parse_double(cells[k + 3], "dim value"));
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(r));
  }

  std::vector<FrameSet> sets;
  sets.reserve(order.size());
  for (const auto& id : order) {
    auto& frames = rows[id];
    std::stable_sort(frames.begin(), frames.end(), [](const Row& a, const Row& b) { return a.idx < b.idx; });
    for (std::size_t i = 1; i < frames.size(); ++i)
      require(frames[i].idx != frames[i - 1].idx, ErrorCode::kParseError, "duplicate frame_idx in set '" + id + "'");
    const auto with_q = std::count_if(frames.begin(), frames.end(), [](const Row& r) { return r.quality.has_value(); });
    require(with_q == 0 || static_cast<std::size_t>(with_q) == frames.size(), ErrorCode::kMissingQualities,
            "set '" + id + "' mixes empty and non-empty quality cells");
    FrameSet set{id, {}, std::nullopt};
    if (with_q > 0) set.qualities.emplace();
    for (const auto& r : frames) {
      set.frames.push_back(embedding_from_row(r.values));
      if (set.qualities) set.qualities->push_back(*r.quality);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void write_framesets_csv(const std::string& path, const std::vector<FrameSet>& sets) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot open " + path + " for writing");
  write_framesets_csv(out, sets);
}

std::vector<FrameSet> read_framesets_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open " + path);
  return read_framesets_csv(in);
}

}  // namespace budgetface
