#include "budgetface/embedding_csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "budgetface/error.hpp"
#include "csv_util.hpp"

namespace budgetface {

void write_vectors_csv(std::ostream& out, const LabeledVectors& vectors) {
  require(vectors.ids.size() == vectors.values.rows(), ErrorCode::kDimensionMismatch,
          "ids and rows differ in count");
  out << "id";
  for (std::size_t k = 0; k < vectors.values.cols(); ++k) out << ",dim" << k;
  out << '\n';
  for (std::size_t r = 0; r < vectors.values.rows(); ++r) {
    out << vectors.ids[r];
    for (double x : vectors.values.row(r)) out << ',' << detail::format_double(x);
    out << '\n';
  }
}

LabeledVectors read_vectors_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParseError, "missing CSV header");
  const auto header = detail::split_csv(detail::trim(line));
  require(!header.empty() && detail::trim(header[0]) == "id", ErrorCode::kParseError,
          "CSV header must start with 'id'");
  const std::size_t dim = header.size() - 1;
  for (std::size_t k = 0; k < dim; ++k)
    require(detail::trim(header[k + 1]) == "dim" + std::to_string(k), ErrorCode::kParseError,
            "unexpected header column '" + std::string(header[k + 1]) + "'");

  LabeledVectors result;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split_csv(trimmed);
    require(cells.size() == dim + 1, ErrorCode::kDimensionMismatch,
            "row has " + std::to_string(cells.size()) + " columns, expected " + std::to_string(dim + 1));
    result.ids.emplace_back(detail::trim(cells[0]));
    for (std::size_t k = 0; k < dim; ++k) flat.push_back(detail::parse_double(cells[k + 1], "dim value"));
  }
  result.values = Matrix(result.ids.size(), dim);
  std::copy(flat.begin(), flat.end(), result.values.data().begin());
  return result;
}

void write_vectors_csv(const std::string& path, const LabeledVectors& vectors) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot open " + path + " for writing");
  write_vectors_csv(out, vectors);
}

LabeledVectors read_vectors_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open " + path);
  return read_vectors_csv(in);
}

void write_anchor_csv(std::ostream& out, const AnchorSet& anchors) {
  write_vectors_csv(out, LabeledVectors{anchors.class_ids(), anchors.matrix()});
}

AnchorSet read_anchor_csv(std::istream& in) {
  auto v = read_vectors_csv(in);
  return AnchorSet(std::move(v.values), std::move(v.ids));
}

}  // namespace budgetface
