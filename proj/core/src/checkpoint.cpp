#include "budgetface/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "budgetface/error.hpp"

namespace budgetface {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  require(data.size() == m.data().size(), ErrorCode::kParseError, "checkpoint matrix has wrong element count");
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

}  // namespace

AnchorSet Checkpoint::anchor_set() const { return AnchorSet(unit_anchors(params), class_ids); }

void save_checkpoint(std::ostream& out, const Checkpoint& c) {
  const auto& p = c.params;
  json j;
  j["format"] = "budgetface-checkpoint-v1";
  j["iteration"] = c.iteration;
  j["config_hash"] = c.config_hash;
  j["loss"] = c.loss;
  j["class_ids"] = c.class_ids;
  j["w1"] = matrix_to_json(p.w1);
  j["b1"] = p.b1;
  j["wr"] = matrix_to_json(p.wr);
  j["br"] = p.br;
  j["w2"] = matrix_to_json(p.w2);
  j["b2"] = p.b2;
  j["gamma"] = p.gamma;
  j["beta"] = p.beta;
  j["anchors"] = matrix_to_json(p.anchors);
  j["quality_w"] = p.quality_w;
  j["quality_b"] = p.quality_b;
  j["bn"] = json{{"mean", p.running.mean}, {"var", p.running.var}, {"epsilon", p.running.epsilon}};
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, std::string("checkpoint: ") + e.what());
  }
  try {
    require(j.value("format", "") == "budgetface-checkpoint-v1", ErrorCode::kParseError,
            "not a budgetface checkpoint");
    Checkpoint c;
    c.iteration = j.at("iteration").get<std::int64_t>();
    c.config_hash = j.at("config_hash").get<std::uint64_t>();
    c.loss = j.at("loss").get<std::string>();
    c.class_ids = j.at("class_ids").get<std::vector<std::string>>();
    auto& p = c.params;
    p.w1 = matrix_from_json(j.at("w1"));
    p.b1 = j.at("b1").get<std::vector<double>>();
    p.wr = matrix_from_json(j.at("wr"));
    p.br = j.at("br").get<std::vector<double>>();
    p.w2 = matrix_from_json(j.at("w2"));
    p.b2 = j.at("b2").get<std::vector<double>>();
    p.gamma = j.at("gamma").get<std::vector<double>>();
    p.beta = j.at("beta").get<std::vector<double>>();
    p.anchors = matrix_from_json(j.at("anchors"));
    p.quality_w = j.at("quality_w").get<std::vector<double>>();
    p.quality_b = j.at("quality_b").get<double>();
    const auto& bn = j.at("bn");
    p.running = BnStats{bn.at("mean").get<std::vector<double>>(), bn.at("var").get<std::vector<double>>(),
                        bn.at("epsilon").get<double>()};
    require(c.class_ids.size() == p.anchors.rows(), ErrorCode::kParseError, "class id count differs from anchors");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIoError, "cannot open " + path + " for writing");
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace budgetface
