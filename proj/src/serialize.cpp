// SPDX-License-Identifier: Apache-2.0

#include "gatelab/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gatelab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", m.data()}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  auto shape = j.at("shape");
  std::size_t rows = shape.at(0).get<std::size_t>();
  std::size_t cols = shape.at(1).get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

nlohmann::json params_to_json(const Params& p) {
  nlohmann::json j;
  j["activation"] = p.activation == Activation::kTanh ? "tanh" : "identity";
  j["w_rec"] = matrix_to_json(p.w_rec);
  j["w_in"] = matrix_to_json(p.w_in);
  j["w_out"] = matrix_to_json(p.w_out);
  if (!p.w_rec_gate.empty()) j["w_rec_gate"] = matrix_to_json(p.w_rec_gate);
  if (!p.w_in_gate.empty()) j["w_in_gate"] = matrix_to_json(p.w_in_gate);
  return j;
}

Params params_from_json(const nlohmann::json& j) {
  Params p;
  std::string act = j.at("activation").get<std::string>();
  if (act == "tanh") {
    p.activation = Activation::kTanh;
  } else if (act == "identity") {
    p.activation = Activation::kIdentity;
  } else {
    throw std::invalid_argument("params_from_json: unknown activation " + act);
  }
  p.w_rec = matrix_from_json(j.at("w_rec"));
  p.w_in = matrix_from_json(j.at("w_in"));
  p.w_out = matrix_from_json(j.at("w_out"));
  if (j.contains("w_rec_gate")) p.w_rec_gate = matrix_from_json(j.at("w_rec_gate"));
  if (j.contains("w_in_gate")) p.w_in_gate = matrix_from_json(j.at("w_in_gate"));
  return p;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["iteration"] = ck.iteration;
  j["model"] = ck.kind.name();
  if (ck.kind.family == ModelKind::Family::kLeaky) j["alpha"] = ck.kind.alpha;
  j["params"] = params_to_json(ck.params);
  if (ck.has_adam) {
    j["optimizer"] = {{"kind", "adam"},
                      {"m", ck.adam.m},
                      {"v", ck.adam.v},
                      {"step_count", ck.adam.step_count}};
  } else {
    j["optimizer"] = {{"kind", "sgd"}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint ck;
  ck.iteration = j.at("iteration").get<std::size_t>();
  double alpha = j.value("alpha", 1.0);
  ck.kind = ModelKind::from_name(j.at("model").get<std::string>(), alpha);
  ck.params = params_from_json(j.at("params"));
  ck.params.validate(ck.kind);
  const auto& opt = j.at("optimizer");
  if (opt.at("kind").get<std::string>() == "adam") {
    ck.has_adam = true;
    ck.adam.m = opt.at("m").get<std::vector<double>>();
    ck.adam.v = opt.at("v").get<std::vector<double>>();
    ck.adam.step_count = opt.at("step_count").get<std::uint64_t>();
  }
  return ck;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

}  // namespace gatelab
