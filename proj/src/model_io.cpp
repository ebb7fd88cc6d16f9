#include "mrvr/model_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mrvr/errors.hpp"
#include "mrvr/metrics.hpp"

namespace mrvr {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// header must read x1..xU,t1..tV in order; V may be zero
std::pair<int, int> parse_header(const std::vector<std::string>& names,
                                 const std::string& path) {
  std::size_t k = 0;
  int u = 0, v = 0;
  while (k < names.size() && names[k] == "x" + std::to_string(u + 1)) ++u, ++k;
  while (k < names.size() && names[k] == "t" + std::to_string(v + 1)) ++v, ++k;
  if (u == 0 || k != names.size())
    throw DataError("data file: malformed header in " + path +
                    " (expected x1..xU,t1..tV)");
  return {u, v};
}

double parse_cell(const std::string& cell, int row, int col, const std::string& path) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  const std::string where = " at row " + std::to_string(row) + " column " +
                            std::to_string(col) + " in " + path;
  if (end == begin || *end != '\0')
    throw DataError("data file: non-numeric value '" + cell + "'" + where);
  if (!std::isfinite(value))
    throw DataError("data file: non-finite value '" + cell + "'" + where);
  return value;
}

std::string fmt17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array())
    throw DataError("model file: field '" + name + "' must be an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array())
    throw DataError("model file: field '" + name + "' must be an array of rows");
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      throw DataError("model file: ragged rows in field '" + name + "'");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw DataError("model file: non-numeric entry in field '" + name + "'");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array())
    throw DataError("model file: field '" + name + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!j[k].is_number())
      throw DataError("model file: non-numeric entry in field '" + name + "'");
    v(k) = j[k].get<double>();
  }
  return v;
}

json common_fields(const KernelConfig& kernel,
                   bool bias_active,
                   const Eigen::MatrixXd& rv_inputs,
                   int samples,
                   int outputs,
                   std::uint64_t seed,
                   int iterations) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kernel"] = {{"kind", "gaussian"}, {"width", kernel.width}};
  j["bias_active"] = bias_active;
  j["rv_inputs"] = matrix_to_json(rv_inputs);
  j["metadata"] = {{"samples", samples},
                   {"input_dim", static_cast<int>(rv_inputs.cols())},
                   {"outputs", outputs},
                   {"seed", seed},
                   {"iterations", iterations}};
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("model file: cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("model file: write failure on " + path);
}

void read_common(const json& j,
                 const std::string& path,
                 KernelConfig& kernel,
                 bool& bias_active,
                 Eigen::MatrixXd& rv_inputs,
                 std::uint64_t& seed,
                 int& iterations) {
  const std::string kind = j.at("kernel").at("kind").get<std::string>();
  if (kind != "gaussian")
    throw DataError("model file: unknown kernel kind '" + kind + "' in " + path);
  kernel.kind = KernelKind::Gaussian;
  kernel.width = j.at("kernel").at("width").get<double>();
  bias_active = j.at("bias_active").get<bool>();
  rv_inputs = matrix_from_json(j.at("rv_inputs"), "rv_inputs");
  seed = j.at("metadata").at("seed").get<std::uint64_t>();
  iterations = j.at("metadata").at("iterations").get<int>();
}

int expected_basis_count(const Eigen::MatrixXd& rv_inputs, bool bias_active) {
  return static_cast<int>(rv_inputs.rows()) + (bias_active ? 1 : 0);
}

}  // namespace

Table load_table(const std::string& path, bool require_targets) {
  std::ifstream in(path);
  if (!in) throw DataError("data file: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("data file: empty file " + path);
  const auto [u, v] = parse_header(split_csv(line), path);
  if (require_targets && v == 0)
    throw DataError("data file: target columns required in " + path);

  std::vector<double> flat;
  int rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    ++rows;
    if (static_cast<int>(cells.size()) != u + v)
      throw DataError("data file: row " + std::to_string(rows) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(u + v) + " in " + path);
    for (int c = 0; c < u + v; ++c)
      flat.push_back(parse_cell(cells[c], rows, c + 1, path));
  }

  Table out;
  out.inputs.resize(rows, u);
  if (v > 0) out.targets.emplace(rows, v);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < u; ++c) out.inputs(r, c) = flat[r * (u + v) + c];
    for (int c = 0; c < v; ++c) (*out.targets)(r, c) = flat[r * (u + v) + u + c];
  }
  return out;
}

void write_table(const std::string& path,
                 const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets) {
  if (targets.size() > 0 && targets.rows() != inputs.rows())
    throw std::invalid_argument("data file: inputs and targets disagree on the sample count");
  std::ofstream out(path);
  if (!out) throw DataError("data file: cannot write " + path);
  for (Eigen::Index c = 0; c < inputs.cols(); ++c)
    out << (c ? "," : "") << 'x' << c + 1;
  for (Eigen::Index c = 0; c < targets.cols(); ++c) out << ",t" << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < inputs.cols(); ++c)
      out << (c ? "," : "") << fmt17(inputs(r, c));
    for (Eigen::Index c = 0; c < targets.cols(); ++c) out << ',' << fmt17(targets(r, c));
    out << '\n';
  }
  if (!out) throw DataError("data file: write failure on " + path);
}

void save_model(const FastModel& model, std::uint64_t seed, const std::string& path) {
  const int samples = model.state.alpha.size() > 0
                          ? static_cast<int>(model.state.alpha.size()) - 1
                          : 0;
  json j = common_fields(model.kernel, model.bias_active, model.rv_inputs, samples,
                         static_cast<int>(model.omega_mp.rows()), seed, model.iterations);
  j["method"] = method_name(MethodTag::Proposed);
  j["weights"] = {{"mean", matrix_to_json(model.posterior.weight_mean)},
                  {"sigma", matrix_to_json(model.posterior.sigma)},
                  {"omega_mp", matrix_to_json(model.omega_mp)}};
  write_json(j, path);
}

void save_model(const BaselineModel& model, std::uint64_t seed, const std::string& path) {
  const int samples = model.state.alpha.size() > 0
                          ? static_cast<int>(model.state.alpha.size()) - 1
                          : 0;
  json j = common_fields(model.kernel, model.bias_active, model.rv_inputs, samples,
                         static_cast<int>(model.sigma2_mp.size()), seed, model.iterations);
  j["method"] = method_name(MethodTag::Existing);
  json mu = json::array();
  json sigma = json::array();
  for (std::size_t k = 0; k < model.posterior.mu.size(); ++k) {
    mu.push_back(vector_to_json(model.posterior.mu[k]));
    sigma.push_back(matrix_to_json(model.posterior.sigma[k]));
  }
  j["weights"] = {{"mu", std::move(mu)},
                  {"sigma", std::move(sigma)},
                  {"sigma2_mp", vector_to_json(model.sigma2_mp)}};
  write_json(j, path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("model file: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("model file: unreadable content in " + path + ": " + e.what());
  }

  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw DataError("model file: unsupported format version " +
                      std::to_string(version) + " in " + path);
    const std::string method = j.at("method").get<std::string>();
    const json& weights = j.at("weights");

    if (method == method_name(MethodTag::Proposed)) {
      FastModel model;
      std::uint64_t seed = 0;
      read_common(j, path, model.kernel, model.bias_active, model.rv_inputs, seed,
                  model.iterations);
      model.posterior.weight_mean = matrix_from_json(weights.at("mean"), "mean");
      model.posterior.sigma = matrix_from_json(weights.at("sigma"), "sigma");
      model.omega_mp = matrix_from_json(weights.at("omega_mp"), "omega_mp");
      const Eigen::Index m = model.posterior.weight_mean.rows();
      if (model.posterior.sigma.rows() != m || model.posterior.sigma.cols() != m ||
          model.omega_mp.rows() != model.omega_mp.cols() ||
          model.posterior.weight_mean.cols() != model.omega_mp.rows() ||
          m != expected_basis_count(model.rv_inputs, model.bias_active))
        throw DataError("model file: inconsistent weight shapes in " + path);
      return {std::move(model), seed};
    }
    if (method == method_name(MethodTag::Existing)) {
      BaselineModel model;
      std::uint64_t seed = 0;
      read_common(j, path, model.kernel, model.bias_active, model.rv_inputs, seed,
                  model.iterations);
      model.sigma2_mp = vector_from_json(weights.at("sigma2_mp"), "sigma2_mp");
      const json& mu = weights.at("mu");
      const json& sigma = weights.at("sigma");
      const std::size_t v = static_cast<std::size_t>(model.sigma2_mp.size());
      if (!mu.is_array() || !sigma.is_array() || mu.size() != v || sigma.size() != v)
        throw DataError("model file: inconsistent weight shapes in " + path);
      const int m = expected_basis_count(model.rv_inputs, model.bias_active);
      for (std::size_t k = 0; k < v; ++k) {
        model.posterior.mu.push_back(vector_from_json(mu[k], "mu"));
        model.posterior.sigma.push_back(matrix_from_json(sigma[k], "sigma"));
        if (model.posterior.mu.back().size() != m ||
            model.posterior.sigma.back().rows() != m ||
            model.posterior.sigma.back().cols() != m)
          throw DataError("model file: inconsistent weight shapes in " + path);
      }
      return {std::move(model), seed};
    }
    throw DataError("model file: unknown method '" + method + "' in " + path);
  } catch (const json::exception& e) {
    throw DataError("model file: missing or mistyped field in " + path + ": " + e.what());
  }
}

}  // namespace mrvr
