#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "mrvr/baseline_mrvr.hpp"
#include "mrvr/fast_mrvr.hpp"

namespace mrvr {

// A parsed data file: header x1..xU[,t1..tV], one numeric row per sample.
struct Table {
  Eigen::MatrixXd inputs;
  std::optional<Eigen::MatrixXd> targets;
};

// Reads a CSV data file. Throws DataError on unreadable paths, malformed
// headers, ragged or non-numeric rows, and non-finite values; the message
// names the offending row and column. require_targets demands at least one
// t column.
Table load_table(const std::string& path, bool require_targets);

void write_table(const std::string& path,
                 const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets);

using AnyModel = std::variant<FastModel, BaselineModel>;

struct LoadedModel {
  AnyModel model;
  std::uint64_t seed = 0;
};

// Model persistence: versioned JSON text. Numbers are written in shortest
// round-trip decimal form, so a saved model reloads with bit-identical
// predictive behaviour. Throws DataError on version mismatch or corrupt
// files.
void save_model(const FastModel& model, std::uint64_t seed, const std::string& path);
void save_model(const BaselineModel& model, std::uint64_t seed, const std::string& path);
LoadedModel load_model(const std::string& path);

}  // namespace mrvr
