#pragma once

// File formats used by the command-line tool.
//
//   model.json    {"shape": [r1, r2, r3], "p1": [...], "a": [[...]], "b": [[...]]}
//   joint.json    {"shape": [r1, r2, r3], "cells": [...]}   k fastest, then j, then i
//   marginal.json {"marginal": [[...], ...]}                r1 rows of r3 entries
//   q.json        {"q": [[...], ...]}
//   counts.csv    header "i,k,count", 1-based states, missing cells are 0

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "json.hpp"

#include "lcgeom/fiber.hpp"
#include "lcgeom/likelihood.hpp"
#include "lcgeom/model.hpp"

namespace lcgeom::io {

// Malformed or inconsistent input file; maps to exit status 3.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

std::string read_file(const std::string& path);

Json parse_json(const std::string& text, const std::string& source);

ChainParams model_from_json(const Json& j);
Json model_to_json(const ChainParams& params);

JointTable joint_from_json(const Json& j);
MarginalTable marginal_from_json(const Json& j);
MixingMatrix mixing_from_json(const Json& j);

Json matrix_to_json(const Eigen::MatrixXd& m);

// Shape is taken from r1/r3 when given, otherwise from the largest indices.
CountTable counts_from_csv(const std::string& text, const std::string& source, std::optional<int> r1 = std::nullopt,
                           std::optional<int> r3 = std::nullopt);

using AnyTable = std::variant<ChainParams, JointTable, MarginalTable>;
AnyTable table_from_json(const Json& j);

// %.17g
std::string format_double(double v);

}  // namespace lcgeom::io
