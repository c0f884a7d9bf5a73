#include "io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lcgeom/error.hpp"

namespace lcgeom::io {

namespace {

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw InputError(std::string("missing field \"") + name + "\"");
  return j.at(name);
}

std::vector<double> number_array(const Json& j, const std::string& label) {
  if (!j.is_array()) throw InputError("field \"" + label + "\" must be an array of numbers");
  std::vector<double> out;
  for (std::size_t n = 0; n < j.size(); ++n) {
    if (!j[n].is_number()) throw InputError("field \"" + label + "\"[" + std::to_string(n) + "] is not a number");
    out.push_back(j[n].get<double>());
  }
  return out;
}

Eigen::MatrixXd number_matrix(const Json& j, const std::string& label) {
  if (!j.is_array() || j.empty()) throw InputError("field \"" + label + "\" must be a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < j.size(); ++r) rows.push_back(number_array(j[r], label + "[" + std::to_string(r) + "]"));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw InputError("field \"" + label + "\" has ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Shape shape_field(const Json& j) {
  const Json& s = field(j, "shape");
  if (!s.is_array() || s.size() != 3) throw InputError("field \"shape\" must be [r1, r2, r3]");
  for (const auto& v : s)
    if (!v.is_number_integer()) throw InputError("field \"shape\" entries must be integers");
  try {
    return Shape(s[0].get<int>(), s[1].get<int>(), s[2].get<int>());
  } catch (const Error& e) {
    throw InputError(std::string("field \"shape\": ") + e.what());
  }
}

// Library validation failures inside a file are input errors.
template <typename F>
auto guarded(const char* what, F&& make) {
  try {
    return make();
  } catch (const Error& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
}

ChainParams model_from_json(const Json& j) {
  const Shape shape = shape_field(j);
  const std::vector<double> p1v = number_array(field(j, "p1"), "p1");
  Eigen::VectorXd p1 = Eigen::Map<const Eigen::VectorXd>(p1v.data(), static_cast<Eigen::Index>(p1v.size()));
  Eigen::MatrixXd a = number_matrix(field(j, "a"), "a");
  Eigen::MatrixXd b = number_matrix(field(j, "b"), "b");
  return guarded("model", [&] { return ChainParams(shape, std::move(p1), std::move(a), std::move(b)); });
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json model_to_json(const ChainParams& params) {
  Json j;
  const Shape& sh = params.shape();
  j["shape"] = {sh.r1(), sh.r2(), sh.r3()};
  j["p1"] = Json::array();
  for (Eigen::Index i = 0; i < params.p1().size(); ++i) j["p1"].push_back(params.p1()(i));
  j["a"] = matrix_to_json(params.a());
  j["b"] = matrix_to_json(params.b());
  return j;
}

JointTable joint_from_json(const Json& j) {
  const Shape shape = shape_field(j);
  std::vector<double> cells = number_array(field(j, "cells"), "cells");
  return guarded("joint", [&] { return JointTable(shape, std::move(cells)); });
}

MarginalTable marginal_from_json(const Json& j) {
  Eigen::MatrixXd m = number_matrix(field(j, "marginal"), "marginal");
  return guarded("marginal", [&] { return MarginalTable(std::move(m)); });
}

MixingMatrix mixing_from_json(const Json& j) {
  Eigen::MatrixXd q = number_matrix(field(j, "q"), "q");
  return guarded("q", [&] { return MixingMatrix(std::move(q)); });
}

AnyTable table_from_json(const Json& j) {
  if (j.is_object() && j.contains("p1")) return model_from_json(j);
  if (j.is_object() && j.contains("cells")) return joint_from_json(j);
  if (j.is_object() && j.contains("marginal")) return marginal_from_json(j);
  throw InputError("expected a model (p1/a/b), joint (cells) or marginal file");
}

CountTable counts_from_csv(const std::string& text, const std::string& source, std::optional<int> r1,
                           std::optional<int> r3) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  std::map<std::pair<int, int>, std::int64_t> cells;
  int max_i = 0, max_k = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (!header) {
      if (line != "i,k,count") throw InputError(where + ": expected header \"i,k,count\"");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string fields[3], extra;
    for (auto& f : fields)
      if (!std::getline(row, f, ',')) throw InputError(where + ": expected three fields");
    if (std::getline(row, extra, ',')) throw InputError(where + ": expected three fields");
    long long values[3];
    const char* names[3] = {"i", "k", "count"};
    for (int n = 0; n < 3; ++n) {
      std::size_t used = 0;
      try {
        values[n] = std::stoll(fields[n], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != fields[n].size()) throw InputError(where + ": field " + names[n] + " is not an integer");
    }
    if (values[0] < 1 || values[1] < 1) throw InputError(where + ": states are 1-based");
    if (values[2] < 0) throw InputError(where + ": negative count");
    const auto key = std::make_pair(static_cast<int>(values[0]), static_cast<int>(values[1]));
    if (cells.count(key)) throw InputError(where + ": duplicate cell");
    cells[key] = values[2];
    max_i = std::max(max_i, key.first);
    max_k = std::max(max_k, key.second);
  }
  if (!header) throw InputError(source + ": empty counts file");
  const int rows = r1.value_or(max_i), cols = r3.value_or(max_k);
  if (max_i > rows || max_k > cols) throw InputError(source + ": cell index exceeds the table shape");
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows, cols);
  for (const auto& [key, count] : cells) m(key.first - 1, key.second - 1) = count;
  return guarded("counts", [&] { return CountTable(std::move(m)); });
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lcgeom::io
