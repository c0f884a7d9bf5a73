#pragma once

#include "lcgeom/model.hpp"
#include "oracles.hpp"

namespace support {

inline lcgeom::ChainParams to_params(const oracle::Chain& c) {
  const int r1 = static_cast<int>(c.p1.size()), r2 = static_cast<int>(c.b.size()),
            r3 = static_cast<int>(c.b[0].size());
  Eigen::VectorXd p1(r1);
  Eigen::MatrixXd a(r1, r2), b(r2, r3);
  for (int i = 0; i < r1; ++i) {
    p1(i) = c.p1[i];
    for (int j = 0; j < r2; ++j) a(i, j) = c.a[i][j];
  }
  for (int j = 0; j < r2; ++j)
    for (int k = 0; k < r3; ++k) b(j, k) = c.b[j][k];
  return lcgeom::ChainParams(lcgeom::Shape(r1, r2, r3), p1, a, b);
}

inline oracle::Table2 to_table(const Eigen::MatrixXd& m) {
  oracle::Table2 t(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) t[i][k] = m(i, k);
  return t;
}

inline oracle::Chain to_chain(const lcgeom::ChainParams& p) {
  oracle::Chain c;
  c.p1.assign(p.p1().data(), p.p1().data() + p.p1().size());
  c.a = to_table(p.a());
  c.b = to_table(p.b());
  return c;
}

inline double max_diff(const oracle::Table2& x, const oracle::Table2& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = 0; k < x[i].size(); ++k) m = std::max(m, std::abs(x[i][k] - y[i][k]));
  return m;
}

}  // namespace support
