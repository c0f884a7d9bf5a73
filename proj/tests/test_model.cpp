#include <cmath>

#include "catch_amalgamated.hpp"
#include "lcgeom/error.hpp"
#include "lcgeom/model.hpp"
#include "support.hpp"

using namespace lcgeom;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

ChainParams uniform_chain(Shape sh) {
  return ChainParams(sh, Eigen::VectorXd::Constant(sh.r1(), 1.0 / sh.r1()),
                     Eigen::MatrixXd::Constant(sh.r1(), sh.r2(), 1.0 / sh.r2()),
                     Eigen::MatrixXd::Constant(sh.r2(), sh.r3(), 1.0 / sh.r3()));
}

}  // namespace

TEST_CASE("Shape rejects cardinalities below two", "[model]") {
  REQUIRE_THROWS_AS(Shape(1, 2, 2), Error);
  REQUIRE_THROWS_AS(Shape(2, 1, 2), Error);
  REQUIRE_NOTHROW(Shape(2, 2, 2));
}

TEST_CASE("ChainParams validates its rows", "[model]") {
  const Shape sh(2, 2, 2);
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  REQUIRE_THROWS_AS(ChainParams(sh, Eigen::Vector2d(0.5, 0.5), bad, Eigen::MatrixXd::Constant(2, 2, 0.5)), Error);
  Eigen::MatrixXd neg(2, 2);
  neg << 1.2, -0.2, 0.5, 0.5;
  REQUIRE_THROWS_AS(ChainParams(sh, Eigen::Vector2d(0.5, 0.5), neg, Eigen::MatrixXd::Constant(2, 2, 0.5)), Error);
}

TEST_CASE("joint_from_chain", "[model]") {
  SECTION("uniform factors give a uniform table") {
    const JointTable j = joint_from_chain(uniform_chain(Shape(2, 2, 2)));
    for (double c : j.cells()) REQUIRE(c == 0.125);
    REQUIRE(j.interior());
  }
  SECTION("degenerate p1 zeroes the second Y1 slab") {
    const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Constant(2, 2, 0.5),
                        Eigen::MatrixXd::Constant(2, 2, 0.5));
    const JointTable j = joint_from_chain(p);
    for (int jj = 0; jj < 2; ++jj)
      for (int k = 0; k < 2; ++k) REQUIRE(j(1, jj, k) == 0.0);
    REQUIRE_FALSE(j.interior());
  }
  SECTION("seeded 3x2x3 chain satisfies every quadric") {
    const JointTable j = joint_from_chain(support::to_params(oracle::random_chain(3, 2, 3, 7)));
    // Substitute directly into theta(1,j,1) theta(i,j,k) - theta(1,j,k) theta(i,j,1).
    for (int jj = 0; jj < 2; ++jj)
      for (int i = 1; i < 3; ++i)
        for (int k = 1; k < 3; ++k)
          REQUIRE(std::abs(j(0, jj, 0) * j(i, jj, k) - j(0, jj, k) * j(i, jj, 0)) < 1e-12);
  }
}

TEST_CASE("marginal_13", "[model]") {
  SECTION("uniform joint") {
    const MarginalTable m = marginal_13(JointTable::uniform(Shape(2, 2, 2)));
    REQUIRE((m.cells().array() == 0.25).all());
  }
  SECTION("matches the matrix-product oracle") {
    const auto chain = oracle::random_chain(4, 3, 5, 11);
    const auto expect = oracle::margin(chain);
    const MarginalTable m = marginal_13(joint_from_chain(support::to_params(chain)));
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 5; ++k) REQUIRE_THAT(m(i, k), WithinAbs(expect[i][k], 1e-14));
  }
  SECTION("single-cell joint") {
    std::vector<double> cells(8, 0.0);
    cells[0] = 1.0;
    const MarginalTable m = marginal_13(JointTable(Shape(2, 2, 2), cells));
    REQUIRE(m(0, 0) == 1.0);
    REQUIRE(m.cells().sum() == 1.0);
  }
}

TEST_CASE("ci_residuals", "[model]") {
  SECTION("hand-substituted 2x2x2 table") {
    const JointTable j(Shape(2, 2, 2), {0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
    const auto r = ci_residuals(j);
    REQUIRE(r.size() == 2);
    REQUIRE_THAT(r[0], WithinAbs(0.02, 1e-15));  // j = 1
    REQUIRE_THAT(r[1], WithinAbs(0.0, 1e-15));
  }
  SECTION("quadric count for 3x2x3") { REQUIRE(ci_residuals(JointTable::uniform(Shape(3, 2, 3))).size() == 8); }
  SECTION("zero cells are allowed") {
    std::vector<double> cells(8, 0.0);
    cells[0] = 0.5;
    cells[7] = 0.5;
    REQUIRE(ci_residuals(JointTable(Shape(2, 2, 2), cells)).size() == 2);
  }
  SECTION("reference cell is range-checked") {
    REQUIRE_THROWS_AS(ci_residuals(JointTable::uniform(Shape(2, 2, 2)), RefCell{2, 0}), Error);
  }
}

TEST_CASE("ci_residuals vanish for every chain and reference cell", "[model][property]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int r1 = 2 + static_cast<int>(seed % 3), r2 = 2 + static_cast<int>(seed / 3 % 3),
              r3 = 2 + static_cast<int>(seed / 9 % 3);
    const JointTable j = joint_from_chain(sample_chain(Shape(r1, r2, r3), seed));
    for (int I = 0; I < r1; ++I)
      for (int K = 0; K < r3; ++K) REQUIRE(max_abs(ci_residuals(j, {I, K})) < 1e-12);
  }
}

TEST_CASE("dims reproduces the worked shapes", "[model]") {
  const Dims a = dims(Shape(2, 2, 2));
  CHECK(a.d == 7);
  CHECK(a.t == 5);
  CHECK(a.s == 2);
  CHECK(a.m == 3);
  CHECK(a.fiber == 2);

  const Dims b = dims(Shape(3, 2, 3));
  CHECK(b.d == 17);
  CHECK(b.t == 9);
  CHECK(b.s == 8);
  CHECK(b.m == 7);
  CHECK(b.fiber == 2);
  CHECK(b.dim_case == DimCase::R2Small);
  CHECK(b.constraint_count == 1);

  const Dims c = dims(Shape(4, 3, 4));
  CHECK(c.d == 47);
  CHECK(c.t == 20);
  CHECK(c.s == 27);
  CHECK(c.m == 14);
  CHECK(c.fiber == 6);

  const Dims e = dims(Shape(2, 3, 2));
  CHECK(e.dim_case == DimCase::R2Large);
  CHECK(e.m == 3);
  CHECK(e.t == 8);
  CHECK(e.fiber == 5);
}

TEST_CASE("dimension identities over the 2..6 sweep", "[model][property]") {
  for (int r1 = 2; r1 <= 6; ++r1)
    for (int r2 = 2; r2 <= 6; ++r2)
      for (int r3 = 2; r3 <= 6; ++r3) {
        const Shape sh(r1, r2, r3);
        const Dims d = dims(sh);
        INFO(r1 << "," << r2 << "," << r3);
        REQUIRE(d.t == d.d - d.s);
        REQUIRE(d.fiber == d.t - d.m);
        if (d.dim_case == DimCase::R2Small) {
          REQUIRE(d.fiber == r2 * (r2 - 1));
        } else {
          REQUIRE(d.m == r1 * r3 - 1);
          REQUIRE(d.fiber == r2 * (r1 + r3 - 1) - r1 * r3);
        }
        REQUIRE(dag_dimension(chain_dag(sh)) == d.t);
        REQUIRE(decomposable_dimension(chain_decomposable(sh)) == d.t);
        REQUIRE(static_cast<int>(ci_residuals(JointTable::uniform(sh)).size()) == r2 * (r1 - 1) * (r3 - 1));
      }
}

TEST_CASE("dag_dimension", "[model]") {
  REQUIRE(dag_dimension(chain_dag(Shape(3, 2, 3))) == 9);
  DagSpec single;
  single.add_node("Y", 4);
  REQUIRE(dag_dimension(single) == 3);
  DagSpec complete;
  complete.add_node("A", 2).add_node("B", 2, {"A"}).add_node("C", 2, {"A", "B"});
  REQUIRE(dag_dimension(complete) == 7);
  DagSpec bad;
  REQUIRE_THROWS_AS(bad.add_node("B", 2, {"A"}), Error);
}

TEST_CASE("decomposable_dimension", "[model]") {
  REQUIRE(decomposable_dimension(chain_decomposable(Shape(3, 2, 3))) == 9);
  REQUIRE(decomposable_dimension(DecomposableSpec({{"A", 2}, {"B", 2}, {"C", 2}}, {{"A", "B", "C"}}, {})) == 7);
  // Disconnected cliques through an empty separator are rejected.
  REQUIRE_THROWS_AS(DecomposableSpec({{"A", 2}, {"B", 2}}, {{"A"}, {"B"}}, {{}}), Error);
  // Separator not shared with any earlier clique.
  REQUIRE_THROWS_AS(DecomposableSpec({{"A", 2}, {"B", 2}, {"C", 2}}, {{"A", "B"}, {"B", "C"}}, {{"C"}}), Error);
}

TEST_CASE("jacobian_rank equals the model dimension at interior points", "[model]") {
  for (auto [r1, r2, r3] : {std::tuple{2, 2, 2}, {3, 2, 3}, {4, 3, 4}, {2, 3, 2}}) {
    const Shape sh(r1, r2, r3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) REQUIRE(jacobian_rank(sample_chain(sh, seed)) == dims(sh).t);
  }
}

TEST_CASE("jacobian_rank rejects boundary points", "[model]") {
  const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Constant(2, 2, 0.5),
                      Eigen::MatrixXd::Constant(2, 2, 0.5));
  try {
    (void)jacobian_rank(p);
    FAIL("expected BoundaryPoint");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::BoundaryPoint);
  }
}

TEST_CASE("numerical_rank uses a relative cutoff", "[model]") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-7;
  m(2, 2) = 1e-9;
  REQUIRE(numerical_rank(m) == 2);
  REQUIRE(numerical_rank(Eigen::MatrixXd::Zero(2, 2)) == 0);
}
