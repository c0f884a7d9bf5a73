#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "lcgeom/error.hpp"
#include "lcgeom/fiber.hpp"
#include "support.hpp"

using namespace lcgeom;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no lcgeom::Error thrown");
  return ErrorCode::InvalidArgument;
}

// Margin computed by the oracle from the factors alone.
oracle::Table2 margin_of(const ChainParams& p) { return oracle::margin(support::to_chain(p)); }

// Small zero-row-sum perturbation of the identity.
Eigen::MatrixXd near_identity(int r2, double t, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r2, r2);
  for (int r = 0; r < r2; ++r)
    for (int c = 0; c < r2; ++c) m(r, c) = g(rng);
  for (int r = 0; r < r2; ++r) m.row(r).array() -= m.row(r).mean();
  return Eigen::MatrixXd::Identity(r2, r2) + t * m;
}

bool has_zero_in_each_column(const Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (!(m.col(c).array() == 0.0).any()) return false;
  return true;
}

bool has_zero_in_each_row(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (!(m.row(r).array() == 0.0).any()) return false;
  return true;
}

}  // namespace

TEST_CASE("MixingMatrix construction", "[fiber]") {
  REQUIRE(MixingMatrix::identity(3).q() == Eigen::MatrixXd::Identity(3, 3));
  const auto q = MixingMatrix::from_pi_rho(0.9, 0.1);
  REQUIRE(q.q()(0, 1) == 1.0 - 0.9);
  REQUIRE(q.q()(1, 0) == 0.1);
  REQUIRE(code_of([] { (void)MixingMatrix::from_pi_rho(0.4, 0.4); }) == ErrorCode::SingularMixing);
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.2, 0.8;
  REQUIRE(code_of([&] { (void)MixingMatrix(bad); }) == ErrorCode::InvalidArgument);
  REQUIRE(code_of([] { (void)MixingMatrix(Eigen::MatrixXd::Identity(2, 3)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("apply_mixing", "[fiber]") {
  const ChainParams p = support::to_params(oracle::random_chain(3, 2, 3, 1));
  SECTION("identity leaves the parameters unchanged") {
    const ChainParams same = apply_mixing(p, MixingMatrix::identity(2));
    REQUIRE((same.a() - p.a()).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE((same.b() - p.b()).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE(same.p1() == p.p1());
  }
  SECTION("marginal preserved for random valid q") {
    std::mt19937_64 rng(5);
    int used = 0;
    for (int rep = 0; rep < 300 && used < 100; ++rep) {
      try {
        const ChainParams moved = apply_mixing(p, MixingMatrix(near_identity(2, 0.1, rng)));
        REQUIRE(support::max_diff(margin_of(moved), margin_of(p)) < 1e-12);
        ++used;
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::InvalidMixing);
      }
    }
    REQUIRE(used == 100);
  }
  SECTION("leaving the polytope") {
    // a' = a q^-1 goes negative once rho exceeds min a(., 1).
    const auto b = rho_pi_bounds(p);
    const auto q = MixingMatrix::from_pi_rho(b.pi_min, b.rho_max + 0.05);
    REQUIRE(code_of([&] { (void)apply_mixing(p, q); }) == ErrorCode::InvalidMixing);
  }
  SECTION("shape mismatch") {
    REQUIRE(code_of([&] { (void)apply_mixing(p, MixingMatrix::identity(3)); }) == ErrorCode::ShapeMismatch);
  }
  SECTION("composition") {
    std::mt19937_64 rng(8);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ChainParams m = support::to_params(oracle::random_chain(4, 3, 4, seed));
      const MixingMatrix q1(near_identity(3, 0.02, rng)), q2(near_identity(3, 0.02, rng));
      try {
        const ChainParams two = apply_mixing(apply_mixing(m, q1), q2);
        const ChainParams one = apply_mixing(m, MixingMatrix(q2.q() * q1.q()));
        REQUIRE((two.a() - one.a()).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((two.b() - one.b()).cwiseAbs().maxCoeff() < 1e-12);
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::InvalidMixing);
      }
    }
  }
}

TEST_CASE("rho_pi_bounds", "[fiber]") {
  SECTION("direct min and max") {
    Eigen::MatrixXd a(3, 2);
    a << 0.2, 0.8, 0.5, 0.5, 0.7, 0.3;
    const ChainParams p(Shape(3, 2, 2), Eigen::Vector3d::Constant(1.0 / 3), a, Eigen::MatrixXd::Constant(2, 2, 0.5));
    const auto b = rho_pi_bounds(p);
    REQUIRE(b.rho_max == 0.2);
    REQUIRE(b.pi_min == 0.7);
    REQUIRE(b.rho_index == 0);
    REQUIRE(b.pi_index == 2);
  }
  SECTION("constant first column pinches") {
    Eigen::MatrixXd a(2, 2);
    a << 0.4, 0.6, 0.4, 0.6;
    const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(0.5, 0.5), a, Eigen::MatrixXd::Constant(2, 2, 0.5));
    const auto b = rho_pi_bounds(p);
    REQUIRE(b.rho_max == b.pi_min);
  }
  SECTION("rectangle corners are all valid") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ChainParams p = support::to_params(oracle::random_chain(3, 2, 4, seed));
      const auto b = rho_pi_bounds(p);
      for (double rho : {0.0, b.rho_max})
        for (double pi : {b.pi_min, 1.0}) {
          const ChainParams moved = apply_mixing(p, MixingMatrix::from_pi_rho(pi, rho));
          REQUIRE(moved.a().minCoeff() >= 0.0);
          REQUIRE(support::max_diff(margin_of(moved), margin_of(p)) < 1e-12);
          // Mirrored branch.
          const ChainParams mirror = apply_mixing(p, MixingMatrix::from_pi_rho(rho, pi));
          REQUIRE(mirror.a().minCoeff() >= 0.0);
        }
    }
  }
  SECTION("needs r2 = 2") {
    const ChainParams p = support::to_params(oracle::random_chain(3, 3, 3, 0));
    REQUIRE(code_of([&] { (void)rho_pi_bounds(p); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("extreme_mixings", "[fiber]") {
  SECTION("zero patterns on seeded models") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const ChainParams p = support::to_params(oracle::random_chain(2 + seed % 4, 2, 2 + seed / 4 % 4, seed));
      const auto vertices = extreme_mixings(p);
      REQUIRE(vertices.size() == 4);
      int a_side = 0, b_side = 0;
      for (const auto& v : vertices) {
        const ChainParams moved = apply_mixing(p, v.q);
        REQUIRE(support::max_diff(margin_of(moved), margin_of(p)) < 1e-12);
        REQUIRE(moved.a().minCoeff() >= 0.0);
        REQUIRE(moved.b().minCoeff() >= 0.0);
        if (v.side == MixingSide::Y1Side) {
          ++a_side;
          REQUIRE(has_zero_in_each_column(moved.a()));
          REQUIRE(v.zero_in_each_a_column);
          REQUIRE(std::min(v.rho, v.pi) == p.a().col(0).minCoeff());
          REQUIRE(std::max(v.rho, v.pi) == p.a().col(0).maxCoeff());
        } else {
          ++b_side;
          REQUIRE(has_zero_in_each_row(moved.b()));
          REQUIRE(v.zero_in_each_b_row);
        }
        if (v.branch == MixingBranch::PiAboveRho) {
          REQUIRE(v.pi > v.rho);
        } else {
          REQUIRE(v.pi < v.rho);
        }
      }
      REQUIRE(a_side == 2);
      REQUIRE(b_side == 2);
    }
  }
  SECTION("branches are label swaps of each other") {
    const ChainParams p = support::to_params(oracle::random_chain(3, 2, 3, 17));
    const auto v = extreme_mixings(p);
    const ChainParams above = apply_mixing(p, v[0].q), below = apply_mixing(p, v[2].q);
    REQUIRE((above.a().col(0) - below.a().col(1)).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((above.b().row(0) - below.b().row(1)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("constant first column gives the segment corners") {
    Eigen::MatrixXd a(2, 2);
    a << 0.4, 0.6, 0.4, 0.6;
    Eigen::MatrixXd b(2, 3);
    b << 0.2, 0.3, 0.5, 0.6, 0.3, 0.1;
    const ChainParams p(Shape(2, 2, 3), Eigen::Vector2d(0.3, 0.7), a, b);
    for (const auto& v : extreme_mixings(p)) {
      if (v.side != MixingSide::Y1Side) continue;
      const ChainParams moved = apply_mixing(p, v.q);
      REQUIRE(has_zero_in_each_column(moved.a()) == v.zero_in_each_a_column);
      REQUIRE(std::min(v.pi, v.rho) <= 0.4);
      REQUIRE(std::max(v.pi, v.rho) >= 0.4);
    }
  }
  SECTION("input already on the boundary") {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, 1.0, 0.5, 0.5;
    const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(0.5, 0.5), a, Eigen::MatrixXd::Constant(2, 2, 0.5));
    REQUIRE(code_of([&] { (void)extreme_mixings(p); }) == ErrorCode::DegenerateInput);
  }
}

TEST_CASE("sample_fiber", "[fiber]") {
  SECTION("n = 0") {
    const auto s = sample_fiber(support::to_params(oracle::random_chain(2, 2, 2, 0)), 0, 1);
    REQUIRE(s.points.empty());
    REQUIRE_FALSE(s.stalled);
  }
  SECTION("binary model, 50 distinct points on one fiber") {
    const ChainParams p = support::to_params(oracle::random_chain(2, 2, 2, 3));
    const auto s = sample_fiber(p, 50, 99);
    REQUIRE(s.points.size() == 50);
    REQUIRE_FALSE(s.stalled);
    const auto base = margin_of(p);
    for (const auto& x : s.points) REQUIRE(support::max_diff(margin_of(x), base) < 1e-12);
    for (std::size_t u = 0; u < s.points.size(); ++u)
      for (std::size_t v = u + 1; v < s.points.size(); ++v) {
        const double d = std::max((s.points[u].a() - s.points[v].a()).cwiseAbs().maxCoeff(),
                                  (s.points[u].b() - s.points[v].b()).cwiseAbs().maxCoeff());
        REQUIRE(d > 1e-6);
      }
  }
  SECTION("larger latent space") {
    const ChainParams p = support::to_params(oracle::random_chain(4, 3, 4, 2));
    const auto s = sample_fiber(p, 30, 5);
    REQUIRE(s.points.size() == 30);
    for (const auto& x : s.points) REQUIRE(support::max_diff(margin_of(x), margin_of(p)) < 1e-12);
  }
  SECTION("seeded and reproducible") {
    const ChainParams p = support::to_params(oracle::random_chain(3, 2, 3, 4));
    const auto x = sample_fiber(p, 10, 42), y = sample_fiber(p, 10, 42);
    REQUIRE(x.proposals == y.proposals);
    for (std::size_t n = 0; n < 10; ++n) REQUIRE(x.points[n].a() == y.points[n].a());
  }
  SECTION("cap") {
    REQUIRE(fiber_proposal_cap(1) == 1000);
    REQUIRE(fiber_proposal_cap(50) == 5000);
  }
  SECTION("boundary input") {
    const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Constant(2, 2, 0.5),
                        Eigen::MatrixXd::Constant(2, 2, 0.5));
    REQUIRE(code_of([&] { (void)sample_fiber(p, 3, 0); }) == ErrorCode::BoundaryPoint);
  }
}

TEST_CASE("fiber_dimension", "[fiber]") {
  for (auto [r1, r2, r3] : {std::tuple{3, 2, 3}, {4, 3, 4}, {2, 2, 2}, {4, 2, 4}, {5, 3, 5}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      INFO(r1 << "," << r2 << "," << r3 << " seed " << seed);
      REQUIRE(fiber_dimension(sample_chain(Shape(r1, r2, r3), seed)) == r2 * (r2 - 1));
    }
  }
  SECTION("boundary points") {
    const ChainParams p(Shape(2, 2, 2), Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Constant(2, 2, 0.5),
                        Eigen::MatrixXd::Constant(2, 2, 0.5));
    REQUIRE(code_of([&] { (void)fiber_dimension(p); }) == ErrorCode::BoundaryPoint);
  }
  SECTION("one-sided degeneracy is reported") {
    Eigen::MatrixXd a(3, 2);
    a << 0.0, 1.0, 0.3, 0.7, 0.6, 0.4;
    const ChainParams p = support::to_params(oracle::random_chain(3, 2, 3, 1));
    const ChainParams q(Shape(3, 2, 3), p.p1(), a, p.b());
    const auto r = fiber_dimension_report(q);
    REQUIRE(r.one_sided_degenerate);
    REQUIRE(r.rank == 2);
  }
}
