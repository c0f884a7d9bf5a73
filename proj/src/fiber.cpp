#include "lcgeom/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

#include "lcgeom/error.hpp"

namespace lcgeom {

namespace {

struct Cleaned {
  Eigen::MatrixXd m;
  double worst = 0.0;
  Eigen::Index row = -1, col = -1;
};

// snap scales the positive-side snapping threshold with the size of the
// factor that produced m (roundoff in a q^-1 and q b grows with it).
Cleaned clean_rows(Eigen::MatrixXd m, double snap) {
  Cleaned out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double& x = m(r, c);
      if (x < out.worst) {
        out.worst = x;
        out.row = r;
        out.col = c;
      }
      if (std::abs(x) <= snap || (x < 0.0 && x >= -kViolationTolerance)) x = 0.0;
    }
    m.row(r) /= m.row(r).sum();
  }
  out.m = std::move(m);
  return out;
}

// (pi, rho) pairs that push a two-state conditional column to the boundary.
std::vector<std::pair<double, double>> degenerate_corners(const Eigen::VectorXd& first_col, MixingBranch branch) {
  const double lo = first_col.minCoeff();
  const double hi = first_col.maxCoeff();
  const bool above = branch == MixingBranch::PiAboveRho;
  if (hi - lo > kDetFloor) {
    return above ? std::vector<std::pair<double, double>>{{hi, lo}} : std::vector<std::pair<double, double>>{{lo, hi}};
  }
  // Constant column: the fully degenerate corner is singular, use its two
  // neighbours instead.
  if (above) return {{lo, 0.0}, {1.0, lo}};
  return {{0.0, lo}, {lo, 1.0}};
}

bool zero_in_each_column(const Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (!(m.col(c).array() == 0.0).any()) return false;
  return true;
}

bool zero_in_each_row(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (!(m.row(r).array() == 0.0).any()) return false;
  return true;
}

// Forward mixing that realizes the two-state construction on the reversed
// chain Y3 -> Y2 -> Y1. Rows of q b lie on the line b(2,.) + t (b(1,.) - b(2,.));
// the reversed-chain vertex puts them at the two ends of that line inside the
// simplex. Empty when the rows of b coincide.
std::optional<MixingMatrix> reversed_mixing(const ChainParams& params, MixingBranch branch) {
  const Eigen::RowVectorXd b0 = params.b().row(0), b1 = params.b().row(1);
  const Eigen::RowVectorXd d = b0 - b1;
  double t_lo = -std::numeric_limits<double>::infinity(), t_hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (d(k) > 0.0) t_lo = std::max(t_lo, -b1(k) / d(k));
    if (d(k) < 0.0) t_hi = std::min(t_hi, b1(k) / -d(k));
  }
  if (!std::isfinite(t_lo) || !std::isfinite(t_hi)) return std::nullopt;
  const bool above = branch == MixingBranch::PiAboveRho;
  return MixingMatrix::from_pi_rho(above ? t_hi : t_lo, above ? t_lo : t_hi);
}

}  // namespace

MixingMatrix::MixingMatrix(Eigen::MatrixXd q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols() || q_.rows() < 2) throw Error(ErrorCode::ShapeMismatch, "mixing matrix must be square");
  if (!q_.allFinite()) throw Error(ErrorCode::InvalidArgument, "mixing matrix has non-finite entries");
  for (Eigen::Index r = 0; r < q_.rows(); ++r)
    if (std::abs(q_.row(r).sum() - 1.0) > kSumTolerance)
      throw Error(ErrorCode::InvalidArgument, "mixing matrix row " + std::to_string(r + 1) + " does not sum to 1");
  if (std::abs(q_.determinant()) <= kDetFloor) throw Error(ErrorCode::SingularMixing, "|det q| <= 1e-12");
}

MixingMatrix MixingMatrix::identity(int r2) { return MixingMatrix(Eigen::MatrixXd::Identity(r2, r2)); }

MixingMatrix MixingMatrix::from_pi_rho(double pi, double rho) {
  Eigen::MatrixXd q(2, 2);
  q << pi, 1.0 - pi, rho, 1.0 - rho;
  return MixingMatrix(std::move(q));
}

ChainParams apply_mixing(const ChainParams& params, const MixingMatrix& q) {
  if (q.size() != params.shape().r2()) throw Error(ErrorCode::ShapeMismatch, "mixing matrix must be r2 x r2");
  const Eigen::MatrixXd inv = q.q().inverse();
  auto snap = [](const Eigen::MatrixXd& m) {
    return kSnapTolerance * std::max(1.0, m.cwiseAbs().rowwise().sum().maxCoeff());
  };
  Cleaned a = clean_rows(params.a() * inv, snap(inv));
  Cleaned b = clean_rows(q.q() * params.b(), snap(q.q()));
  for (const Cleaned* side : {&a, &b}) {
    if (side->worst < -kViolationTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << (side == &a ? "a'" : "b'") << "(" << side->row + 1 << "," << side->col + 1 << ") = " << side->worst
          << " is negative";
      throw Error(ErrorCode::InvalidMixing, msg.str());
    }
  }
  return ChainParams(params.shape(), params.p1(), std::move(a.m), std::move(b.m));
}

RhoPiBounds rho_pi_bounds(const ChainParams& params) {
  if (params.shape().r2() != 2) throw Error(ErrorCode::InvalidArgument, "rho/pi bounds need r2 = 2");
  Eigen::Index lo = 0, hi = 0;
  const double rho_max = params.a().col(0).minCoeff(&lo);
  const double pi_min = params.a().col(0).maxCoeff(&hi);
  return {rho_max, pi_min, static_cast<int>(lo), static_cast<int>(hi)};
}

std::vector<ExtremeVertex> extreme_mixings(const ChainParams& params) {
  const RhoPiBounds bounds = rho_pi_bounds(params);
  if (bounds.rho_max <= 0.0 || bounds.pi_min >= 1.0)
    throw Error(ErrorCode::DegenerateInput, "p(Y2|Y1) already lies on the fiber boundary");

  const Eigen::RowVectorXd p2 = params.p1().transpose() * params.a();
  const Eigen::RowVectorXd p3 = p2 * params.b();
  Eigen::VectorXd reversed_col(params.shape().r3());  // p(Y2 = 1 | Y3 = k)
  for (int k = 0; k < reversed_col.size(); ++k) reversed_col(k) = p2(0) * params.b()(0, k) / p3(k);
  if (reversed_col.minCoeff() <= 0.0 || reversed_col.maxCoeff() >= 1.0)
    throw Error(ErrorCode::DegenerateInput, "p(Y2|Y3) already lies on the fiber boundary");

  std::vector<ExtremeVertex> out;
  auto push = [&](MixingMatrix q, MixingSide side, MixingBranch branch) {
    const ChainParams moved = apply_mixing(params, q);
    const double pi = q.q()(0, 0), rho = q.q()(1, 0);
    out.push_back({std::move(q), side, branch, pi, rho, zero_in_each_column(moved.a()), zero_in_each_row(moved.b())});
  };
  for (MixingBranch branch : {MixingBranch::PiAboveRho, MixingBranch::PiBelowRho}) {
    for (auto [pi, rho] : degenerate_corners(params.a().col(0), branch))
      push(MixingMatrix::from_pi_rho(pi, rho), MixingSide::Y1Side, branch);
    if (auto q = reversed_mixing(params, branch)) push(std::move(*q), MixingSide::Y3Side, branch);
  }
  return out;
}

std::size_t fiber_proposal_cap(std::size_t n) { return std::max<std::size_t>(1000, 100 * n); }

FiberSample sample_fiber(const ChainParams& params, std::size_t n, std::uint64_t seed) {
  FiberSample out;
  if (n == 0) return out;
  if (!params.interior()) throw Error(ErrorCode::BoundaryPoint, "fiber sampling needs an interior point");

  const int r2 = params.shape().r2();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t cap = fiber_proposal_cap(n);
  double step = 0.5;
  std::size_t window = 0, window_hits = 0;

  while (out.points.size() < n && out.proposals < cap) {
    Eigen::MatrixXd m(r2, r2);
    for (int r = 0; r < r2; ++r)
      for (int c = 0; c < r2; ++c) m(r, c) = gauss(rng);
    m.colwise() -= m.rowwise().mean();
    ++out.proposals;
    ++window;
    try {
      MixingMatrix q(Eigen::MatrixXd::Identity(r2, r2) + step * m);
      out.points.push_back(apply_mixing(params, q));
      ++window_hits;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidMixing && e.code() != ErrorCode::SingularMixing) throw;
    }
    if (window == 20) {
      // Steer towards roughly one acceptance in four.
      const double rate = static_cast<double>(window_hits) / static_cast<double>(window);
      step *= rate > 0.25 ? 1.25 : 0.8;
      window = window_hits = 0;
    }
  }
  out.stalled = out.points.size() < n;
  return out;
}

FiberDimensionReport fiber_dimension_report(const ChainParams& params) {
  const bool a_pos = params.a().minCoeff() > kInteriorEps;
  const bool b_pos = params.b().minCoeff() > kInteriorEps;
  if (params.p1().minCoeff() <= kInteriorEps || (!a_pos && !b_pos))
    throw Error(ErrorCode::BoundaryPoint, "fiber dimension needs p(Y1) > 0 and a non-degenerate a or b");

  const Shape& sh = params.shape();
  const int r2 = sh.r2();
  const int dof = r2 * (r2 - 1);
  auto image = [&](const Eigen::VectorXd& u) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(r2, r2);
    for (int j = 0; j < r2; ++j)
      for (int l = 0; l + 1 < r2; ++l) {
        const double v = u(j * (r2 - 1) + l);
        q(j, l) += v;
        q(j, r2 - 1) -= v;
      }
    const Eigen::MatrixXd a = params.a() * q.inverse();
    const Eigen::MatrixXd b = q * params.b();
    Eigen::VectorXd chart(sh.r1() * (r2 - 1) + r2 * (sh.r3() - 1));
    Eigen::Index n = 0;
    for (int i = 0; i < sh.r1(); ++i)
      for (int j = 0; j + 1 < r2; ++j) chart(n++) = a(i, j);
    for (int j = 0; j < r2; ++j)
      for (int k = 0; k + 1 < sh.r3(); ++k) chart(n++) = b(j, k);
    return chart;
  };

  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(dof);
  Eigen::MatrixXd jac(image(origin).size(), dof);
  for (int c = 0; c < dof; ++c) {
    Eigen::VectorXd hi = origin, lo = origin;
    hi(c) += kFiniteDiffStep;
    lo(c) -= kFiniteDiffStep;
    jac.col(c) = (image(hi) - image(lo)) / (2.0 * kFiniteDiffStep);
  }
  return {numerical_rank(jac), a_pos != b_pos};
}

int fiber_dimension(const ChainParams& params) { return fiber_dimension_report(params).rank; }

}  // namespace lcgeom
