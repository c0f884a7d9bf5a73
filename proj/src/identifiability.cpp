#include "lcgeom/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcgeom/error.hpp"
#include "lcgeom/likelihood.hpp"
#include "lcgeom/reparam.hpp"

namespace lcgeom {

namespace {

constexpr double kIdentityAdmission = 1e-6;
constexpr int kRefineRounds = 10;
constexpr double kRefineFactor = 1e-3;

// Y2 copies Y1 (r2 >= r1) or Y3 (r2 >= r3); extra latent states get no mass.
ChainParams construct_witness(const MarginalTable& target, int r2) {
  const Eigen::MatrixXd& d = target.cells();
  const int r1 = target.r1(), r3 = target.r3();
  const Shape shape(r1, r2, r3);
  const Eigen::VectorXd rows = d.rowwise().sum();
  Eigen::VectorXd p1 = rows / rows.sum();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r1, r2);
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(r2, r3, 1.0 / r3);
  if (r2 >= r1) {
    for (int i = 0; i < r1; ++i) {
      a(i, i) = 1.0;
      if (rows(i) > 0.0) b.row(i) = d.row(i) / rows(i);
    }
  } else {
    for (int k = 0; k < r3; ++k) b.row(k) = Eigen::RowVectorXd::Unit(r3, k);
    for (int i = 0; i < r1; ++i) {
      if (rows(i) > 0.0) {
        a.row(i).head(r3) = d.row(i) / rows(i);
      } else {
        a.row(i).head(r3).setConstant(1.0 / r3);
      }
    }
  }
  return ChainParams(shape, std::move(p1), std::move(a), std::move(b));
}

}  // namespace

const char* to_string(Proof p) {
  switch (p) {
    case Proof::None: return "none";
    case Proof::Rank: return "rank";
    case Proof::Identity323: return "identity_323";
    case Proof::Construction: return "construction";
    case Proof::Search: return "search";
  }
  return "none";
}

MarginalTable example1_marginal(int r1, int r3) {
  if (r1 < 2 || r3 < r1) throw Error(ErrorCode::InvalidArgument, "needs 2 <= r1 <= r3");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(r1, r3);
  for (int i = 0; i < r1; ++i) d(i, i) = 1.0 / r1;
  return MarginalTable(std::move(d));
}

ConsistencyReport consistency_check(const MarginalTable& target, int r2, const ConsistencyOptions& options) {
  if (r2 < 2) throw Error(ErrorCode::InvalidArgument, "r2 must be >= 2");
  if (options.restarts < 1) throw Error(ErrorCode::InvalidArgument, "at least one restart required");
  const int r1 = target.r1(), r3 = target.r3();
  ConsistencyReport report;
  report.best_divergence = std::numeric_limits<double>::infinity();

  const bool rank_ok = numerical_rank(target.cells()) <= r2;
  report.necessary_checks.emplace_back("rank", rank_ok);
  if (!rank_ok) {
    report.proven_by = Proof::Rank;
    return report;
  }
  if (r1 == 3 && r3 == 3 && r2 == 2 && (target.cells().array() > 0.0).all()) {
    const bool identity_ok = std::abs(check_marginal_identity_323(cross_ratios(target))) < kIdentityAdmission;
    report.necessary_checks.emplace_back("identity_323", identity_ok);
    if (!identity_ok) {
      report.proven_by = Proof::Identity323;
      return report;
    }
  }

  if (r2 >= std::min(r1, r3)) {
    ChainParams witness = construct_witness(target, r2);
    const double kl = kl_divergence(target, witness);
    if (kl < options.tol) {
      report.feasible = true;
      report.proven_by = Proof::Construction;
      report.best_divergence = kl;
      report.witness = std::move(witness);
      return report;
    }
  }

  const Shape shape(r1, r2, r3);
  EmOptions em;
  em.max_iter = options.max_iter;
  em.tol = 0.0;  // run the full iteration budget
  for (int r = 0; r < options.restarts; ++r) {
    EmFit fit = em_weighted(target.cells(), shape, derive_seed(options.seed, static_cast<std::uint64_t>(r)), em);
    const double kl = kl_divergence(target, fit.params);
    ++report.restarts_run;
    if (kl < report.best_divergence) {
      report.best_divergence = kl;
      report.witness = std::move(fit.params);
    }
    if (report.best_divergence < options.tol) break;
  }
  if (report.best_divergence < options.tol) {
    report.feasible = true;
    report.proven_by = Proof::Search;
    // Plain EM can crawl near the boundary; polish the witness with the
    // accelerated iteration so it reproduces the target well below tol.
    for (int round = 0; round < kRefineRounds && report.best_divergence > options.tol * kRefineFactor; ++round) {
      EmFit more = em_squarem(target.cells(), *report.witness, em);
      const double kl = kl_divergence(target, more.params);
      if (!(kl < report.best_divergence)) break;
      report.best_divergence = kl;
      report.witness = std::move(more.params);
    }
  }
  return report;
}

ConstraintCount constraint_count(const Shape& shape) {
  const Dims d = dims(shape);
  return {d.constraint_count, d.dim_case == DimCase::R2Large};
}

bool is_regular(const ChainParams& params) {
  return (params.a().array() > 0.0).all() || (params.b().array() > 0.0).all();
}

ChainParams embed_extra_state(const ChainParams& params) {
  const Shape& sh = params.shape();
  const Shape bigger(sh.r1(), sh.r2() + 1, sh.r3());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(sh.r1(), sh.r2() + 1);
  a.leftCols(sh.r2()) = params.a();
  Eigen::MatrixXd b(sh.r2() + 1, sh.r3());
  b.topRows(sh.r2()) = params.b();
  b.row(sh.r2()).setConstant(1.0 / sh.r3());
  return ChainParams(bigger, params.p1(), std::move(a), std::move(b));
}

}  // namespace lcgeom
