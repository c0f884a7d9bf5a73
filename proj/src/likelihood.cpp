#include "lcgeom/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lcgeom/error.hpp"

namespace lcgeom {

namespace {

constexpr double kMonotoneSlack = 1e-12;

Eigen::MatrixXd model_margin(const ChainParams& params) {
  return params.p1().asDiagonal() * (params.a() * params.b());
}

struct EmStep {
  ChainParams next;
  bool zero_denominator;
};

}  // namespace

CountTable::CountTable(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts)
    : counts_(std::move(counts)) {
  if (counts_.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty count table");
  if ((counts_.array() < 0).any()) throw Error(ErrorCode::InvalidArgument, "counts must be non-negative");
  total_ = counts_.sum();
  if (total_ < 1) throw Error(ErrorCode::InvalidArgument, "count table needs at least one observation");
}

CountTable sample_counts(const MarginalTable& marginal, std::int64_t n, std::uint64_t seed) {
  const Eigen::MatrixXd& d = marginal.cells();
  // Row-major cell order, matching the (i, k) reading of the table.
  std::vector<double> probs;
  for (int i = 0; i < d.rows(); ++i)
    for (int k = 0; k < d.cols(); ++k) probs.push_back(d(i, k));
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> cell(probs.begin(), probs.end());
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(d.rows(), d.cols());
  for (std::int64_t draw = 0; draw < n; ++draw) {
    const int c = cell(rng);
    ++counts(c / d.cols(), c % d.cols());
  }
  return CountTable(std::move(counts));
}

double weighted_loglik(const Eigen::MatrixXd& weights, const ChainParams& params) {
  if (weights.rows() != params.shape().r1() || weights.cols() != params.shape().r3())
    throw Error(ErrorCode::ShapeMismatch, "count table and model disagree on (r1, r3)");
  const Eigen::MatrixXd delta = model_margin(params);
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.rows(); ++i)
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
      const double w = weights(i, k);
      if (w == 0.0) continue;
      if (!(delta(i, k) > 0.0)) return kLogLikNegInf;
      total += w * std::log(delta(i, k));
    }
  return total;
}

double loglik(const CountTable& counts, const ChainParams& params) {
  return weighted_loglik(counts.as_weights(), params);
}

double kl_divergence(const MarginalTable& target, const MarginalTable& model) {
  if (target.r1() != model.r1() || target.r3() != model.r3())
    throw Error(ErrorCode::ShapeMismatch, "tables disagree in shape");
  double kl = 0.0;
  for (int i = 0; i < target.r1(); ++i)
    for (int k = 0; k < target.r3(); ++k) {
      const double p = target(i, k);
      if (p == 0.0) continue;
      if (!(model(i, k) > 0.0)) return std::numeric_limits<double>::infinity();
      kl += p * std::log(p / model(i, k));
    }
  return std::max(kl, 0.0);
}

double kl_divergence(const MarginalTable& target, const ChainParams& params) {
  return kl_divergence(target, marginal_13(params));
}

namespace {

EmStep em_step(const Eigen::MatrixXd& w, const ChainParams& cur) {
  const Shape& sh = cur.shape();
  const int r1 = sh.r1(), r2 = sh.r2(), r3 = sh.r3();
  Eigen::VectorXd row_mass = Eigen::VectorXd::Zero(r1);
  Eigen::MatrixXd ij = Eigen::MatrixXd::Zero(r1, r2);  // expected (Y1, Y2) counts
  Eigen::MatrixXd jk = Eigen::MatrixXd::Zero(r2, r3);  // expected (Y2, Y3) counts

  for (int i = 0; i < r1; ++i)
    for (int k = 0; k < r3; ++k) {
      const double wk = w(i, k);
      if (wk == 0.0) continue;
      double denom = 0.0;
      for (int j = 0; j < r2; ++j) denom += cur.a()(i, j) * cur.b()(j, k);
      if (!(denom > 0.0) || !(cur.p1()(i) > 0.0)) return {cur, true};
      row_mass(i) += wk;
      for (int j = 0; j < r2; ++j) {
        const double share = wk * cur.a()(i, j) * cur.b()(j, k) / denom;
        ij(i, j) += share;
        jk(j, k) += share;
      }
    }

  Eigen::VectorXd p1 = row_mass / row_mass.sum();
  Eigen::MatrixXd a = cur.a();
  Eigen::MatrixXd b = cur.b();
  for (int i = 0; i < r1; ++i) {
    const double s = ij.row(i).sum();
    if (s > 0.0) a.row(i) = ij.row(i) / s;
  }
  for (int j = 0; j < r2; ++j) {
    const double s = jk.row(j).sum();
    if (s > 0.0) b.row(j) = jk.row(j) / s;
  }
  // Exact renormalization keeps the row-sum invariant at machine precision.
  p1 /= p1.sum();
  for (int i = 0; i < r1; ++i) a.row(i) /= a.row(i).sum();
  for (int j = 0; j < r2; ++j) b.row(j) /= b.row(j).sum();
  return {ChainParams(sh, std::move(p1), std::move(a), std::move(b)), false};
}

}  // namespace

namespace {

void check_weights(const Eigen::MatrixXd& weights, const Shape& shape) {
  if (weights.rows() != shape.r1() || weights.cols() != shape.r3())
    throw Error(ErrorCode::ShapeMismatch, "weights disagree with shape");
  if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0))
    throw Error(ErrorCode::InvalidArgument, "weights must be non-negative with positive total");
}

// Iterates from start; zero_denominator reports an ill-defined E-step (the
// returned fit then holds the last good iterate).
EmFit run_em(const Eigen::MatrixXd& weights, ChainParams cur, const EmOptions& options, bool& zero_denominator) {
  const double total = weights.sum();
  double ll = weighted_loglik(weights, cur);
  EmFit fit{cur, ll, 0, false, true, 0, {}};
  zero_denominator = false;
  for (int it = 0; it < options.max_iter; ++it) {
    EmStep step = em_step(weights, cur);
    if (step.zero_denominator) {
      zero_denominator = true;
      break;
    }
    const double next_ll = weighted_loglik(weights, step.next);
    if (next_ll < ll - kMonotoneSlack * std::max(1.0, std::abs(ll))) fit.monotone = false;
    fit.trace.push_back(next_ll);
    const double gain = (next_ll - ll) / total;
    cur = std::move(step.next);
    ll = next_ll;
    fit.iterations = it + 1;
    if (gain >= 0.0 && gain < options.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.params = std::move(cur);
  fit.loglik = ll;
  return fit;
}

}  // namespace

EmFit em_weighted(const Eigen::MatrixXd& weights, const Shape& shape, std::uint64_t seed, const EmOptions& options) {
  check_weights(weights, shape);
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t run_seed = attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
    bool restart = false;
    EmFit fit = run_em(weights, sample_chain(shape, run_seed), options, restart);
    fit.restarts = attempt;
    if (restart && attempt < options.max_restarts) continue;
    return fit;
  }
}

EmFit em_continue(const Eigen::MatrixXd& weights, const ChainParams& start, const EmOptions& options) {
  check_weights(weights, start.shape());
  bool stopped = false;
  return run_em(weights, start, options, stopped);
}

namespace {

Eigen::VectorXd pack(const ChainParams& p) {
  Eigen::VectorXd v(p.p1().size() + p.a().size() + p.b().size());
  v << p.p1(), p.a().reshaped(), p.b().reshaped();
  return v;
}

// Unpacks and renormalizes; empty when an entry is negative.
std::optional<ChainParams> unpack(const Eigen::VectorXd& v, const Shape& sh) {
  if ((v.array() < 0.0).any() || !v.allFinite()) return std::nullopt;
  const Eigen::Index n1 = sh.r1(), na = sh.r1() * sh.r2();
  Eigen::VectorXd p1 = v.head(n1);
  Eigen::MatrixXd a = v.segment(n1, na).reshaped(sh.r1(), sh.r2());
  Eigen::MatrixXd b = v.tail(sh.r2() * sh.r3()).reshaped(sh.r2(), sh.r3());
  p1 /= p1.sum();
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) /= a.row(i).sum();
  for (Eigen::Index j = 0; j < b.rows(); ++j) b.row(j) /= b.row(j).sum();
  return ChainParams(sh, std::move(p1), std::move(a), std::move(b));
}

}  // namespace

EmFit em_squarem(const Eigen::MatrixXd& weights, const ChainParams& start, const EmOptions& options) {
  check_weights(weights, start.shape());
  const Shape& sh = start.shape();
  const double total = weights.sum();
  ChainParams cur = start;
  double ll = weighted_loglik(weights, cur);
  EmFit fit{cur, ll, 0, false, true, 0, {}};
  for (int it = 0; it < options.max_iter; ++it) {
    EmStep s1 = em_step(weights, cur);
    if (s1.zero_denominator) break;
    EmStep s2 = em_step(weights, s1.next);
    if (s2.zero_denominator) break;
    const Eigen::VectorXd x0 = pack(cur), x1 = pack(s1.next), x2 = pack(s2.next);
    const Eigen::VectorXd r = x1 - x0, v = x2 - x1 - r;
    ChainParams next = s2.next;
    double next_ll = weighted_loglik(weights, next);
    if (v.norm() > 0.0) {
      // Steplength -|r|/|v|, pulled back towards -1 (plain double step) until
      // the extrapolation stays in the simplex.
      for (double alpha = std::min(-1.0, -r.norm() / v.norm()); alpha < -1.0; alpha = 0.5 * (alpha - 1.0)) {
        auto trial = unpack(x0 - 2.0 * alpha * r + alpha * alpha * v, sh);
        if (!trial) continue;
        EmStep s3 = em_step(weights, *trial);
        if (s3.zero_denominator) continue;
        const double trial_ll = weighted_loglik(weights, s3.next);
        if (trial_ll >= next_ll) {
          next = std::move(s3.next);
          next_ll = trial_ll;
        }
        break;
      }
    }
    if (next_ll < ll - kMonotoneSlack * std::max(1.0, std::abs(ll))) fit.monotone = false;
    fit.trace.push_back(next_ll);
    const double gain = (next_ll - ll) / total;
    cur = std::move(next);
    ll = next_ll;
    fit.iterations = it + 1;
    if (gain >= 0.0 && gain < options.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.params = std::move(cur);
  fit.loglik = ll;
  return fit;
}

EmFit em_fit(const CountTable& counts, const Shape& shape, std::uint64_t seed, const EmOptions& options) {
  return em_weighted(counts.as_weights(), shape, seed, options);
}

ProfileTrace profile_along_fiber(const CountTable& counts, const ChainParams& params, const MixingMatrix& q_end,
                                 int steps) {
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "profile needs at least two steps");
  const int r2 = params.shape().r2();
  if (q_end.size() != r2) throw Error(ErrorCode::ShapeMismatch, "mixing matrix must be r2 x r2");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r2, r2);

  auto transform = [&](double t) -> std::optional<ChainParams> {
    try {
      return apply_mixing(params, MixingMatrix((1.0 - t) * eye + t * q_end.q()));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidMixing || e.code() == ErrorCode::SingularMixing) return std::nullopt;
      throw;
    }
  };

  ProfileTrace trace{{}, params, q_end, std::nullopt};
  double last_valid = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / (steps - 1);
    auto moved = transform(t);
    if (!moved) {
      double lo = last_valid, hi = t;
      for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (transform(mid) ? lo : hi) = mid;
      }
      trace.exit_t = lo;
      break;
    }
    const double min_entry = std::min(moved->a().minCoeff(), moved->b().minCoeff());
    trace.points.push_back({t, loglik(counts, *moved), min_entry});
    last_valid = t;
  }
  return trace;
}

ChainParams aliasing_pairs(const ChainParams& fit, const std::vector<int>& perm) {
  const int r2 = fit.shape().r2();
  std::vector<int> order = perm;
  if (order.empty()) {
    if (r2 != 2) throw Error(ErrorCode::InvalidArgument, "default relabeling swaps two states; pass a permutation");
    order = {1, 0};
  }
  std::vector<int> check = order;
  std::sort(check.begin(), check.end());
  std::vector<int> expect(r2);
  std::iota(expect.begin(), expect.end(), 0);
  if (check != expect) throw Error(ErrorCode::InvalidArgument, "not a permutation of the latent states");

  Eigen::MatrixXd a(fit.a().rows(), r2), b(r2, fit.b().cols());
  for (int j = 0; j < r2; ++j) {
    a.col(j) = fit.a().col(order[j]);
    b.row(j) = fit.b().row(order[j]);
  }
  return ChainParams(fit.shape(), fit.p1(), std::move(a), std::move(b));
}

}  // namespace lcgeom
