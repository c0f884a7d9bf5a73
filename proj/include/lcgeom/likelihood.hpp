#pragma once

// Multinomial likelihood of observed (Y1, Y3) counts, EM fitting of the
// latent chain, and profiles along the unidentifiable fiber.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lcgeom/fiber.hpp"
#include "lcgeom/model.hpp"

namespace lcgeom {

// Returned by loglik when a cell with positive count has zero model mass.
inline constexpr double kLogLikNegInf = -std::numeric_limits<double>::infinity();

class CountTable {
 public:
  explicit CountTable(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts);

  int r1() const noexcept { return static_cast<int>(counts_.rows()); }
  int r3() const noexcept { return static_cast<int>(counts_.cols()); }
  std::int64_t operator()(int i, int k) const noexcept { return counts_(i, k); }
  std::int64_t total() const noexcept { return total_; }
  Eigen::MatrixXd as_weights() const { return counts_.cast<double>(); }

 private:
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts_;
  std::int64_t total_ = 0;
};

// Seeded multinomial draw of n observations from a marginal.
CountTable sample_counts(const MarginalTable& marginal, std::int64_t n, std::uint64_t seed);

// sum_{i,k} w(i,k) log delta(i,k), or kLogLikNegInf on a support mismatch.
double weighted_loglik(const Eigen::MatrixXd& weights, const ChainParams& params);
double loglik(const CountTable& counts, const ChainParams& params);

// KL(target || marginal of params); +inf on a support mismatch.
double kl_divergence(const MarginalTable& target, const ChainParams& params);
double kl_divergence(const MarginalTable& target, const MarginalTable& model);

struct EmOptions {
  int max_iter = 2000;
  // Stop once the per-unit-weight log-likelihood gain falls below this.
  double tol = 1e-12;
  // Fresh-seed restarts allowed after a zero-denominator E-step.
  int max_restarts = 8;
};

struct EmFit {
  ChainParams params;
  double loglik;
  int iterations;
  bool converged;
  bool monotone;        // no step lost more than 1e-12 * max(1, |loglik|)
  int restarts;         // zero-denominator restarts taken
  std::vector<double> trace;  // log-likelihood after each iteration
};

// EM on non-negative cell weights (counts or a target probability table).
EmFit em_weighted(const Eigen::MatrixXd& weights, const Shape& shape, std::uint64_t seed, const EmOptions& options = {});
// EM from given parameters, without restarts. Stops early (keeping the last
// iterate) if an E-step denominator vanishes.
EmFit em_continue(const Eigen::MatrixXd& weights, const ChainParams& start, const EmOptions& options = {});

// Squared-extrapolation (SQUAREM) acceleration of em_continue. Each
// iteration is two EM steps plus an extrapolated step, kept only when it does
// not lower the log-likelihood.
EmFit em_squarem(const Eigen::MatrixXd& weights, const ChainParams& start, const EmOptions& options = {});

EmFit em_fit(const CountTable& counts, const Shape& shape, std::uint64_t seed, const EmOptions& options = {});

struct ProfilePoint {
  double t;
  double loglik;
  double min_entry;  // smallest entry of the transformed a and b
};

struct ProfileTrace {
  std::vector<ProfilePoint> points;
  ChainParams start;
  MixingMatrix q_end;
  // Set when the straight path (1 - t) I + t q_end leaves the valid region;
  // located by bisection between the last valid and first invalid grid t.
  std::optional<double> exit_t;
};

ProfileTrace profile_along_fiber(const CountTable& counts, const ChainParams& params, const MixingMatrix& q_end,
                                 int steps);

// Relabels latent states: a'(., j) = a(., perm[j]), b'(j, .) = b(perm[j], .).
// Empty perm swaps the two states of an r2 = 2 model.
ChainParams aliasing_pairs(const ChainParams& fit, const std::vector<int>& perm = {});

}  // namespace lcgeom
