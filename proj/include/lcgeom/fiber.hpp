#pragma once

// Mixing-matrix action on chain parameters. For an invertible r2 x r2 matrix
// q with unit row sums, (a, b) -> (a q^-1, q b) leaves p(Y1, Y3) unchanged;
// the valid q form the unidentifiable fiber through a point.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lcgeom/model.hpp"

namespace lcgeom {

inline constexpr double kDetFloor = 1e-12;
inline constexpr double kSnapTolerance = 1e-12;
inline constexpr double kViolationTolerance = 1e-9;

class MixingMatrix {
 public:
  explicit MixingMatrix(Eigen::MatrixXd q);

  static MixingMatrix identity(int r2);
  // Rows (pi, 1 - pi) and (rho, 1 - rho).
  static MixingMatrix from_pi_rho(double pi, double rho);

  const Eigen::MatrixXd& q() const noexcept { return q_; }
  int size() const noexcept { return static_cast<int>(q_.rows()); }

 private:
  Eigen::MatrixXd q_;
};

// Entries within kSnapTolerance of zero (or negative down to
// -kViolationTolerance) are set to exactly 0 and rows renormalized; larger
// negative entries raise InvalidMixing.
ChainParams apply_mixing(const ChainParams& params, const MixingMatrix& q);

// Validity rectangle of the r2 = 2 action on the pi > rho branch:
// rho in [0, rho_max], pi in [pi_min, 1]. The pi < rho branch is its mirror
// (rho in [pi_min, 1], pi in [0, rho_max]).
struct RhoPiBounds {
  double rho_max;
  double pi_min;
  int rho_index;  // row of a achieving the minimum of a(., 1)
  int pi_index;   // row of a achieving the maximum
};

RhoPiBounds rho_pi_bounds(const ChainParams& params);

enum class MixingSide {
  Y1Side,  // degenerates p(Y2'|Y1): a zero in every column of a'
  Y3Side,  // degenerates p(Y2*, Y3): a zero in every row of b'
};
enum class MixingBranch { PiAboveRho, PiBelowRho };

struct ExtremeVertex {
  MixingMatrix q;
  MixingSide side;
  MixingBranch branch;
  double pi;   // q(1,1)
  double rho;  // q(2,1)
  bool zero_in_each_a_column;
  bool zero_in_each_b_row;
};

std::vector<ExtremeVertex> extreme_mixings(const ChainParams& params);

struct FiberSample {
  std::vector<ChainParams> points;
  std::size_t proposals = 0;
  bool stalled = false;  // acceptance cap hit before n points were found
};

// Proposal cap for sample_fiber: max(1000, 100 n).
std::size_t fiber_proposal_cap(std::size_t n);

FiberSample sample_fiber(const ChainParams& params, std::size_t n, std::uint64_t seed);

struct FiberDimensionReport {
  int rank;
  bool one_sided_degenerate;  // exactly one of a, b has a zero entry
};

// Tangent dimension of the mixing orbit at q = identity.
FiberDimensionReport fiber_dimension_report(const ChainParams& params);
int fiber_dimension(const ChainParams& params);

}  // namespace lcgeom
