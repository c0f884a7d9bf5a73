#pragma once

// The (delta, lambda) coordinates theta(i,j,k) = delta(i,k) * lambda_j(i,k),
// cross-ratios of the observed margin, and the closed-form fiber solvers for
// the binary and the 3x2x3 models.
//
// For r2 = 2 the solvers work with the single slice lambda(i,k) =
// lambda_1(i,k) = p(Y2 = 1 | Y1 = i, Y3 = k); lambda_2 = 1 - lambda_1.

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcgeom/model.hpp"

namespace lcgeom {

class LambdaField {
 public:
  // values[(i * r3 + k) * r2 + j]; unconstrained marks cells with delta = 0.
  LambdaField(Shape shape, std::vector<double> values, std::vector<bool> unconstrained);

  // r2 = 2 field from its lambda_1 slice (r1 x r3).
  static LambdaField from_slice(Shape shape, const Eigen::MatrixXd& lambda1);

  const Shape& shape() const noexcept { return shape_; }
  double operator()(int i, int k, int j) const noexcept {
    return values_[(static_cast<std::size_t>(i) * shape_.r3() + k) * shape_.r2() + j];
  }
  bool unconstrained(int i, int k) const noexcept {
    return unconstrained_[static_cast<std::size_t>(i) * shape_.r3() + k];
  }
  Eigen::MatrixXd slice(int j) const;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<bool> unconstrained_;
};

struct SplitTable {
  MarginalTable marginal;
  LambdaField lambdas;
};

SplitTable split(const JointTable& joint);
JointTable merge(const MarginalTable& marginal, const LambdaField& lambdas);

// z(i,k) = delta(I,K) delta(i,k) / (delta(I,k) delta(i,K)) for i != I, k != K.
class CrossRatios {
 public:
  CrossRatios(RefCell ref, int r1, int r3, Eigen::MatrixXd values);

  RefCell ref() const noexcept { return ref_; }
  int r1() const noexcept { return r1_; }
  int r3() const noexcept { return r3_; }
  // Full-table indices; the reference row/column give 1.
  double at(int i, int k) const;
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  // 3x3 names: z1 = z(i1,k1), z2 = z(i1,k2), z3 = z(i2,k1), z4 = z(i2,k2),
  // with i1 < i2 and k1 < k2 the non-reference states.
  double z1() const { return values_(0, 0); }
  double z2() const { return values_(0, 1); }
  double z3() const { return values_(1, 0); }
  double z4() const { return values_(1, 1); }

 private:
  RefCell ref_;
  int r1_;
  int r3_;
  Eigen::MatrixXd values_;
};

CrossRatios cross_ratios(const MarginalTable& marginal, RefCell ref = {});

// ---- binary model -------------------------------------------------------

struct BinaryFiberSolution {
  double z;
  double c1;  // lambda(2,1)
  double c2;  // lambda(1,2)
  // (lambda(1,1), lambda(2,2)), ascending in the first coordinate.
  std::vector<std::pair<double, double>> points;
};

// Residuals of the linear and quadric equations of the binary system.
std::array<double, 2> binary_system_residuals(double z, double l11, double l12, double l21, double l22);

// Intersections of l11 + l22 = 1 - (1 - c1 - c2)/z with z l11 l22 = c1 c2.
BinaryFiberSolution binary_fiber_solve(double z, double c1, double c2);

struct BinarySurfacePoint {
  double lam21;
  double lam11;
};

// Solves for (lambda(2,1), lambda(1,1)) given lambda(1,2), lambda(2,2), z.
// Admissible when z lies between lambda12/lambda22 and
// (1 - lambda12)/(1 - lambda22).
BinarySurfacePoint binary_surface(double lam12, double lam22, double z);

// ---- 3x2x3 model --------------------------------------------------------

// z1 z4 - z2 z3 - (z1 + z4) + (z2 + z3); the determinant of the margin
// rescaled to unit reference row and column.
double check_marginal_identity_323(const CrossRatios& z);

// Eight residuals over (i,k) in non-reference states, i outer: the j = 1
// product equation then the j = 2 product equation.
std::array<double, 8> eq12_residuals(const CrossRatios& z, const Eigen::Matrix3d& lambda1);

inline constexpr double kVarietyTolerance = 1e-8;
inline constexpr double kFiberResidualTolerance = 1e-9;

// Free parameters are lambda(i1, K) and lambda(i1, k1) (lambda(2,1) and
// lambda(2,2) for the reference cell (1,1)). Returns the lambda_1 slice.
Eigen::Matrix3d solve_fiber_323(const CrossRatios& z, double lam21, double lam22);

struct PrintedFormulaAudit {
  std::string coordinate;
  std::optional<double> printed;
  double solved;
  bool agrees;
};

// Evaluates the published closed forms for reference cell (1,1) next to the
// elimination solution.
std::vector<PrintedFormulaAudit> audit_printed_323(const CrossRatios& z, double lam21, double lam22);

// Boundary family with lambda(I, .) == value (value is 0 or 1). Free
// parameters are lambda(i, K) for the two non-reference rows in ascending
// order.
Eigen::Matrix3d degenerate_family_323(const CrossRatios& z, int value, double free_first, double free_second);

}  // namespace lcgeom
