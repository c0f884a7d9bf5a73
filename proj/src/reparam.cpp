#include "lcgeom/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lcgeom/error.hpp"

namespace lcgeom {

namespace {

constexpr double kBoxSlack = 1e-12;
constexpr double kDenominatorFloor = 1e-12;

std::string cell_name(const char* symbol, int i, int k) {
  return std::string(symbol) + "(" + std::to_string(i + 1) + "," + std::to_string(k + 1) + ")";
}

// Clamps roundoff excursions back into [0, 1]; larger ones return nullopt.
std::optional<double> into_unit(double v) {
  if (v < -kBoxSlack || v > 1.0 + kBoxSlack || !std::isfinite(v)) return std::nullopt;
  return std::clamp(v, 0.0, 1.0);
}

// Non-reference indices in ascending order.
std::array<int, 2> others(int ref) {
  std::array<int, 2> out{};
  int n = 0;
  for (int s = 0; s < 3; ++s)
    if (s != ref) out[n++] = s;
  return out;
}

void require_323(const CrossRatios& z) {
  if (z.r1() != 3 || z.r3() != 3) throw Error(ErrorCode::ShapeMismatch, "3x3 cross-ratios required");
}

}  // namespace

LambdaField::LambdaField(Shape shape, std::vector<double> values, std::vector<bool> unconstrained)
    : shape_(shape), values_(std::move(values)), unconstrained_(std::move(unconstrained)) {
  const std::size_t pairs = static_cast<std::size_t>(shape_.r1()) * shape_.r3();
  if (values_.size() != pairs * shape_.r2() || unconstrained_.size() != pairs)
    throw Error(ErrorCode::ShapeMismatch, "lambda field size disagrees with shape");
  for (std::size_t p = 0; p < pairs; ++p) {
    double total = 0.0;
    for (int j = 0; j < shape_.r2(); ++j) {
      double v = values_[p * shape_.r2() + j];
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda entry outside [0,1]");
      total += v;
    }
    if (std::abs(total - 1.0) > kSumTolerance)
      throw Error(ErrorCode::InvalidArgument, "lambda conditionals do not sum to 1");
  }
}

LambdaField LambdaField::from_slice(Shape shape, const Eigen::MatrixXd& lambda1) {
  if (shape.r2() != 2 || lambda1.rows() != shape.r1() || lambda1.cols() != shape.r3())
    throw Error(ErrorCode::ShapeMismatch, "slice construction needs r2 = 2 and an r1 x r3 slice");
  std::vector<double> values;
  for (int i = 0; i < shape.r1(); ++i)
    for (int k = 0; k < shape.r3(); ++k) {
      values.push_back(lambda1(i, k));
      values.push_back(1.0 - lambda1(i, k));
    }
  return LambdaField(shape, std::move(values), std::vector<bool>(static_cast<std::size_t>(shape.r1()) * shape.r3()));
}

Eigen::MatrixXd LambdaField::slice(int j) const {
  Eigen::MatrixXd out(shape_.r1(), shape_.r3());
  for (int i = 0; i < shape_.r1(); ++i)
    for (int k = 0; k < shape_.r3(); ++k) out(i, k) = (*this)(i, k, j);
  return out;
}

SplitTable split(const JointTable& joint) {
  const Shape& sh = joint.shape();
  MarginalTable marginal = marginal_13(joint);
  std::vector<double> values;
  std::vector<bool> flags;
  values.reserve(static_cast<std::size_t>(sh.cells()));
  for (int i = 0; i < sh.r1(); ++i)
    for (int k = 0; k < sh.r3(); ++k) {
      const double d = marginal(i, k);
      flags.push_back(d == 0.0);
      for (int j = 0; j < sh.r2(); ++j) values.push_back(d == 0.0 ? 1.0 / sh.r2() : joint(i, j, k) / d);
    }
  return {std::move(marginal), LambdaField(sh, std::move(values), std::move(flags))};
}

JointTable merge(const MarginalTable& marginal, const LambdaField& lambdas) {
  const Shape& sh = lambdas.shape();
  if (marginal.r1() != sh.r1() || marginal.r3() != sh.r3())
    throw Error(ErrorCode::ShapeMismatch, "marginal and lambda field disagree on (r1, r3)");
  std::vector<double> cells(static_cast<std::size_t>(sh.cells()));
  for (int i = 0; i < sh.r1(); ++i)
    for (int j = 0; j < sh.r2(); ++j)
      for (int k = 0; k < sh.r3(); ++k)
        cells[(static_cast<std::size_t>(i) * sh.r2() + j) * sh.r3() + k] = marginal(i, k) * lambdas(i, k, j);
  return JointTable(sh, std::move(cells));
}

CrossRatios::CrossRatios(RefCell ref, int r1, int r3, Eigen::MatrixXd values)
    : ref_(ref), r1_(r1), r3_(r3), values_(std::move(values)) {
  if (values_.rows() != r1 - 1 || values_.cols() != r3 - 1)
    throw Error(ErrorCode::ShapeMismatch, "cross-ratio table must be (r1-1) x (r3-1)");
  if (ref.i < 0 || ref.i >= r1 || ref.k < 0 || ref.k >= r3)
    throw Error(ErrorCode::InvalidArgument, "reference cell out of range");
  if (!(values_.array() > 0.0).all() || !values_.allFinite())
    throw Error(ErrorCode::InvalidArgument, "cross-ratios must be finite and positive");
}

double CrossRatios::at(int i, int k) const {
  if (i == ref_.i || k == ref_.k) return 1.0;
  return values_(i < ref_.i ? i : i - 1, k < ref_.k ? k : k - 1);
}

CrossRatios cross_ratios(const MarginalTable& marginal, RefCell ref) {
  const int r1 = marginal.r1(), r3 = marginal.r3();
  if (ref.i < 0 || ref.i >= r1 || ref.k < 0 || ref.k >= r3)
    throw Error(ErrorCode::InvalidArgument, "reference cell out of range");
  for (int i = 0; i < r1; ++i)
    for (int k = 0; k < r3; ++k)
      if (marginal(i, k) <= 0.0) throw Error(ErrorCode::ZeroCell, cell_name("delta", i, k) + " is zero");
  Eigen::MatrixXd z(r1 - 1, r3 - 1);
  for (int i = 0, row = 0; i < r1; ++i) {
    if (i == ref.i) continue;
    for (int k = 0, col = 0; k < r3; ++k) {
      if (k == ref.k) continue;
      z(row, col++) = marginal(ref.i, ref.k) * marginal(i, k) / (marginal(ref.i, k) * marginal(i, ref.k));
    }
    ++row;
  }
  return CrossRatios(ref, r1, r3, std::move(z));
}

std::array<double, 2> binary_system_residuals(double z, double l11, double l12, double l21, double l22) {
  return {(1.0 - l11 - l22) * z - (1.0 - l12 - l21), l11 * l22 * z - l12 * l21};
}

BinaryFiberSolution binary_fiber_solve(double z, double c1, double c2) {
  if (!(z > 0.0) || !std::isfinite(z) || !(c1 >= 0.0 && c1 <= 1.0) || !(c2 >= 0.0 && c2 <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "need z > 0 and c1, c2 in [0,1]");

  // The two unknowns have a known sum and product.
  const double sum = 1.0 - (1.0 - c1 - c2) / z;
  const double product = c1 * c2 / z;
  double disc = sum * sum - 4.0 * product;
  if (disc < 0.0) {
    if (disc < -1e-14 * std::max(1.0, sum * sum)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "discriminant " << disc << " < 0 for z=" << z << ", c1=" << c1 << ", c2=" << c2;
      throw Error(ErrorCode::NoRealSolution, msg.str());
    }
    disc = 0.0;
  }
  const double half = 0.5 * std::sqrt(disc);
  const double hi = 0.5 * sum + half;
  const double lo = hi != 0.0 ? product / hi : 0.5 * sum - half;

  auto ulo = into_unit(lo), uhi = into_unit(hi);
  if (!ulo || !uhi) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "roots " << lo << " and " << hi << " leave [0,1]";
    throw Error(ErrorCode::OutOfUnitBox, msg.str());
  }
  BinaryFiberSolution out{z, c1, c2, {}};
  out.points.emplace_back(*ulo, *uhi);
  if (disc > 0.0) out.points.emplace_back(*uhi, *ulo);
  std::sort(out.points.begin(), out.points.end());
  return out;
}

BinarySurfacePoint binary_surface(double lam12, double lam22, double z) {
  if (!(z > 0.0) || !std::isfinite(z) || !(lam12 >= 0.0 && lam12 <= 1.0) || !(lam22 >= 0.0 && lam22 <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "need z > 0 and lambda values in [0,1]");
  const double gap = lam22 - lam12;
  if (std::abs(gap) <= 1e-15) {
    throw Error(ErrorCode::SingularPair, z == 1.0 ? "lambda(2,2) = lambda(1,2) at z = 1: a one-parameter family "
                                                    "lambda(1,1) = lambda(2,1) solves the system"
                                                  : "lambda(2,2) = lambda(1,2) with z != 1");
  }
  const double tol = 1e-12;
  // Admissible z lies between lambda12/lambda22 and (1-lambda12)/(1-lambda22).
  if (gap > 0.0) {
    if (z * lam22 < lam12 - tol) throw Error(ErrorCode::ConstraintViolation, "requires lambda(1,2)/lambda(2,2) <= z");
    if (z * (1.0 - lam22) > 1.0 - lam12 + tol)
      throw Error(ErrorCode::ConstraintViolation, "requires z <= (1-lambda(1,2))/(1-lambda(2,2))");
  } else {
    if (z * lam22 > lam12 + tol) throw Error(ErrorCode::ConstraintViolation, "requires z <= lambda(1,2)/lambda(2,2)");
    if (z * (1.0 - lam22) < 1.0 - lam12 - tol)
      throw Error(ErrorCode::ConstraintViolation, "requires (1-lambda(1,2))/(1-lambda(2,2)) <= z");
  }
  const double numer = 1.0 - lam12 - z * (1.0 - lam22);
  const double lam21 = numer * lam22 / gap;
  const double lam11 = numer * lam12 / (z * gap);
  return {std::clamp(lam21, 0.0, 1.0), std::clamp(lam11, 0.0, 1.0)};
}

double check_marginal_identity_323(const CrossRatios& z) {
  require_323(z);
  return z.z1() * z.z4() - z.z2() * z.z3() - (z.z1() + z.z4()) + (z.z2() + z.z3());
}

std::array<double, 8> eq12_residuals(const CrossRatios& z, const Eigen::Matrix3d& lam) {
  require_323(z);
  const int I = z.ref().i, K = z.ref().k;
  std::array<double, 8> out{};
  std::size_t n = 0;
  for (int i : others(I))
    for (int k : others(K)) {
      const double zik = z.at(i, k);
      out[n++] = zik * lam(I, K) * lam(i, k) - lam(I, k) * lam(i, K);
      out[n++] = zik * (1.0 - lam(I, K)) * (1.0 - lam(i, k)) - (1.0 - lam(I, k)) * (1.0 - lam(i, K));
    }
  return out;
}

Eigen::Matrix3d solve_fiber_323(const CrossRatios& z, double lam21, double lam22) {
  require_323(z);
  if (!(lam21 >= 0.0 && lam21 <= 1.0) || !(lam22 >= 0.0 && lam22 <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "free parameters must lie in [0,1]");

  const double scale = std::max(1.0, z.values().cwiseAbs().maxCoeff());
  const double identity = check_marginal_identity_323(z);
  if (std::abs(identity) > kVarietyTolerance * scale) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "marginal identity residual " << identity << " exceeds tolerance";
    throw Error(ErrorCode::OffVariety, msg.str());
  }

  // Relabel so that local index 0 is the reference state.
  const int I = z.ref().i, K = z.ref().k;
  const auto [i1, i2] = others(I);
  const auto [k1, k2] = others(K);
  const std::array<int, 3> row{I, i1, i2};
  const std::array<int, 3> col{K, k1, k2};
  const double z1 = z.z1(), z2 = z.z2(), z3 = z.z3(), z4 = z.z4();

  auto name = [&](int a, int c) { return cell_name("lambda", row[a], col[c]); };
  auto divide = [&](double num, double den, const std::string& what) {
    if (std::abs(den) <= kDenominatorFloor) throw Error(ErrorCode::SingularDenominator, what + " vanishes");
    return num / den;
  };

  Eigen::Matrix3d x;  // local coordinates
  const bool independent = (z.values().array() - 1.0).abs().maxCoeff() <= 1e-12;
  if (independent && std::abs(lam22 - lam21) <= 1e-12) {
    // Underdetermined at independence; return the constant representative.
    x.setConstant(lam21);
  } else {
    x(1, 0) = lam21;
    x(1, 1) = lam22;
    x(0, 0) = divide(lam21 * (1.0 - lam21 - z1 * (1.0 - lam22)), z1 * (lam22 - lam21),
                     name(1, 1) + " - " + name(1, 0));
    x(0, 1) = 1.0 - lam21 - z1 * (1.0 - x(0, 0) - lam22);
    // Each remaining 2x2 block is linear in its two unknowns.
    x(1, 2) = divide(lam21 * (1.0 - lam21 - z2 * (1.0 - x(0, 0))), z2 * (x(0, 0) - lam21),
                     name(0, 0) + " - " + name(1, 0));
    x(0, 2) = 1.0 - lam21 - z2 * (1.0 - x(0, 0) - x(1, 2));
    x(2, 1) = divide(x(0, 1) * (1.0 - x(0, 1) - z3 * (1.0 - x(0, 0))), z3 * (x(0, 0) - x(0, 1)),
                     name(0, 0) + " - " + name(0, 1));
    x(2, 0) = 1.0 - x(0, 1) - z3 * (1.0 - x(0, 0) - x(2, 1));
    x(2, 2) = 1.0 - x(0, 0) - (1.0 - x(0, 2) - x(2, 0)) / z4;
  }

  Eigen::Matrix3d lam;
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) {
      auto v = into_unit(x(a, c));
      if (!v) {
        std::ostringstream msg;
        msg.precision(17);
        msg << name(a, c) << " = " << x(a, c) << " leaves [0,1]";
        throw Error(ErrorCode::OutOfUnitBox, msg.str());
      }
      lam(row[a], col[c]) = *v;
    }

  for (double r : eq12_residuals(z, lam)) {
    if (!(std::abs(r) < kFiberResidualTolerance)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "solution residual " << r << " exceeds tolerance";
      throw Error(ErrorCode::OffVariety, msg.str());
    }
  }
  return lam;
}

std::vector<PrintedFormulaAudit> audit_printed_323(const CrossRatios& z, double lam21, double lam22) {
  const Eigen::Matrix3d solved = solve_fiber_323(z, lam21, lam22);
  const auto [i1, i2] = others(z.ref().i);
  const auto [k1, k2] = others(z.ref().k);
  const int I = z.ref().i, K = z.ref().k;
  const double z1 = z.z1(), z2 = z.z2(), z3 = z.z3(), z4 = z.z4();
  const double x21 = lam21, x22 = lam22;
  const double numer = 1.0 - x21 - z1 * (1.0 - x22);
  const double gap = x22 - x21;
  const double f = (z2 - 1.0) * z1 * x22 + x21 * (z1 - z2);
  const double g = z3 * (1.0 - x21) - z1 * (1.0 - x22);

  auto safe = [](double num, double den) -> std::optional<double> {
    if (den == 0.0) return std::nullopt;
    return num / den;
  };
  struct Entry {
    const char* label;
    int i;
    int k;
    std::optional<double> printed;
  };
  const Entry entries[] = {
      {"lambda(1,1)", I, K, safe(x21 * numer, z1 * gap)},
      {"lambda(1,2)", I, k1, safe(x22 * numer, gap)},
      {"lambda(1,3)", I, k2, safe(numer * f, z1 * (z1 - 1.0) * gap * f)},
      {"lambda(2,3)", i1, k2, safe(z2 * (z1 - 1.0), x21 * g)},
      {"lambda(3,1)", i2, K, safe(z1 * gap, x22 * g)},
      {"lambda(3,2)", i2, k1, safe(gap * z3, g)},
      {"lambda(3,3)", i2, k2, safe(z1 * (z1 - 1.0) * z4 * gap, f)},
  };
  std::vector<PrintedFormulaAudit> out;
  for (const auto& e : entries) {
    const double s = solved(e.i, e.k);
    bool agrees = e.printed && std::abs(*e.printed - s) <= kFiberResidualTolerance;
    out.push_back({e.label, e.printed, s, agrees});
  }
  return out;
}

Eigen::Matrix3d degenerate_family_323(const CrossRatios& z, int value, double free_first, double free_second) {
  require_323(z);
  if (value != 0 && value != 1) throw Error(ErrorCode::InvalidArgument, "branch value must be 0 or 1");
  if (!(free_first >= 0.0 && free_first <= 1.0) || !(free_second >= 0.0 && free_second <= 1.0))
    throw Error(ErrorCode::ScaleOutOfRange, "free parameters must lie in [0,1]");
  const int I = z.ref().i, K = z.ref().k;
  Eigen::Matrix3d lam;
  lam.row(I).setConstant(value);
  const auto rows = others(I);
  const double free_values[2] = {free_first, free_second};
  for (int n = 0; n < 2; ++n) {
    const int i = rows[n];
    const double f = free_values[n];
    lam(i, K) = f;
    for (int k : others(K)) {
      const double v = value == 1 ? f / z.at(i, k) : 1.0 - (1.0 - f) / z.at(i, k);
      if (v < 0.0 || v > 1.0) {
        std::ostringstream msg;
        msg.precision(17);
        msg << cell_name("lambda", i, k) << " = " << v << " leaves [0,1]";
        throw Error(ErrorCode::ScaleOutOfRange, msg.str());
      }
      lam(i, k) = v;
    }
  }
  return lam;
}

}  // namespace lcgeom
