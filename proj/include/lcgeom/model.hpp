#pragma once

// Domain types for the three-variable chain Y1 -> Y2 -> Y3 with hidden Y2,
// the forward parametrization, conditional-independence residuals and
// dimension bookkeeping.
//
// Indices are 0-based throughout the library; the CLI converts to and from
// the 1-based states used in file formats.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lcgeom {

inline constexpr double kSumTolerance = 1e-12;
inline constexpr double kInteriorEps = 1e-9;
inline constexpr double kRankCutoff = 1e-8;
inline constexpr double kFiniteDiffStep = 1e-6;

class Shape {
 public:
  Shape(int r1, int r2, int r3);

  int r1() const noexcept { return r1_; }
  int r2() const noexcept { return r2_; }
  int r3() const noexcept { return r3_; }
  int cells() const noexcept { return r1_ * r2_ * r3_; }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  int r1_;
  int r2_;
  int r3_;
};

// Reference state (I, K) for the quadric system.
struct RefCell {
  int i = 0;
  int k = 0;
};

// Full table theta(i, j, k). Storage order is k fastest, then j, then i.
class JointTable {
 public:
  JointTable(Shape shape, std::vector<double> cells);

  static JointTable uniform(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> cells() const noexcept { return cells_; }

  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * shape_.r2() + j) * shape_.r3() + k;
  }
  double operator()(int i, int j, int k) const noexcept { return cells_[index(i, j, k)]; }

  bool interior() const noexcept;

 private:
  Shape shape_;
  std::vector<double> cells_;
};

// p(Y1), p(Y2|Y1) and p(Y3|Y2).
class ChainParams {
 public:
  ChainParams(Shape shape, Eigen::VectorXd p1, Eigen::MatrixXd a, Eigen::MatrixXd b);

  const Shape& shape() const noexcept { return shape_; }
  const Eigen::VectorXd& p1() const noexcept { return p1_; }
  // r1 x r2, rows p(Y2 | Y1 = i).
  const Eigen::MatrixXd& a() const noexcept { return a_; }
  // r2 x r3, rows p(Y3 | Y2 = j).
  const Eigen::MatrixXd& b() const noexcept { return b_; }

  // Every entry of p1, a and b exceeds eps.
  bool interior(double eps = kInteriorEps) const noexcept;

 private:
  Shape shape_;
  Eigen::VectorXd p1_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
};

// delta(i, k) = p(Y1 = i, Y3 = k).
class MarginalTable {
 public:
  explicit MarginalTable(Eigen::MatrixXd cells);

  int r1() const noexcept { return static_cast<int>(cells_.rows()); }
  int r3() const noexcept { return static_cast<int>(cells_.cols()); }
  const Eigen::MatrixXd& cells() const noexcept { return cells_; }
  double operator()(int i, int k) const noexcept { return cells_(i, k); }

 private:
  Eigen::MatrixXd cells_;
};

enum class DimCase { R2Large, R2Small };

struct Dims {
  int d = 0;      // ambient simplex
  int t = 0;      // model manifold
  int s = 0;      // independent quadrics
  int m = 0;      // observable (Y1, Y3) margin
  int fiber = 0;  // unidentifiable directions
  DimCase dim_case = DimCase::R2Large;
  int constraint_count = 0;  // (r1 - r2)(r3 - r2) in R2Small, 0 otherwise
};

const char* to_string(DimCase c);

class DagSpec {
 public:
  struct Node {
    std::string name;
    int cardinality;
    std::vector<int> parents;
  };

  // Parents must already be present, so the node list is a topological order.
  DagSpec& add_node(std::string name, int cardinality, const std::vector<std::string>& parents = {});

  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  int find(const std::string& name) const;

  std::vector<Node> nodes_;
};

class DecomposableSpec {
 public:
  using NodeSet = std::vector<std::string>;

  // separators[i] belongs between cliques[i] and cliques[i + 1]; each must be
  // non-empty, contained in cliques[i + 1] and in some earlier clique.
  DecomposableSpec(std::vector<std::pair<std::string, int>> cardinalities, std::vector<NodeSet> cliques,
                   std::vector<NodeSet> separators);

  const std::vector<NodeSet>& cliques() const noexcept { return cliques_; }
  const std::vector<NodeSet>& separators() const noexcept { return separators_; }
  long long cells(const NodeSet& set) const;

 private:
  std::vector<std::pair<std::string, int>> cardinalities_;
  std::vector<NodeSet> cliques_;
  std::vector<NodeSet> separators_;
};

// Independent stream seed for restart or replicate `stream` of a run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded draw with each probability row from the flat Dirichlet.
ChainParams sample_chain(Shape shape, std::uint64_t seed);

JointTable joint_from_chain(const ChainParams& params);
MarginalTable marginal_13(const JointTable& joint);
MarginalTable marginal_13(const ChainParams& params);

// theta(I,j,K) theta(i,j,k) - theta(I,j,k) theta(i,j,K) for j outer, then
// i != I, then k != K.
std::vector<double> ci_residuals(const JointTable& joint, RefCell ref = {});

Dims dims(const Shape& shape);

int dag_dimension(const DagSpec& spec);
int decomposable_dimension(const DecomposableSpec& spec);
DagSpec chain_dag(const Shape& shape);
DecomposableSpec chain_decomposable(const Shape& shape);

// Minimal chart: drop the last coordinate of p1 and of every row of a and b.
std::vector<double> to_chart(const ChainParams& params);
std::vector<double> joint_cells_from_chart(const Shape& shape, std::span<const double> chart);

// Number of singular values above rel_cutoff * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double rel_cutoff = kRankCutoff);

// Central-difference Jacobian of chart -> joint cells; throws BoundaryPoint
// unless params are interior.
Eigen::MatrixXd chart_jacobian(const ChainParams& params, double eps = kFiniteDiffStep);
int jacobian_rank(const ChainParams& params, double eps = kFiniteDiffStep);

}  // namespace lcgeom
