#include "lcgeom/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lcgeom/error.hpp"

namespace lcgeom {

namespace {

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& row, const std::string& label) {
  for (Eigen::Index n = 0; n < row.size(); ++n) {
    require(std::isfinite(row(n)) && row(n) >= 0.0, ErrorCode::InvalidArgument,
            label + " has a negative or non-finite entry");
  }
  require(std::abs(row.sum() - 1.0) <= kSumTolerance, ErrorCode::InvalidArgument, label + " does not sum to 1");
}

Eigen::VectorXd flat_dirichlet(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = expo(rng);
  return v / v.sum();
}

}  // namespace

Shape::Shape(int r1, int r2, int r3) : r1_(r1), r2_(r2), r3_(r3) {
  require(r1 >= 2 && r2 >= 2 && r3 >= 2, ErrorCode::InvalidArgument, "cardinalities must all be >= 2");
}

JointTable::JointTable(Shape shape, std::vector<double> cells) : shape_(shape), cells_(std::move(cells)) {
  require(cells_.size() == static_cast<std::size_t>(shape_.cells()), ErrorCode::ShapeMismatch,
          "joint table needs r1*r2*r3 cells");
  double total = 0.0;
  for (double c : cells_) {
    require(std::isfinite(c) && c >= 0.0, ErrorCode::InvalidArgument, "joint table has a negative cell");
    total += c;
  }
  require(std::abs(total - 1.0) <= kSumTolerance, ErrorCode::InvalidArgument, "joint table does not sum to 1");
}

JointTable JointTable::uniform(Shape shape) {
  return JointTable(shape, std::vector<double>(shape.cells(), 1.0 / shape.cells()));
}

bool JointTable::interior() const noexcept {
  return std::all_of(cells_.begin(), cells_.end(), [](double c) { return c > 0.0; });
}

ChainParams::ChainParams(Shape shape, Eigen::VectorXd p1, Eigen::MatrixXd a, Eigen::MatrixXd b)
    : shape_(shape), p1_(std::move(p1)), a_(std::move(a)), b_(std::move(b)) {
  require(p1_.size() == shape_.r1() && a_.rows() == shape_.r1() && a_.cols() == shape_.r2() &&
              b_.rows() == shape_.r2() && b_.cols() == shape_.r3(),
          ErrorCode::ShapeMismatch, "chain parameter sizes disagree with shape");
  check_distribution(p1_, "p1");
  for (int i = 0; i < shape_.r1(); ++i) check_distribution(a_.row(i).transpose(), "row " + std::to_string(i + 1) + " of a");
  for (int j = 0; j < shape_.r2(); ++j) check_distribution(b_.row(j).transpose(), "row " + std::to_string(j + 1) + " of b");
}

bool ChainParams::interior(double eps) const noexcept {
  return p1_.minCoeff() > eps && a_.minCoeff() > eps && b_.minCoeff() > eps;
}

MarginalTable::MarginalTable(Eigen::MatrixXd cells) : cells_(std::move(cells)) {
  require(cells_.rows() >= 1 && cells_.cols() >= 1, ErrorCode::InvalidArgument, "empty marginal table");
  require((cells_.array() >= 0.0).all() && cells_.allFinite(), ErrorCode::InvalidArgument,
          "marginal table has a negative cell");
  require(std::abs(cells_.sum() - 1.0) <= kSumTolerance, ErrorCode::InvalidArgument,
          "marginal table does not sum to 1");
}

const char* to_string(DimCase c) { return c == DimCase::R2Large ? "R2Large" : "R2Small"; }

DagSpec& DagSpec::add_node(std::string name, int cardinality, const std::vector<std::string>& parents) {
  require(cardinality >= 2, ErrorCode::InvalidArgument, "node " + name + " needs cardinality >= 2");
  require(find(name) < 0, ErrorCode::InvalidArgument, "duplicate node " + name);
  Node node{std::move(name), cardinality, {}};
  for (const auto& p : parents) {
    int idx = find(p);
    require(idx >= 0, ErrorCode::InvalidArgument, "parent " + p + " must be added before its children");
    node.parents.push_back(idx);
  }
  nodes_.push_back(std::move(node));
  return *this;
}

int DagSpec::find(const std::string& name) const {
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    if (nodes_[n].name == name) return static_cast<int>(n);
  return -1;
}

DecomposableSpec::DecomposableSpec(std::vector<std::pair<std::string, int>> cardinalities,
                                   std::vector<NodeSet> cliques, std::vector<NodeSet> separators)
    : cardinalities_(std::move(cardinalities)), cliques_(std::move(cliques)), separators_(std::move(separators)) {
  require(!cliques_.empty(), ErrorCode::InvalidArgument, "at least one clique required");
  require(separators_.size() + 1 == cliques_.size(), ErrorCode::InvalidArgument,
          "need exactly one separator between consecutive cliques");
  for (const auto& [name, card] : cardinalities_)
    require(card >= 2, ErrorCode::InvalidArgument, "node " + name + " needs cardinality >= 2");
  for (const auto& clique : cliques_) {
    require(!clique.empty(), ErrorCode::InvalidArgument, "empty clique");
    (void)cells(clique);
  }

  auto contains = [](const NodeSet& outer, const NodeSet& inner) {
    return std::all_of(inner.begin(), inner.end(),
                       [&](const auto& n) { return std::find(outer.begin(), outer.end(), n) != outer.end(); });
  };
  std::set<std::string> seen(cliques_[0].begin(), cliques_[0].end());
  for (std::size_t n = 0; n < separators_.size(); ++n) {
    const NodeSet& sep = separators_[n];
    const NodeSet& clique = cliques_[n + 1];
    require(!sep.empty(), ErrorCode::InvalidArgument,
            "separator " + std::to_string(n + 2) + " is empty (disconnected cliques are not supported)");
    require(contains(clique, sep), ErrorCode::InvalidArgument,
            "separator " + std::to_string(n + 2) + " is not inside its clique");
    bool in_earlier = std::any_of(cliques_.begin(), cliques_.begin() + static_cast<long>(n) + 1,
                                  [&](const NodeSet& c) { return contains(c, sep); });
    require(in_earlier, ErrorCode::InvalidArgument,
            "running intersection fails at separator " + std::to_string(n + 2));
    // The separator must be exactly the overlap with the history.
    for (const auto& node : clique) {
      bool shared = seen.count(node) > 0;
      bool in_sep = std::find(sep.begin(), sep.end(), node) != sep.end();
      require(shared == in_sep, ErrorCode::InvalidArgument,
              "separator " + std::to_string(n + 2) + " differs from the clique's overlap with earlier cliques");
    }
    seen.insert(clique.begin(), clique.end());
  }
}

long long DecomposableSpec::cells(const NodeSet& set) const {
  long long total = 1;
  for (const auto& node : set) {
    auto it = std::find_if(cardinalities_.begin(), cardinalities_.end(),
                           [&](const auto& entry) { return entry.first == node; });
    require(it != cardinalities_.end(), ErrorCode::InvalidArgument, "unknown node " + node);
    total *= it->second;
  }
  return total;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined state
  std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

ChainParams sample_chain(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd p1 = flat_dirichlet(shape.r1(), rng);
  Eigen::MatrixXd a(shape.r1(), shape.r2());
  for (int i = 0; i < shape.r1(); ++i) a.row(i) = flat_dirichlet(shape.r2(), rng).transpose();
  Eigen::MatrixXd b(shape.r2(), shape.r3());
  for (int j = 0; j < shape.r2(); ++j) b.row(j) = flat_dirichlet(shape.r3(), rng).transpose();
  return ChainParams(shape, std::move(p1), std::move(a), std::move(b));
}

JointTable joint_from_chain(const ChainParams& params) {
  const Shape& sh = params.shape();
  std::vector<double> cells(sh.cells());
  std::size_t n = 0;
  for (int i = 0; i < sh.r1(); ++i)
    for (int j = 0; j < sh.r2(); ++j)
      for (int k = 0; k < sh.r3(); ++k) cells[n++] = params.p1()(i) * params.a()(i, j) * params.b()(j, k);
  double total = std::accumulate(cells.begin(), cells.end(), 0.0);
  for (double& c : cells) c /= total;
  return JointTable(sh, std::move(cells));
}

MarginalTable marginal_13(const JointTable& joint) {
  const Shape& sh = joint.shape();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(sh.r1(), sh.r3());
  for (int i = 0; i < sh.r1(); ++i)
    for (int j = 0; j < sh.r2(); ++j)
      for (int k = 0; k < sh.r3(); ++k) delta(i, k) += joint(i, j, k);
  return MarginalTable(std::move(delta));
}

MarginalTable marginal_13(const ChainParams& params) {
  Eigen::MatrixXd delta = params.p1().asDiagonal() * (params.a() * params.b());
  return MarginalTable(delta / delta.sum());
}

std::vector<double> ci_residuals(const JointTable& joint, RefCell ref) {
  const Shape& sh = joint.shape();
  require(ref.i >= 0 && ref.i < sh.r1() && ref.k >= 0 && ref.k < sh.r3(), ErrorCode::InvalidArgument,
          "reference cell out of range");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sh.r2()) * (sh.r1() - 1) * (sh.r3() - 1));
  for (int j = 0; j < sh.r2(); ++j)
    for (int i = 0; i < sh.r1(); ++i) {
      if (i == ref.i) continue;
      for (int k = 0; k < sh.r3(); ++k) {
        if (k == ref.k) continue;
        out.push_back(joint(ref.i, j, ref.k) * joint(i, j, k) - joint(ref.i, j, k) * joint(i, j, ref.k));
      }
    }
  return out;
}

Dims dims(const Shape& shape) {
  const int r1 = shape.r1(), r2 = shape.r2(), r3 = shape.r3();
  Dims out;
  out.d = r1 * r2 * r3 - 1;
  out.s = r2 * (r1 - 1) * (r3 - 1);
  out.t = out.d - out.s;
  if (r2 >= std::min(r1, r3)) {
    out.dim_case = DimCase::R2Large;
    out.m = r1 * r3 - 1;
  } else {
    out.dim_case = DimCase::R2Small;
    out.constraint_count = (r1 - r2) * (r3 - r2);
    out.m = r1 * r3 - 1 - out.constraint_count;
  }
  out.fiber = out.t - out.m;
  return out;
}

int dag_dimension(const DagSpec& spec) {
  int total = 0;
  for (const auto& node : spec.nodes()) {
    int parent_states = 1;
    for (int p : node.parents) parent_states *= spec.nodes()[p].cardinality;
    total += parent_states * (node.cardinality - 1);
  }
  return total;
}

int decomposable_dimension(const DecomposableSpec& spec) {
  long long total = 0;
  for (const auto& c : spec.cliques()) total += spec.cells(c) - 1;
  for (const auto& s : spec.separators()) total -= spec.cells(s) - 1;
  return static_cast<int>(total);
}

DagSpec chain_dag(const Shape& shape) {
  DagSpec dag;
  dag.add_node("Y1", shape.r1()).add_node("Y2", shape.r2(), {"Y1"}).add_node("Y3", shape.r3(), {"Y2"});
  return dag;
}

DecomposableSpec chain_decomposable(const Shape& shape) {
  return DecomposableSpec({{"Y1", shape.r1()}, {"Y2", shape.r2()}, {"Y3", shape.r3()}},
                          {{"Y1", "Y2"}, {"Y2", "Y3"}}, {{"Y2"}});
}

std::vector<double> to_chart(const ChainParams& params) {
  const Shape& sh = params.shape();
  std::vector<double> x;
  for (int i = 0; i + 1 < sh.r1(); ++i) x.push_back(params.p1()(i));
  for (int i = 0; i < sh.r1(); ++i)
    for (int j = 0; j + 1 < sh.r2(); ++j) x.push_back(params.a()(i, j));
  for (int j = 0; j < sh.r2(); ++j)
    for (int k = 0; k + 1 < sh.r3(); ++k) x.push_back(params.b()(j, k));
  return x;
}

std::vector<double> joint_cells_from_chart(const Shape& shape, std::span<const double> chart) {
  const int r1 = shape.r1(), r2 = shape.r2(), r3 = shape.r3();
  auto pos = chart.begin();
  auto take_row = [&](int n) {
    std::vector<double> row(n);
    double rest = 1.0;
    for (int e = 0; e + 1 < n; ++e) {
      row[e] = *pos++;
      rest -= row[e];
    }
    row[n - 1] = rest;
    return row;
  };
  std::vector<double> p1 = take_row(r1);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < r1; ++i) a.push_back(take_row(r2));
  for (int j = 0; j < r2; ++j) b.push_back(take_row(r3));
  if (pos != chart.end()) throw Error(ErrorCode::ShapeMismatch, "chart length disagrees with shape");

  std::vector<double> cells;
  cells.reserve(shape.cells());
  for (int i = 0; i < r1; ++i)
    for (int j = 0; j < r2; ++j)
      for (int k = 0; k < r3; ++k) cells.push_back(p1[i] * a[i][j] * b[j][k]);
  return cells;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_cutoff) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index n = 0; n < sv.size(); ++n)
    if (sv(n) > rel_cutoff * sv(0)) ++rank;
  return rank;
}

Eigen::MatrixXd chart_jacobian(const ChainParams& params, double eps) {
  if (!params.interior()) throw Error(ErrorCode::BoundaryPoint, "Jacobian rank is only defined at interior points");
  const Shape& sh = params.shape();
  std::vector<double> x = to_chart(params);
  Eigen::MatrixXd jac(sh.cells(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t c = 0; c < x.size(); ++c) {
    std::vector<double> hi = x, lo = x;
    hi[c] += eps;
    lo[c] -= eps;
    auto fh = joint_cells_from_chart(sh, hi);
    auto fl = joint_cells_from_chart(sh, lo);
    for (int r = 0; r < sh.cells(); ++r) jac(r, static_cast<Eigen::Index>(c)) = (fh[r] - fl[r]) / (2.0 * eps);
  }
  return jac;
}

int jacobian_rank(const ChainParams& params, double eps) { return numerical_rank(chart_jacobian(params, eps)); }

}  // namespace lcgeom
