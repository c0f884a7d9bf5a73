#pragma once

// Whether an observed (Y1, Y3) table can be produced by the latent chain
// with r2 hidden states.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcgeom/model.hpp"

namespace lcgeom {

enum class Proof {
  None,          // not found within the search budget
  Rank,          // proven infeasible: matrix rank exceeds r2
  Identity323,   // proven infeasible: 3x3 determinant identity fails
  Construction,  // proven feasible: r2 >= min(r1, r3), explicit witness
  Search,        // feasible: witness found by multistart EM
};

const char* to_string(Proof p);

struct ConsistencyOptions {
  int restarts = 64;
  int max_iter = 500;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

struct ConsistencyReport {
  bool feasible = false;
  Proof proven_by = Proof::None;
  double best_divergence = 0.0;  // +inf when the search never ran
  std::optional<ChainParams> witness;
  std::vector<std::pair<std::string, bool>> necessary_checks;
  int restarts_run = 0;
};

// Uniform p(Y1) with Y3 = Y1 deterministically.
MarginalTable example1_marginal(int r1, int r3);

ConsistencyReport consistency_check(const MarginalTable& target, int r2, const ConsistencyOptions& options = {});

struct ConstraintCount {
  int count;
  bool case_large_r2;  // r2 >= min(r1, r3): the margin is unconstrained
};

ConstraintCount constraint_count(const Shape& shape);

// Strictly positive p(Y2|Y1) or strictly positive p(Y3|Y2).
bool is_regular(const ChainParams& params);

// Adds a latent state with zero mass; the (Y1, Y3) margin is unchanged.
ChainParams embed_extra_state(const ChainParams& params);

}  // namespace lcgeom
