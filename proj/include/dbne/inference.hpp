#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbne/sampler.hpp"

namespace dbne {

struct Triplet {
  NodeId src = 0;
  NodeId dst = 0;
  double value = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Sparse nonnegative matrix of transmission rates alpha_{ij}, i != j.
// Entries are sorted by (src, dst); absent pairs are implicitly zero.
struct RateMatrix {
  NodeId node_count = 0;
  std::vector<Triplet> entries;

  double at(NodeId i, NodeId j) const;
  void validate() const;  // sortedness, nonnegativity, no diagonal, range
};

struct SolverConfig {
  std::uint32_t max_iterations = 2000;
  double step_size = 0.1;
  double tolerance = 1e-8;     // relative objective decrease
  double initial_rate = 0.1;
  double prune_threshold = 1e-4;
  unsigned threads = 0;        // 0 = hardware concurrency
};

// Exponential transmission model (the only parametric form supported for
// inference): density alpha e^{-alpha dt} for dt > 0, else 0.
double pair_density(double dt, double alpha);
// Survival probability after nonnegative elapsed time: e^{-alpha dt}.
double pair_survival(double dt, double alpha);
// Instantaneous hazard f/S; constant alpha under the exponential model.
double pair_hazard(double dt, double alpha);

// Negative log-likelihood of one cascade under `rates`. Returns +infinity
// when some infected non-seed node has zero incoming hazard (an "impossible
// cascade"), never throws for that case.
double cascade_nll(const Cascade& cascade, const RateMatrix& rates);

struct TotalNll {
  double value = 0.0;
  std::optional<std::size_t> impossible_cascade;  // first offending index
};
TotalNll total_nll(const CascadeSet& set, const RateMatrix& rates);

// Ordered pairs (i, j) that carry information: in some cascade either
// t_i < t_j <= T, or i is infected while j is not. Sorted by (src, dst).
std::vector<std::pair<NodeId, NodeId>> candidate_pairs(const CascadeSet& set);

// Gradient of the total NLL with respect to every candidate pair, evaluated
// at `rates`. Throws ImpossibleCascadeError if some cascade has an infected
// node with zero hazard under `rates`.
std::vector<Triplet> nll_gradient(const CascadeSet& set, const RateMatrix& rates);

struct InferResult {
  RateMatrix rates;
  double objective = 0.0;        // final total NLL over candidate pairs
  std::uint64_t iterations = 0;  // accepted projected-gradient steps, all columns
};

// Maximum-likelihood rate recovery: projected gradient descent with
// backtracking line search, decomposed per target column (the objective is
// separable by infection target). Candidates start at initial_rate; entries
// below prune_threshold are dropped from the result.
InferResult infer_rates(const CascadeSet& set, const SolverConfig& config);

// Rate-matrix file: one `i<TAB>j<TAB>alpha` per line, sorted by (i, j),
// alpha at 17 significant digits.
void save_rates(const RateMatrix& rates, const std::string& path);
RateMatrix load_rates(const std::string& path, NodeId node_count_override = 0);

}  // namespace dbne
