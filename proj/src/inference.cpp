#include "dbne/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "dbne/errors.hpp"
#include "dbne/parallel.hpp"

namespace dbne {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double pair_density(double dt, double alpha) {
  if (dt <= 0.0) return 0.0;
  return alpha * std::exp(-alpha * dt);
}

double pair_survival(double dt, double alpha) {
  if (dt < 0.0) throw DataError("pair_survival: negative elapsed time");
  return std::exp(-alpha * dt);
}

double pair_hazard(double dt, double alpha) {
  (void)dt;  // exponential hazard is constant
  return alpha;
}

double RateMatrix::at(NodeId i, NodeId j) const {
  const Triplet probe{i, j, 0.0};
  auto it = std::lower_bound(entries.begin(), entries.end(), probe,
                             [](const Triplet& a, const Triplet& b) {
                               return a.src != b.src ? a.src < b.src : a.dst < b.dst;
                             });
  if (it != entries.end() && it->src == i && it->dst == j) return it->value;
  return 0.0;
}

void RateMatrix::validate() const {
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Triplet& e = entries[k];
    if (e.src >= node_count || e.dst >= node_count) {
      throw DataError("rate entry out of range");
    }
    if (e.src == e.dst) throw DataError("rate matrix has a diagonal entry");
    if (!(e.value >= 0.0)) throw DataError("negative or non-finite rate");
    if (k > 0) {
      const Triplet& p = entries[k - 1];
      if (p.src > e.src || (p.src == e.src && p.dst >= e.dst)) {
        throw DataError("rate entries not sorted by (src, dst)");
      }
    }
  }
}

namespace {

// Row i of a (src, dst)-sorted triplet list.
std::span<const Triplet> row_of(const std::vector<Triplet>& entries, NodeId i) {
  const auto lo = std::lower_bound(entries.begin(), entries.end(), i,
                                   [](const Triplet& t, NodeId v) { return t.src < v; });
  auto hi = lo;
  while (hi != entries.end() && hi->src == i) ++hi;
  return {&*lo, static_cast<std::size_t>(hi - lo)};
}

// Cascades must be time-sorted with unique nodes; loaders and the sampler
// guarantee this, hand-built sets are checked here.
void ensure_canonical(const Cascade& c) {
  if (c.times.empty()) throw DataError("cascade with no infected nodes");
  for (std::size_t k = 1; k < c.times.size(); ++k) {
    const auto& a = c.times[k - 1];
    const auto& b = c.times[k];
    if (a.second > b.second || (a.second == b.second && a.first >= b.first)) {
      throw DataError("cascade entries not sorted by (time, node) or duplicated");
    }
  }
  for (const auto& [v, t] : c.times) {
    (void)v;
    if (!(t >= 0.0) || t > c.horizon) {
      throw DataError("cascade timestamp outside [0, horizon]");
    }
  }
}

// Per-cascade lookup node -> time, valid only for infected nodes.
struct InfectedIndex {
  std::vector<std::pair<NodeId, double>> by_node;  // sorted by node

  explicit InfectedIndex(const Cascade& c) : by_node(c.times) {
    std::sort(by_node.begin(), by_node.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  const double* time_of(NodeId v) const {
    auto it = std::lower_bound(by_node.begin(), by_node.end(), v,
                               [](const auto& a, NodeId b) { return a.first < b; });
    if (it != by_node.end() && it->first == v) return &it->second;
    return nullptr;
  }
};

}  // namespace

double cascade_nll(const Cascade& cascade, const RateMatrix& rates) {
  ensure_canonical(cascade);
  const InfectedIndex infected(cascade);
  const double horizon = cascade.horizon;

  double nll = 0.0;
  // Survival terms, iterated over the stored rate entries of infected rows:
  // uninfected targets survive the whole remaining window, later-infected
  // targets survive until their own infection.
  for (const auto& [i, t_i] : cascade.times) {
    for (const Triplet& e : row_of(rates.entries, i)) {
      const double* t_m = infected.time_of(e.dst);
      if (t_m == nullptr) {
        nll += e.value * (horizon - t_i);
      } else if (*t_m > t_i) {
        nll += e.value * (*t_m - t_i);
      }
    }
  }
  // Hazard term per infected non-seed node.
  for (std::size_t p = 0; p < cascade.times.size(); ++p) {
    const auto [j, t_j] = cascade.times[p];
    if (j == cascade.seed) continue;
    double hazard_sum = 0.0;
    for (std::size_t q = 0; q < p; ++q) {
      const auto [i, t_i] = cascade.times[q];
      if (t_i < t_j) hazard_sum += rates.at(i, j);
    }
    if (!(hazard_sum > 0.0)) return kInf;  // impossible cascade
    nll -= std::log(hazard_sum);
  }
  return nll;
}

TotalNll total_nll(const CascadeSet& set, const RateMatrix& rates) {
  if (set.cascades.empty()) throw DataError("empty cascade set");
  TotalNll out;
  for (std::size_t c = 0; c < set.cascades.size(); ++c) {
    const double v = cascade_nll(set.cascades[c], rates);
    if (v == kInf && !out.impossible_cascade) out.impossible_cascade = c;
    out.value += v;
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> candidate_pairs(const CascadeSet& set) {
  if (set.cascades.empty()) throw DataError("empty cascade set");
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<char> infected_mark(set.node_count, 0);
  for (const Cascade& c : set.cascades) {
    for (const auto& [v, t] : c.times) {
      (void)t;
      infected_mark[v] = 1;
    }
    for (std::size_t p = 0; p < c.times.size(); ++p) {
      for (std::size_t q = p + 1; q < c.times.size(); ++q) {
        // sorted by (time, node): q is later unless tied
        if (c.times[p].second < c.times[q].second) {
          pairs.emplace_back(c.times[p].first, c.times[q].first);
        }
      }
    }
    for (const auto& [i, t] : c.times) {
      (void)t;
      for (NodeId m = 0; m < set.node_count; ++m) {
        if (!infected_mark[m]) pairs.emplace_back(i, m);
      }
    }
    for (const auto& [v, t] : c.times) {
      (void)t;
      infected_mark[v] = 0;
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

std::vector<Triplet> nll_gradient(const CascadeSet& set, const RateMatrix& rates) {
  const auto cands = candidate_pairs(set);
  std::vector<double> grad(cands.size(), 0.0);
  const auto index_of = [&cands](NodeId i, NodeId j) {
    const auto it =
        std::lower_bound(cands.begin(), cands.end(), std::make_pair(i, j));
    return static_cast<std::size_t>(it - cands.begin());
  };

  std::vector<char> infected_mark(set.node_count, 0);
  for (std::size_t ci = 0; ci < set.cascades.size(); ++ci) {
    const Cascade& c = set.cascades[ci];
    for (const auto& [v, t] : c.times) {
      (void)t;
      infected_mark[v] = 1;
    }
    for (const auto& [i, t_i] : c.times) {
      const double window = c.horizon - t_i;
      for (NodeId m = 0; m < set.node_count; ++m) {
        if (!infected_mark[m]) grad[index_of(i, m)] += window;
      }
    }
    for (std::size_t p = 0; p < c.times.size(); ++p) {
      const auto [j, t_j] = c.times[p];
      double hazard_sum = 0.0;
      bool has_parent = false;
      for (std::size_t q = 0; q < p; ++q) {
        const auto [i, t_i] = c.times[q];
        if (t_i < t_j) {
          hazard_sum += rates.at(i, j);
          has_parent = true;
        }
      }
      if (j != c.seed && (!has_parent || !(hazard_sum > 0.0))) {
        throw ImpossibleCascadeError(ci);
      }
      for (std::size_t q = 0; q < p; ++q) {
        const auto [i, t_i] = c.times[q];
        if (t_i < t_j) {
          grad[index_of(i, j)] += (t_j - t_i) - 1.0 / hazard_sum;
        }
      }
    }
    for (const auto& [v, t] : c.times) {
      (void)t;
      infected_mark[v] = 0;
    }
  }

  std::vector<Triplet> out(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    out[k] = Triplet{cands[k].first, cands[k].second, grad[k]};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solver. The objective decomposes by infection target j: the column
// subproblem is  min_{a >= 0}  w . a - sum_events log(sum_{i in prefix} a_i),
// where every hazard event references a prefix of one cascade's time-sorted
// infected list. Events are kept as (cascade, cutoff) references instead of
// materialized parent lists, which keeps memory linear in the input.
// ---------------------------------------------------------------------------

namespace {

struct PreparedCascades {
  const CascadeSet* set = nullptr;
  // Flattened per-cascade (node, rank) pairs sorted by node, for O(log)
  // membership and rank lookup inside one cascade.
  std::vector<std::pair<NodeId, std::uint32_t>> node_rank;
  std::vector<std::size_t> node_rank_offsets;
  // Incidence: for each node, the (cascade, rank) pairs where it is infected.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> incidence;
  std::vector<std::size_t> incidence_offsets;
  std::vector<double> survival_weight;       // R[i]: sum of (T - t_i) over cascades
  std::vector<std::uint32_t> infected_count; // cascades containing the node

  std::span<const std::pair<NodeId, std::uint32_t>> cascade_node_rank(
      std::uint32_t c) const {
    return {node_rank.data() + node_rank_offsets[c],
            node_rank_offsets[c + 1] - node_rank_offsets[c]};
  }
  std::span<const std::pair<std::uint32_t, std::uint32_t>> node_incidence(
      NodeId v) const {
    return {incidence.data() + incidence_offsets[v],
            incidence_offsets[v + 1] - incidence_offsets[v]};
  }
};

PreparedCascades prepare(const CascadeSet& set) {
  PreparedCascades prep;
  prep.set = &set;
  const NodeId n = set.node_count;
  const std::size_t num_cascades = set.cascades.size();
  for (const Cascade& c : set.cascades) {
    ensure_canonical(c);
    for (const auto& [v, t] : c.times) {
      (void)t;
      if (v >= n) throw DataError("cascade node index out of range");
    }
  }

  prep.node_rank_offsets.assign(num_cascades + 1, 0);
  std::size_t total = 0;
  for (std::size_t c = 0; c < num_cascades; ++c) {
    total += set.cascades[c].times.size();
    prep.node_rank_offsets[c + 1] = total;
  }
  prep.node_rank.resize(total);
  prep.survival_weight.assign(n, 0.0);
  prep.infected_count.assign(n, 0);

  std::vector<std::size_t> incidence_count(n, 0);
  for (std::size_t c = 0; c < num_cascades; ++c) {
    const Cascade& cas = set.cascades[c];
    auto* slot = prep.node_rank.data() + prep.node_rank_offsets[c];
    for (std::uint32_t r = 0; r < cas.times.size(); ++r) {
      const auto [v, t] = cas.times[r];
      slot[r] = {v, r};
      prep.survival_weight[v] += cas.horizon - t;
      ++prep.infected_count[v];
      ++incidence_count[v];
    }
    std::sort(slot, slot + cas.times.size(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  prep.incidence_offsets.assign(n + 1, 0);
  for (NodeId v = 0; v < n; ++v) {
    prep.incidence_offsets[v + 1] = prep.incidence_offsets[v] + incidence_count[v];
  }
  prep.incidence.resize(prep.incidence_offsets[n]);
  std::vector<std::size_t> cursor(prep.incidence_offsets.begin(),
                                  prep.incidence_offsets.end() - 1);
  for (std::size_t c = 0; c < num_cascades; ++c) {
    const Cascade& cas = set.cascades[c];
    for (std::uint32_t r = 0; r < cas.times.size(); ++r) {
      const NodeId v = cas.times[r].first;
      prep.incidence[cursor[v]++] = {static_cast<std::uint32_t>(c), r};
    }
  }
  return prep;
}

struct HazardEvent {
  std::uint32_t cascade = 0;
  std::uint32_t cutoff = 0;  // parents = time-sorted entries [0, cutoff)
};

// Scratch buffers reused across the columns handled by one worker.
struct ColumnScratch {
  std::vector<double> w_corr;
  std::vector<std::uint32_t> co_le;  // cascades where t_j <= t_i
  std::vector<std::int32_t> local;   // node -> candidate index or -1
  std::vector<NodeId> cand;
  std::vector<double> w;
  std::vector<HazardEvent> events;
  std::vector<double> alpha;
  std::vector<double> trial;
  std::vector<double> grad;
  std::vector<double> sigma;
  std::vector<double> inv_sigma;
  std::vector<std::uint32_t> supp;
  std::vector<std::uint32_t> active;

  explicit ColumnScratch(NodeId n)
      : w_corr(n, 0.0), co_le(n, 0), local(n, -1) {}
};

struct ColumnResult {
  std::vector<std::pair<NodeId, double>> rates;  // (source, alpha), ascending source
  double objective = 0.0;
  std::uint32_t iterations = 0;
};

class ColumnSolver {
 public:
  ColumnSolver(const PreparedCascades& prep, const SolverConfig& config,
               ColumnScratch& scratch)
      : prep_(prep), config_(config), s_(scratch) {}

  ColumnResult solve(NodeId j) {
    current_j_ = j;
    build(j);
    ColumnResult result;
    if (!s_.cand.empty()) {
      run_pgd(result);
      for (std::size_t l = 0; l < s_.cand.size(); ++l) {
        const double a = s_.alpha[l];
        if (a > 0.0 && a >= config_.prune_threshold) {
          result.rates.emplace_back(s_.cand[l], a);
        }
      }
    }
    cleanup();
    return result;
  }

 private:
  void build(NodeId j) {
    const CascadeSet& set = *prep_.set;
    s_.cand.clear();
    s_.w.clear();
    s_.events.clear();
    total_prefix_ = 0;
    max_cascade_size_ = 1;

    for (const auto& [c, rank_j] : prep_.node_incidence(j)) {
      const Cascade& cas = set.cascades[c];
      const double t_j = cas.times[rank_j].second;
      for (std::uint32_t q = 0; q < cas.times.size(); ++q) {
        const auto [i, t_i] = cas.times[q];
        if (i == j) continue;
        s_.w_corr[i] -= cas.horizon - t_i;
        if (t_i < t_j) {
          s_.w_corr[i] += t_j - t_i;
        } else {
          ++s_.co_le[i];
        }
      }
      if (j != cas.seed) {
        std::uint32_t cutoff = rank_j;
        while (cutoff > 0 && cas.times[cutoff - 1].second == t_j) --cutoff;
        if (cutoff == 0) throw ImpossibleCascadeError(c);
        s_.events.push_back({c, cutoff});
        total_prefix_ += cutoff;
        max_cascade_size_ = std::max<std::size_t>(max_cascade_size_, cas.times.size());
      }
    }

    const NodeId n = set.node_count;
    for (NodeId i = 0; i < n; ++i) {
      if (i == j || prep_.infected_count[i] == 0) continue;
      if (s_.co_le[i] == prep_.infected_count[i]) continue;  // not a candidate
      s_.local[i] = static_cast<std::int32_t>(s_.cand.size());
      s_.cand.push_back(i);
      s_.w.push_back(prep_.survival_weight[i] + s_.w_corr[i]);
    }

    s_.alpha.assign(s_.cand.size(), config_.initial_rate);
    s_.trial.resize(s_.cand.size());
    s_.grad.resize(s_.cand.size());
    s_.sigma.resize(s_.events.size());
    s_.inv_sigma.resize(s_.events.size());
    log_size_ = 1;
    while ((std::size_t{1} << log_size_) < max_cascade_size_) ++log_size_;
  }

  void cleanup() {
    // Dense per-node scratch is shared across columns; reset only what was
    // touched (anything co-infected plus candidate slots).
    const CascadeSet& set = *prep_.set;
    for (const auto& [c, rank_j] : prep_.node_incidence(current_j_)) {
      (void)rank_j;
      for (const auto& [i, t] : set.cascades[c].times) {
        (void)t;
        s_.w_corr[i] = 0.0;
        s_.co_le[i] = 0;
      }
    }
    for (NodeId i : s_.cand) s_.local[i] = -1;
  }

  bool prefix_member(NodeId node, const HazardEvent& e, std::uint32_t* rank) const {
    const auto slice = prep_.cascade_node_rank(e.cascade);
    auto it = std::lower_bound(slice.begin(), slice.end(), node,
                               [](const auto& a, NodeId b) { return a.first < b; });
    if (it == slice.end() || it->first != node) return false;
    *rank = it->second;
    return it->second < e.cutoff;
  }

  // sigma_e = sum of alpha over the event's parent prefix. Two strategies:
  // stream the prefix (cost = cutoff) or probe the support (cost =
  // |supp| log |cascade|); pick per call by estimated cost.
  void eval_sigmas(const std::vector<double>& a, std::size_t supp_size) {
    const CascadeSet& set = *prep_.set;
    const bool sparse =
        supp_size * (log_size_ + 1) * s_.events.size() < total_prefix_;
    if (sparse) {
      build_supp(a);
      for (std::size_t e = 0; e < s_.events.size(); ++e) {
        const HazardEvent& ev = s_.events[e];
        double sigma = 0.0;
        std::uint32_t rank = 0;
        for (const std::uint32_t l : s_.supp) {
          if (prefix_member(s_.cand[l], ev, &rank)) sigma += a[l];
        }
        s_.sigma[e] = sigma;
      }
    } else {
      for (std::size_t e = 0; e < s_.events.size(); ++e) {
        const HazardEvent& ev = s_.events[e];
        const auto& times = set.cascades[ev.cascade].times;
        double sigma = 0.0;
        for (std::uint32_t q = 0; q < ev.cutoff; ++q) {
          sigma += a[s_.local[times[q].first]];
        }
        s_.sigma[e] = sigma;
      }
    }
  }

  void build_supp(const std::vector<double>& a) {
    s_.supp.clear();
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (a[l] > 0.0) s_.supp.push_back(static_cast<std::uint32_t>(l));
    }
  }

  std::size_t count_nonzero(const std::vector<double>& a) const {
    std::size_t k = 0;
    for (const double v : a) k += (v > 0.0);
    return k;
  }

  // Objective at `a`; +inf when some event has zero hazard mass.
  double objective(const std::vector<double>& a) {
    eval_sigmas(a, count_nonzero(a));
    double f = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) f += s_.w[l] * a[l];
    for (const double sigma : s_.sigma) {
      if (!(sigma > 0.0)) return kInf;
      f -= std::log(sigma);
    }
    return f;
  }

  // Gradient at the current accepted point (sigmas already evaluated there).
  // Coordinates pinned at zero whose linear weight dominates the total
  // hazard pull cannot move; their exact gradient is skipped.
  void gradient() {
    double h_total = 0.0;
    for (std::size_t e = 0; e < s_.events.size(); ++e) {
      s_.inv_sigma[e] = 1.0 / s_.sigma[e];
      h_total += s_.inv_sigma[e];
    }
    s_.active.clear();
    for (std::size_t l = 0; l < s_.cand.size(); ++l) {
      if (s_.alpha[l] == 0.0 && s_.w[l] >= h_total) {
        s_.grad[l] = s_.w[l];  // any nonnegative value leaves the iterate at 0
      } else {
        s_.active.push_back(static_cast<std::uint32_t>(l));
      }
    }
    const bool sparse =
        s_.active.size() * (log_size_ + 1) * s_.events.size() < total_prefix_;
    if (sparse) {
      for (const std::uint32_t l : s_.active) {
        double h = 0.0;
        std::uint32_t rank = 0;
        for (std::size_t e = 0; e < s_.events.size(); ++e) {
          if (prefix_member(s_.cand[l], s_.events[e], &rank)) h += s_.inv_sigma[e];
        }
        s_.grad[l] = s_.w[l] - h;
      }
    } else {
      for (const std::uint32_t l : s_.active) s_.grad[l] = s_.w[l];
      const CascadeSet& set = *prep_.set;
      for (std::size_t e = 0; e < s_.events.size(); ++e) {
        const HazardEvent& ev = s_.events[e];
        const auto& times = set.cascades[ev.cascade].times;
        const double pull = s_.inv_sigma[e];
        for (std::uint32_t q = 0; q < ev.cutoff; ++q) {
          s_.grad[s_.local[times[q].first]] -= pull;
        }
      }
      // The scatter also touched frozen coordinates; restore their marker
      // value (sign is all that matters for them).
      for (std::size_t l = 0; l < s_.cand.size(); ++l) {
        if (s_.alpha[l] == 0.0 && s_.w[l] >= h_total) s_.grad[l] = s_.w[l];
      }
    }
  }

  void run_pgd(ColumnResult& result) {
    double f_cur = objective(s_.alpha);
    if (!std::isfinite(f_cur)) {
      if (f_cur == kInf) {
        // Cannot happen with positive initial_rate on candidate prefixes.
        throw NumericalError("non-finite objective at initialization");
      }
      throw NumericalError("objective not finite at initialization");
    }
    // Invariant: s_.sigma always matches s_.alpha here (the last objective()
    // call in the previous iteration evaluated the accepted point).
    double step = config_.step_size;
    for (std::uint32_t iter = 0; iter < config_.max_iterations; ++iter) {
      gradient();
      double f_trial = kInf;
      bool accepted = false;
      for (int halvings = 0; halvings < 64; ++halvings) {
        for (std::size_t l = 0; l < s_.cand.size(); ++l) {
          s_.trial[l] = std::max(0.0, s_.alpha[l] - step * s_.grad[l]);
        }
        f_trial = objective(s_.trial);
        if (f_trial <= f_cur) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // no descent direction left: stationary
      std::swap(s_.alpha, s_.trial);
      ++result.iterations;
      const double decrease = f_cur - f_trial;
      const bool converged = decrease <= config_.tolerance * std::max(1.0, std::fabs(f_cur));
      f_cur = f_trial;
      step *= 2.0;
      if (converged) break;
    }
    result.objective = f_cur;
  }

  const PreparedCascades& prep_;
  const SolverConfig& config_;
  ColumnScratch& s_;
  std::size_t total_prefix_ = 0;
  std::size_t max_cascade_size_ = 1;
  std::size_t log_size_ = 1;
  NodeId current_j_ = 0;
};

}  // namespace

InferResult infer_rates(const CascadeSet& set, const SolverConfig& config) {
  if (set.cascades.empty()) throw DataError("empty cascade set");
  if (!(config.step_size > 0.0) || !(config.tolerance > 0.0) ||
      !(config.initial_rate > 0.0) || config.prune_threshold < 0.0 ||
      config.max_iterations == 0) {
    throw UsageError("invalid solver configuration");
  }
  const PreparedCascades prep = prepare(set);
  const NodeId n = set.node_count;

  std::vector<ColumnResult> columns(n);
  parallel_for(n, config.threads, [&](std::size_t begin, std::size_t end) {
    ColumnScratch scratch(n);
    for (std::size_t j = begin; j < end; ++j) {
      ColumnSolver solver(prep, config, scratch);
      columns[j] = solver.solve(static_cast<NodeId>(j));
    }
  });

  InferResult out;
  out.rates.node_count = n;
  for (NodeId j = 0; j < n; ++j) {
    out.objective += columns[j].objective;
    out.iterations += columns[j].iterations;
    for (const auto& [i, a] : columns[j].rates) {
      out.rates.entries.push_back(Triplet{i, j, a});
    }
  }
  std::sort(out.rates.entries.begin(), out.rates.entries.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.src != b.src ? a.src < b.src : a.dst < b.dst;
            });
  if (!std::isfinite(out.objective)) {
    throw NumericalError("solver produced a non-finite objective");
  }
  return out;
}

void save_rates(const RateMatrix& rates, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write rate file: " + path);
  char buf[64];
  for (const Triplet& e : rates.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << e.src << '\t' << e.dst << '\t' << buf << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

RateMatrix load_rates(const std::string& path, NodeId node_count_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rate file: " + path);
  RateMatrix m;
  NodeId max_node = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    unsigned long long i = 0, j = 0;
    double a = 0.0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%llu %llu %lf %c", &i, &j, &a, &tail) != 3) {
      throw DataError(ctx + ": expected `i<TAB>j<TAB>alpha`");
    }
    if (i == j) throw DataError(ctx + ": diagonal rate entry");
    if (!(a >= 0.0)) throw DataError(ctx + ": negative or non-finite rate");
    m.entries.push_back(Triplet{static_cast<NodeId>(i), static_cast<NodeId>(j), a});
    max_node = std::max({max_node, static_cast<NodeId>(i), static_cast<NodeId>(j)});
    any = true;
  }
  const NodeId inferred = any ? max_node + 1 : 0;
  if (node_count_override > 0) {
    if (node_count_override < inferred) {
      throw DataError(path + ": node count override smaller than max index + 1");
    }
    m.node_count = node_count_override;
  } else {
    m.node_count = inferred;
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.src != b.src ? a.src < b.src : a.dst < b.dst;
            });
  for (std::size_t k = 1; k < m.entries.size(); ++k) {
    if (m.entries[k].src == m.entries[k - 1].src &&
        m.entries[k].dst == m.entries[k - 1].dst) {
      throw DataError(path + ": duplicate rate entry");
    }
  }
  m.validate();
  return m;
}

}  // namespace dbne
