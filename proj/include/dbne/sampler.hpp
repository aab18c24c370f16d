#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbne/graph.hpp"
#include "dbne/rng.hpp"

namespace dbne {

// Transmission-delay distribution attached to diffusion hops.
struct TimeModel {
  enum class Kind { kExponential, kPowerLaw };

  Kind kind = Kind::kExponential;
  double param = 1.0;  // rate (exponential) or exponent (power law)

  static TimeModel exponential(double rate);
  static TimeModel power_law(double exponent);  // density (a-1) t^-a on t >= 1
};

// One draw from the delay distribution; strictly positive.
double sample_delay(const TimeModel& model, Rng& rng);

// Result of one memorized diffusion simulation. The active sets grow
// monotonically, so S^k is simply the first active_set_sizes[k] entries of
// activation_order. times[] is parallel to activation_order.
struct DiffusionTrace {
  NodeId seed = 0;
  std::vector<NodeId> activation_order;         // seed first
  std::vector<double> times;                    // first-infection timestamps
  std::vector<std::uint32_t> active_set_sizes;  // |S^0| .. |S^K|

  std::span<const NodeId> active_set(std::size_t k) const {
    return {activation_order.data(), active_set_sizes[k]};
  }
  std::size_t step_count() const { return active_set_sizes.size() - 1; }
};

// Step-synchronous memorized diffusion: every active node draws one
// out-neighbor uniformly at random per step; newly drawn nodes activate with
// timestamp = drawer's timestamp + delay. First infection wins; simultaneous
// draws of the same node keep the minimum timestamp.
DiffusionTrace simulate_diffusion(const Graph& graph, NodeId seed, std::uint32_t steps,
                                  const TimeModel& model, Rng& rng);

// First-infection record truncated to an observation window [0, horizon].
// Nodes absent from `times` are "never infected" within the window.
struct Cascade {
  NodeId seed = 0;
  double horizon = 0.0;
  std::vector<std::pair<NodeId, double>> times;  // sorted by (time, node)

  bool contains(NodeId v) const;
};

Cascade formulate_cascade(const DiffusionTrace& trace, double horizon);

struct CascadeSet {
  NodeId node_count = 0;
  std::vector<Cascade> cascades;
};

struct SamplerParams {
  std::uint32_t steps = 40;   // K
  double horizon = 10.0;      // T
  std::uint32_t passes = 1;   // tau: diffusions started per vertex
  TimeModel time_model = TimeModel();
};

// passes * N cascades: each pass visits all vertices in a fresh shuffled
// order, restarting the clock at 0 for every cascade. Each cascade uses an
// independent substream derived from (master_seed, pass, seed node), so
// parallel and sequential runs produce identical sets.
CascadeSet generate_cascades(const Graph& graph, const SamplerParams& params,
                             std::uint64_t master_seed, unsigned threads = 0);

// Plain single-trace random walk (kept for comparison and tests). Halts
// early at a node with no out-neighbors.
std::vector<NodeId> random_walk(const Graph& graph, NodeId start, std::size_t length,
                                Rng& rng);

// Cascade file: one cascade per line, `seed;horizon;node:time,node:time,...`
// with times at 17 significant digits; round-trips exactly.
void save_cascades(const CascadeSet& set, const std::string& path);
// node_count is recovered as max node index + 1 unless a larger override is
// given (nodes that appear in no cascade would otherwise be dropped).
CascadeSet load_cascades(const std::string& path, NodeId node_count_override = 0);

}  // namespace dbne
