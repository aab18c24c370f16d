#include "dbne/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "dbne/errors.hpp"
#include "dbne/parallel.hpp"

namespace dbne {

TimeModel TimeModel::exponential(double rate) {
  if (!(rate > 0.0)) throw UsageError("exponential time model requires rate > 0");
  return TimeModel{Kind::kExponential, rate};
}

TimeModel TimeModel::power_law(double exponent) {
  if (!(exponent > 1.0)) {
    // (a-1) t^-a is only normalizable on [1, inf) for a > 1.
    throw UsageError("power-law time model requires exponent > 1");
  }
  return TimeModel{Kind::kPowerLaw, exponent};
}

double sample_delay(const TimeModel& model, Rng& rng) {
  const double u = rng.next_unit();  // in (0, 1)
  switch (model.kind) {
    case TimeModel::Kind::kExponential:
      return -std::log(u) / model.param;
    case TimeModel::Kind::kPowerLaw:
      // Inverse CDF of (a-1) t^-a on t >= 1.
      return std::pow(u, -1.0 / (model.param - 1.0));
  }
  throw UsageError("unknown time model");
}

DiffusionTrace simulate_diffusion(const Graph& graph, NodeId seed, std::uint32_t steps,
                                  const TimeModel& model, Rng& rng) {
  const NodeId n = graph.node_count();
  if (seed >= n) throw DataError("diffusion seed out of range");

  DiffusionTrace trace;
  trace.seed = seed;
  trace.activation_order.push_back(seed);
  trace.times.push_back(0.0);
  trace.active_set_sizes.push_back(1);

  std::vector<double> time_of(n, 0.0);
  std::vector<char> active(n, 0);
  active[seed] = 1;

  // Per-step pending activations, deduplicated with an epoch mark so the
  // buffers are allocated once.
  std::vector<std::uint32_t> pending_mark(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> pending_time(n, 0.0);
  std::vector<NodeId> pending_drawer(n, 0);
  std::vector<NodeId> pending_list;

  for (std::uint32_t k = 0; k < steps; ++k) {
    pending_list.clear();
    const std::uint32_t active_count = trace.active_set_sizes.back();
    for (std::uint32_t idx = 0; idx < active_count; ++idx) {
      const NodeId v = trace.activation_order[idx];
      const auto neighbors = graph.out_neighbors(v);
      if (neighbors.empty()) continue;  // dead end: draws nothing this step
      const NodeId w = neighbors[rng.next_below(neighbors.size())];
      if (active[w]) continue;  // already active: first infection only
      const double t = time_of[v] + sample_delay(model, rng);
      if (pending_mark[w] != k) {
        pending_mark[w] = k;
        pending_time[w] = t;
        pending_drawer[w] = v;
        pending_list.push_back(w);
      } else if (t < pending_time[w] ||
                 (t == pending_time[w] && v < pending_drawer[w])) {
        pending_time[w] = t;
        pending_drawer[w] = v;
      }
    }
    for (NodeId w : pending_list) {
      active[w] = 1;
      time_of[w] = pending_time[w];
      trace.activation_order.push_back(w);
      trace.times.push_back(pending_time[w]);
    }
    trace.active_set_sizes.push_back(
        static_cast<std::uint32_t>(trace.activation_order.size()));
  }
  return trace;
}

bool Cascade::contains(NodeId v) const {
  for (const auto& [node, t] : times) {
    (void)t;
    if (node == v) return true;
  }
  return false;
}

Cascade formulate_cascade(const DiffusionTrace& trace, double horizon) {
  if (!(horizon > 0.0)) throw UsageError("observation window must be positive");
  Cascade c;
  c.seed = trace.seed;
  c.horizon = horizon;
  for (std::size_t i = 0; i < trace.activation_order.size(); ++i) {
    if (trace.times[i] <= horizon) {
      c.times.emplace_back(trace.activation_order[i], trace.times[i]);
    }
  }
  std::sort(c.times.begin(), c.times.end(),
            [](const auto& a, const auto& b) {
              return a.second != b.second ? a.second < b.second : a.first < b.first;
            });
  return c;
}

CascadeSet generate_cascades(const Graph& graph, const SamplerParams& params,
                             std::uint64_t master_seed, unsigned threads) {
  if (params.passes < 1) throw UsageError("passes must be >= 1");
  const NodeId n = graph.node_count();

  // Pass-level shuffled vertex orders, drawn up front so cascade generation
  // can be parallelized over (pass, position).
  std::vector<std::vector<NodeId>> orders(params.passes);
  for (std::uint32_t p = 0; p < params.passes; ++p) {
    auto& order = orders[p];
    order.resize(n);
    for (NodeId v = 0; v < n; ++v) order[v] = v;
    Rng shuffle_rng(derive_seed(master_seed, {stage::kShuffle, p}));
    for (NodeId i = n; i > 1; --i) {  // Fisher-Yates
      const auto j = static_cast<NodeId>(shuffle_rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
  }

  CascadeSet set;
  set.node_count = n;
  set.cascades.resize(static_cast<std::size_t>(params.passes) * n);
  parallel_for(set.cascades.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::uint32_t pass = static_cast<std::uint32_t>(idx / n);
      const NodeId seed_node = orders[pass][idx % n];
      Rng rng(derive_seed(master_seed, {stage::kCascade, pass, seed_node}));
      const DiffusionTrace trace =
          simulate_diffusion(graph, seed_node, params.steps, params.time_model, rng);
      set.cascades[idx] = formulate_cascade(trace, params.horizon);
    }
  });
  return set;
}

std::vector<NodeId> random_walk(const Graph& graph, NodeId start, std::size_t length,
                                Rng& rng) {
  if (length < 1) throw UsageError("walk length must be >= 1");
  if (start >= graph.node_count()) throw DataError("walk start out of range");
  std::vector<NodeId> walk{start};
  while (walk.size() < length) {
    const auto neighbors = graph.out_neighbors(walk.back());
    if (neighbors.empty()) break;
    walk.push_back(neighbors[rng.next_below(neighbors.size())]);
  }
  return walk;
}

void save_cascades(const CascadeSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write cascade file: " + path);
  char buf[64];
  for (const auto& c : set.cascades) {
    out << c.seed << ';';
    std::snprintf(buf, sizeof buf, "%.17g", c.horizon);
    out << buf << ';';
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      if (i > 0) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", c.times[i].second);
      out << c.times[i].first << ':' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

namespace {

double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) {
    throw DataError(context + ": bad number `" + s + "`");
  }
  return v;
}

std::uint64_t parse_node(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty()) {
    throw DataError(context + ": bad node index `" + s + "`");
  }
  return v;
}

}  // namespace

CascadeSet load_cascades(const std::string& path, NodeId node_count_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cascade file: " + path);

  CascadeSet set;
  NodeId max_node = 0;
  bool any_node = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    const auto first = line.find(';');
    const auto second = line.find(';', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) {
      throw DataError(ctx + ": expected `seed;horizon;entries`");
    }
    Cascade c;
    c.seed = static_cast<NodeId>(parse_node(line.substr(0, first), ctx));
    c.horizon = parse_double(line.substr(first + 1, second - first - 1), ctx);
    if (!(c.horizon > 0.0)) throw DataError(ctx + ": horizon must be positive");

    const std::string entries = line.substr(second + 1);
    std::size_t pos = 0;
    while (pos < entries.size()) {
      auto comma = entries.find(',', pos);
      if (comma == std::string::npos) comma = entries.size();
      const std::string item = entries.substr(pos, comma - pos);
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw DataError(ctx + ": expected `node:time`, got `" + item + "`");
      }
      const NodeId node = static_cast<NodeId>(parse_node(item.substr(0, colon), ctx));
      const double t = parse_double(item.substr(colon + 1), ctx);
      if (t < 0.0 || t > c.horizon) {
        throw DataError(ctx + ": timestamp outside [0, horizon]");
      }
      c.times.emplace_back(node, t);
      max_node = std::max(max_node, node);
      any_node = true;
      pos = comma + 1;
    }
    max_node = std::max(max_node, c.seed);
    any_node = true;

    std::sort(c.times.begin(), c.times.end(),
              [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second < b.second : a.first < b.first;
              });
    for (std::size_t i = 1; i < c.times.size(); ++i) {
      if (c.times[i].first == c.times[i - 1].first) {
        throw DataError(ctx + ": duplicate node in cascade");
      }
    }
    bool seed_ok = false;
    for (const auto& [node, t] : c.times) {
      if (node == c.seed) {
        seed_ok = (t == 0.0);
        break;
      }
    }
    if (!seed_ok) throw DataError(ctx + ": seed must appear with time 0");
    set.cascades.push_back(std::move(c));
  }
  if (set.cascades.empty()) throw DataError(path + ": no cascades");

  const NodeId inferred = any_node ? max_node + 1 : 0;
  if (node_count_override > 0) {
    if (node_count_override < inferred) {
      throw DataError(path + ": node count override smaller than max index + 1");
    }
    set.node_count = node_count_override;
  } else {
    set.node_count = inferred;
  }
  // Duplicate-node check above guarantees per-cascade indices are unique;
  // range-check against the final node count.
  for (const auto& c : set.cascades) {
    for (const auto& [node, t] : c.times) {
      (void)t;
      if (node >= set.node_count) throw DataError(path + ": node index out of range");
    }
  }
  return set;
}

}  // namespace dbne
