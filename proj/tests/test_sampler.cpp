#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dbne/errors.hpp"
#include "dbne/graph.hpp"
#include "dbne/sampler.hpp"
#include "test_util.hpp"

using namespace dbne;
using test_util::TempDir;
using test_util::read_file;
using test_util::write_file;

namespace {

// The directed 4-node example graph: 0->1, 1->2, 2->1, 2->3.
Graph four_node_graph() {
  IdMap ids;
  for (const char* name : {"v1", "v2", "v3", "v4"}) ids.intern(name);
  return Graph(std::move(ids), 4, {{0, 1}, {1, 2}, {2, 1}, {2, 3}}, true);
}

Graph ring_graph(NodeId n) {
  IdMap ids;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 0; v < n; ++v) {
    ids.intern("r" + std::to_string(v));
    edges.emplace_back(v, (v + 1) % n);
    edges.emplace_back(v, (v + 3) % n);
  }
  return Graph(std::move(ids), n, std::move(edges), true);
}

std::map<NodeId, double> time_map(const DiffusionTrace& t) {
  std::map<NodeId, double> m;
  for (std::size_t i = 0; i < t.activation_order.size(); ++i) {
    m[t.activation_order[i]] = t.times[i];
  }
  return m;
}

}  // namespace

TEST_CASE("delay sampling matches the analytic moments") {
  Rng rng(12345);
  const int n = 1000000;

  double exp_sum = 0.0;
  const TimeModel exp_model = TimeModel::exponential(1.0);
  for (int i = 0; i < n; ++i) exp_sum += sample_delay(exp_model, rng);
  const double exp_mean = exp_sum / n;
  CHECK(exp_mean > 0.99);
  CHECK(exp_mean < 1.01);

  double pl_sum = 0.0;
  double pl_min = 1e300;
  const TimeModel pl_model = TimeModel::power_law(3.0);
  for (int i = 0; i < n; ++i) {
    const double d = sample_delay(pl_model, rng);
    pl_sum += d;
    pl_min = std::min(pl_min, d);
  }
  const double pl_mean = pl_sum / n;  // analytic mean (a-1)/(a-2) = 2
  CHECK(pl_mean > 1.98);
  CHECK(pl_mean < 2.02);
  CHECK(pl_min >= 1.0);  // support of the power law is [1, inf)
}

TEST_CASE("delays are strictly positive") {
  Rng rng(7);
  for (const TimeModel& m : {TimeModel::exponential(4.0), TimeModel::power_law(1.5)}) {
    for (int i = 0; i < 10000; ++i) CHECK(sample_delay(m, rng) > 0.0);
  }
}

TEST_CASE("invalid time model parameters are rejected") {
  CHECK_THROWS_AS(TimeModel::exponential(0.0), UsageError);
  CHECK_THROWS_AS(TimeModel::exponential(-1.0), UsageError);
  CHECK_THROWS_AS(TimeModel::power_law(1.0), UsageError);
}

TEST_CASE("zero-step trace is seed only") {
  const Graph g = four_node_graph();
  Rng rng(1);
  const DiffusionTrace t = simulate_diffusion(g, 2, 0, TimeModel::exponential(1.0), rng);
  CHECK(t.activation_order == std::vector<NodeId>{2});
  CHECK(t.times == std::vector<double>{0.0});
  CHECK(t.active_set_sizes == std::vector<std::uint32_t>{1});
}

TEST_CASE("four-node example: three-step evolution") {
  // From seed v1 the first two steps are forced (v1 -> v2 -> v3); step three
  // keeps the set fixed iff v3 draws v2, which happens half the time.
  const Graph g = four_node_graph();
  int matches = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(i)}));
    const DiffusionTrace t =
        simulate_diffusion(g, 0, 3, TimeModel::exponential(1.0), rng);
    REQUIRE(t.active_set_sizes.size() == 4);
    CHECK(t.active_set_sizes[0] == 1);
    CHECK(t.active_set_sizes[1] == 2);
    CHECK(t.active_set_sizes[2] == 3);
    const auto s3 = t.active_set(3);
    if (std::vector<NodeId>(s3.begin(), s3.end()) == std::vector<NodeId>{0, 1, 2}) {
      ++matches;
    }
  }
  const double freq = static_cast<double>(matches) / trials;
  CHECK(freq > 0.45);
  CHECK(freq < 0.55);
}

TEST_CASE("four-node example: diffusion can reach the walk-unreachable node") {
  const Graph g = four_node_graph();
  int reached = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(4242, {static_cast<std::uint64_t>(i)}));
    const DiffusionTrace t =
        simulate_diffusion(g, 0, 5, TimeModel::exponential(1.0), rng);
    const auto s5 = t.active_set(5);
    if (std::find(s5.begin(), s5.end(), NodeId{3}) != s5.end()) ++reached;
  }
  CHECK(reached > 0);
}

TEST_CASE("trace invariants on a random graph") {
  const Graph g = ring_graph(24);
  for (int i = 0; i < 200; ++i) {
    Rng rng(derive_seed(5, {static_cast<std::uint64_t>(i)}));
    const NodeId seed = static_cast<NodeId>(i % 24);
    const DiffusionTrace t =
        simulate_diffusion(g, seed, 12, TimeModel::exponential(1.0), rng);
    // monotone active sets (sizes are prefix lengths by construction)
    for (std::size_t k = 1; k < t.active_set_sizes.size(); ++k) {
      CHECK(t.active_set_sizes[k] >= t.active_set_sizes[k - 1]);
    }
    // seed at time zero, every other node strictly positive
    CHECK(t.activation_order.front() == seed);
    CHECK(t.times.front() == 0.0);
    const auto times = time_map(t);
    for (std::size_t p = 1; p < t.activation_order.size(); ++p) {
      CHECK(t.times[p] > 0.0);
      // causal ordering: some in-neighbor was infected strictly earlier
      const NodeId j = t.activation_order[p];
      bool has_earlier_parent = false;
      for (NodeId u = 0; u < g.node_count(); ++u) {
        const auto nb = g.out_neighbors(u);
        if (std::find(nb.begin(), nb.end(), j) == nb.end()) continue;
        const auto it = times.find(u);
        if (it != times.end() && it->second < t.times[p]) has_earlier_parent = true;
      }
      CHECK(has_earlier_parent);
    }
  }
}

TEST_CASE("same stream yields identical prefixes for longer runs") {
  const Graph g = ring_graph(24);
  Rng rng_a(77);
  Rng rng_b(77);
  const DiffusionTrace short_run =
      simulate_diffusion(g, 0, 4, TimeModel::exponential(1.0), rng_a);
  const DiffusionTrace long_run =
      simulate_diffusion(g, 0, 8, TimeModel::exponential(1.0), rng_b);
  for (std::size_t k = 0; k <= 4; ++k) {
    const auto a = short_run.active_set(k);
    const auto b = long_run.active_set(k);
    CHECK(std::vector<NodeId>(a.begin(), a.end()) ==
          std::vector<NodeId>(b.begin(), b.end()));
  }
}

TEST_CASE("expected coverage grows with the step budget") {
  const Graph g = ring_graph(24);
  std::vector<double> mean_size(5, 0.0);
  const std::vector<std::uint32_t> budgets = {0, 2, 4, 8, 16};
  const int trials = 400;
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(31, {static_cast<std::uint64_t>(i)}));
    const DiffusionTrace t =
        simulate_diffusion(g, 0, 16, TimeModel::exponential(1.0), rng);
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      mean_size[b] += t.active_set_sizes[budgets[b]];
    }
  }
  for (std::size_t b = 1; b < budgets.size(); ++b) {
    CHECK(mean_size[b] >= mean_size[b - 1]);
  }
}

TEST_CASE("formulate_cascade filters by the window") {
  DiffusionTrace t;
  t.seed = 0;
  t.activation_order = {0, 1, 2};
  t.times = {0.0, 3.0, 12.0};
  t.active_set_sizes = {1, 2, 3};

  const Cascade c = formulate_cascade(t, 10.0);
  CHECK(c.times == std::vector<std::pair<NodeId, double>>{{0, 0.0}, {1, 3.0}});
  CHECK(c.horizon == 10.0);
  CHECK(c.seed == 0);

  const Cascade all = formulate_cascade(t, 20.0);
  CHECK(all.times.size() == 3);

  DiffusionTrace seed_only;
  seed_only.seed = 5;
  seed_only.activation_order = {5};
  seed_only.times = {0.0};
  seed_only.active_set_sizes = {1};
  const Cascade c2 = formulate_cascade(seed_only, 1.0);
  CHECK(c2.times == std::vector<std::pair<NodeId, double>>{{5, 0.0}});
}

TEST_CASE("generate_cascades counts and determinism") {
  const Graph g = ring_graph(4);
  SamplerParams params;
  params.steps = 6;
  params.horizon = 10.0;
  params.passes = 2;

  const CascadeSet a = generate_cascades(g, params, 2024, 1);
  CHECK(a.cascades.size() == 8);
  CHECK(a.node_count == 4);
  std::map<NodeId, int> seed_counts;
  for (const Cascade& c : a.cascades) ++seed_counts[c.seed];
  for (NodeId v = 0; v < 4; ++v) CHECK(seed_counts[v] == 2);

  // identical across reruns and across thread counts
  const CascadeSet b = generate_cascades(g, params, 2024, 4);
  REQUIRE(a.cascades.size() == b.cascades.size());
  for (std::size_t i = 0; i < a.cascades.size(); ++i) {
    CHECK(a.cascades[i].seed == b.cascades[i].seed);
    CHECK(a.cascades[i].times == b.cascades[i].times);
  }

  const CascadeSet c = generate_cascades(g, params, 2025, 1);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.cascades.size(); ++i) {
    if (a.cascades[i].times != c.cascades[i].times) any_diff = true;
  }
  CHECK(any_diff);  // different master seed, different cascades
}

TEST_CASE("each cascade clock restarts at zero") {
  const Graph g = ring_graph(6);
  SamplerParams params;
  params.steps = 4;
  params.horizon = 50.0;
  params.passes = 3;
  const CascadeSet set = generate_cascades(g, params, 9, 2);
  for (const Cascade& c : set.cascades) {
    bool seed_at_zero = false;
    for (const auto& [node, t] : c.times) {
      CHECK(t >= 0.0);
      CHECK(t <= c.horizon);
      if (node == c.seed) seed_at_zero = (t == 0.0);
    }
    CHECK(seed_at_zero);
  }
}

TEST_CASE("random walk follows edges and halts at sinks") {
  const Graph g = four_node_graph();
  Rng rng(3);

  const auto w1 = random_walk(g, 0, 1, rng);
  CHECK(w1 == std::vector<NodeId>{0});

  // path a->b: length-3 request halts after the sink
  IdMap ids;
  ids.intern("a");
  ids.intern("b");
  const Graph path(std::move(ids), 2, {{0, 1}}, true);
  Rng rng2(5);
  CHECK(random_walk(path, 0, 3, rng2) == std::vector<NodeId>{0, 1});

  // the example walk (v1, v2, v3, v2) occurs with positive probability
  int seen = 0;
  for (int i = 0; i < 200; ++i) {
    Rng r(derive_seed(1, {static_cast<std::uint64_t>(i)}));
    if (random_walk(g, 0, 4, r) == std::vector<NodeId>{0, 1, 2, 1}) ++seen;
  }
  CHECK(seen > 0);
}

TEST_CASE("cascade files round-trip exactly") {
  const Graph g = ring_graph(12);
  SamplerParams params;
  params.steps = 8;
  params.horizon = 7.5;
  params.passes = 1;
  const CascadeSet set = generate_cascades(g, params, 321, 2);

  TempDir dir;
  save_cascades(set, dir.file("c.txt"));
  const CascadeSet reloaded = load_cascades(dir.file("c.txt"));
  CHECK(reloaded.node_count == set.node_count);
  REQUIRE(reloaded.cascades.size() == set.cascades.size());
  for (std::size_t i = 0; i < set.cascades.size(); ++i) {
    CHECK(reloaded.cascades[i].seed == set.cascades[i].seed);
    CHECK(reloaded.cascades[i].horizon == set.cascades[i].horizon);
    CHECK(reloaded.cascades[i].times == set.cascades[i].times);
  }
  // serialize -> parse -> serialize is byte-stable
  save_cascades(reloaded, dir.file("c2.txt"));
  CHECK(read_file(dir.file("c.txt")) == read_file(dir.file("c2.txt")));
}

TEST_CASE("cascade file validation") {
  TempDir dir;
  write_file(dir.file("bad1.txt"), "0;10\n");
  CHECK_THROWS_AS(load_cascades(dir.file("bad1.txt")), DataError);

  write_file(dir.file("bad2.txt"), "0;10;0:0,1:11\n");  // timestamp beyond horizon
  CHECK_THROWS_AS(load_cascades(dir.file("bad2.txt")), DataError);

  write_file(dir.file("bad3.txt"), "0;10;1:2\n");  // seed missing
  CHECK_THROWS_AS(load_cascades(dir.file("bad3.txt")), DataError);

  write_file(dir.file("bad4.txt"), "0;10;0:0,1:2,1:3\n");  // duplicate node
  CHECK_THROWS_AS(load_cascades(dir.file("bad4.txt")), DataError);

  write_file(dir.file("ok.txt"), "0;10;0:0,2:1.5\n");
  const CascadeSet s = load_cascades(dir.file("ok.txt"));
  CHECK(s.node_count == 3);
  CHECK(load_cascades(dir.file("ok.txt"), 7).node_count == 7);
  CHECK_THROWS_AS(load_cascades(dir.file("ok.txt"), 2), DataError);
}
