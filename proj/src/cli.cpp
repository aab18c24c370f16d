#include "dbne/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dbne/embedding.hpp"
#include "dbne/errors.hpp"
#include "dbne/evaluation.hpp"
#include "dbne/graph.hpp"
#include "dbne/inference.hpp"
#include "dbne/parallel.hpp"
#include "dbne/rng.hpp"
#include "dbne/sampler.hpp"

namespace dbne::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string graph_path;
  std::string labels_path;
  std::string cascades_path;
  std::string rates_path;
  std::string embedding_path;
  bool directed = false;
  std::uint32_t steps = 40;
  double horizon = 10.0;
  std::uint32_t passes = 1;
  std::string time_model = "exp";
  double time_param = 0.0;  // 0 = model default (exp rate 1, power-law exponent 3)
  int dim = 128;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  unsigned threads = 0;
  std::uint32_t nodes_override = 0;

  SolverConfig solver;
  std::string eval_support_path;

  std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint32_t repetitions = 10;
  double regularization = 1e-4;

  std::string normalize = "row";
  bool symmetrize = false;

  std::string sweep_param;
  std::vector<double> sweep_values;

  std::string config_path;  // consumed before parsing; see expand_config_args
};

// `--config FILE` support: key=value lines are turned into `--key=value`
// arguments injected right after the subcommand name, so explicit flags
// (parsed later, with a take-last policy) override the file.
std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto start = line.find_first_not_of(" \t\r\n");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r\n");
    const std::string item = line.substr(start, end - start + 1);
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError(path + ":" + std::to_string(line_no) +
                       ": expected `key=value`");
    }
    std::string key = item.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = item.substr(eq + 1);
    const auto vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    if (key == "config") {
      throw UsageError(path + ": config files cannot nest");
    }
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

std::vector<std::string> expand_config_args(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      break;
    }
  }
  if (config_path.empty() || args.empty()) return args;
  const auto injected = config_file_args(config_path);
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

TimeModel make_time_model(const std::string& name, double param) {
  if (name == "exp") return TimeModel::exponential(param == 0.0 ? 1.0 : param);
  if (name == "powerlaw") return TimeModel::power_law(param == 0.0 ? 3.0 : param);
  throw UsageError("unknown time model `" + name + "` (expected exp or powerlaw)");
}

NormalizeMode make_normalize_mode(const std::string& name) {
  if (name == "row") return NormalizeMode::kRow;
  if (name == "sym") return NormalizeMode::kSymmetric;
  if (name == "none") return NormalizeMode::kNone;
  throw UsageError("unknown normalization `" + name + "` (expected row, sym or none)");
}

std::string out_file(const std::string& dir, const char* name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

// ---- stages ---------------------------------------------------------------

CascadeSet stage_sample(const Graph& graph, const Options& opt,
                        const std::string& cascades_out) {
  SamplerParams params;
  params.steps = opt.steps;
  params.horizon = opt.horizon;
  params.passes = opt.passes;
  params.time_model = make_time_model(opt.time_model, opt.time_param);
  CascadeSet set = generate_cascades(graph, params, opt.seed, opt.threads);
  save_cascades(set, cascades_out);

  std::size_t infected = 0;
  for (const Cascade& c : set.cascades) infected += c.times.size();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f",
                static_cast<double>(infected) / static_cast<double>(set.cascades.size()));
  std::cout << "cascades: " << set.cascades.size() << "\nmean infected size: " << buf
            << "\nwrote " << cascades_out << "\n";
  return set;
}

void report_support_recovery(const RateMatrix& rates, const std::string& truth_path) {
  std::ifstream in(truth_path);
  if (!in) throw DataError("cannot open reference edge file: " + truth_path);
  std::vector<std::pair<NodeId, NodeId>> truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto pos = line.find_first_not_of(" \t\r\n");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    unsigned long long a = 0, b = 0;
    if (!(ss >> a >> b)) {
      throw DataError(truth_path + ":" + std::to_string(line_no) +
                      ": expected `i j` index pair");
    }
    truth.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  if (truth.empty()) throw DataError(truth_path + ": no reference edges");

  // Sweep thresholds over the distinct inferred values, keeping the one with
  // the best min(precision, recall).
  std::vector<Triplet> sorted = rates.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const Triplet& a, const Triplet& b) { return a.value > b.value; });
  std::size_t hits = 0;
  double best_min = -1.0, best_p = 0.0, best_r = 0.0, best_threshold = 0.0;
  std::size_t k = 0;
  while (k < sorted.size()) {
    const double threshold = sorted[k].value;
    while (k < sorted.size() && sorted[k].value == threshold) {
      if (std::binary_search(truth.begin(), truth.end(),
                             std::make_pair(sorted[k].src, sorted[k].dst))) {
        ++hits;
      }
      ++k;
    }
    const double precision = static_cast<double>(hits) / static_cast<double>(k);
    const double recall = static_cast<double>(hits) / static_cast<double>(truth.size());
    if (std::min(precision, recall) > best_min) {
      best_min = std::min(precision, recall);
      best_p = precision;
      best_r = recall;
      best_threshold = threshold;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "support recovery: precision=%.4f recall=%.4f at threshold=%.6g\n",
                best_p, best_r, best_threshold);
  std::cout << buf;
}

RateMatrix stage_infer(const CascadeSet& set, const Options& opt,
                       const std::string& rates_out) {
  SolverConfig config = opt.solver;
  config.threads = opt.threads;
  InferResult result;
  try {
    result = infer_rates(set, config);
  } catch (const ImpossibleCascadeError& e) {
    throw DataError("cascade " + std::to_string(e.cascade_index + 1) +
                    " is impossible: an infected node has no earlier infected "
                    "neighbor (line " +
                    std::to_string(e.cascade_index + 1) + " of the cascade file)");
  }
  save_rates(result.rates, rates_out);
  char buf[96];
  std::snprintf(buf, sizeof buf, "objective: %.10g\niterations: %llu\n",
                result.objective,
                static_cast<unsigned long long>(result.iterations));
  std::cout << buf << "nonzero rates: " << result.rates.entries.size() << "\nwrote "
            << rates_out << "\n";
  if (!opt.eval_support_path.empty()) {
    report_support_recovery(result.rates, opt.eval_support_path);
  }
  return result.rates;
}

Embedding stage_embed(const RateMatrix& rates, const IdMap& ids, const Options& opt,
                      const std::string& embedding_out) {
  EmbedOptions eopts;
  eopts.normalize = make_normalize_mode(opt.normalize);
  eopts.symmetrize = opt.symmetrize;
  Rng rng(derive_seed(opt.seed, {stage::kSvd}));
  const Embedding emb = embed(rates, opt.dim, rng, eopts);
  save_embedding(emb, ids, embedding_out);
  std::cout << "embedding: " << emb.node_count << " x " << emb.dimension << "\nwrote "
            << embedding_out << "\n";
  return emb;
}

EvalReport stage_evaluate(const Embedding& emb, const LabelTable& labels,
                          const Options& opt, const std::string& report_out) {
  EvalConfig config;
  config.train_ratios = opt.ratios;
  config.repetitions = opt.repetitions;
  config.regularization = opt.regularization;
  config.seed = opt.seed;
  config.threads = opt.threads;
  const EvalReport report = evaluate(emb, labels, config);
  save_report_csv(report, report_out);
  print_report(report, std::cout);
  std::cout << "wrote " << report_out << "\n";
  return report;
}

// ---- commands -------------------------------------------------------------

void cmd_sample(const Options& opt) {
  const Graph graph = load_edge_list(opt.graph_path, opt.directed);
  stage_sample(graph, opt, out_file(opt.out_dir, "cascades.txt"));
}

void cmd_infer(const Options& opt) {
  const CascadeSet set = load_cascades(opt.cascades_path, opt.nodes_override);
  stage_infer(set, opt, out_file(opt.out_dir, "rates.txt"));
}

void cmd_embed(const Options& opt) {
  const Graph graph = load_edge_list(opt.graph_path, opt.directed);
  RateMatrix rates = load_rates(opt.rates_path, graph.node_count());
  rates.node_count = graph.node_count();
  stage_embed(rates, graph.ids(), opt, out_file(opt.out_dir, "embedding.txt"));
}

void cmd_evaluate(const Options& opt) {
  const LoadedEmbedding loaded = load_embedding(opt.embedding_path);
  const LabelTable labels = load_labels(opt.labels_path, loaded.ids);
  stage_evaluate(loaded.embedding, labels, opt, out_file(opt.out_dir, "report.csv"));
}

void cmd_pipeline(const Options& opt) {
  const Graph graph = load_edge_list(opt.graph_path, opt.directed);
  const CascadeSet set = stage_sample(graph, opt, out_file(opt.out_dir, "cascades.txt"));
  const RateMatrix rates = stage_infer(set, opt, out_file(opt.out_dir, "rates.txt"));
  const Embedding emb =
      stage_embed(rates, graph.ids(), opt, out_file(opt.out_dir, "embedding.txt"));
  if (opt.labels_path.empty()) {
    std::cout << "no labels given; skipping evaluation\n";
    return;
  }
  const LabelTable labels = load_labels(opt.labels_path, graph.ids());
  stage_evaluate(emb, labels, opt, out_file(opt.out_dir, "report.csv"));
}

void cmd_sweep(const Options& base) {
  if (base.sweep_values.empty()) throw UsageError("sweep requires --values");
  const std::string summary_path = out_file(base.out_dir, "sweep_summary.csv");
  std::ofstream summary(summary_path);
  if (!summary) throw DataError("cannot write " + summary_path);
  summary << "param,value,ratio,metric,mean,std\n";

  for (const double value : base.sweep_values) {
    Options opt = base;
    char tag[64];
    if (base.sweep_param == "passes") {
      opt.passes = static_cast<std::uint32_t>(value);
      std::snprintf(tag, sizeof tag, "passes_%u", opt.passes);
    } else if (base.sweep_param == "horizon") {
      opt.horizon = value;
      std::snprintf(tag, sizeof tag, "horizon_%g", value);
    } else if (base.sweep_param == "steps") {
      opt.steps = static_cast<std::uint32_t>(value);
      std::snprintf(tag, sizeof tag, "steps_%u", opt.steps);
    } else if (base.sweep_param == "dim") {
      opt.dim = static_cast<int>(value);
      std::snprintf(tag, sizeof tag, "dim_%d", opt.dim);
    } else {
      throw UsageError("unknown sweep parameter `" + base.sweep_param +
                       "` (expected passes, horizon, steps or dim)");
    }
    opt.out_dir = (fs::path(base.out_dir) / tag).string();
    std::cout << "=== " << tag << " ===\n";

    const Graph graph = load_edge_list(opt.graph_path, opt.directed);
    const CascadeSet set =
        stage_sample(graph, opt, out_file(opt.out_dir, "cascades.txt"));
    const RateMatrix rates = stage_infer(set, opt, out_file(opt.out_dir, "rates.txt"));
    const Embedding emb =
        stage_embed(rates, graph.ids(), opt, out_file(opt.out_dir, "embedding.txt"));
    if (base.labels_path.empty()) continue;
    const LabelTable labels = load_labels(opt.labels_path, graph.ids());
    const EvalReport report =
        stage_evaluate(emb, labels, opt, out_file(opt.out_dir, "report.csv"));
    char buf[192];
    for (const RatioStats& row : report.rows) {
      std::snprintf(buf, sizeof buf, "%s,%g,%g,micro_f1,%.6f,%.6f\n",
                    base.sweep_param.c_str(), value, row.ratio, row.micro_mean,
                    row.micro_std);
      summary << buf;
      std::snprintf(buf, sizeof buf, "%s,%g,%g,macro_f1,%.6f,%.6f\n",
                    base.sweep_param.c_str(), value, row.ratio, row.macro_mean,
                    row.macro_std);
      summary << buf;
    }
  }
  std::cout << "wrote " << summary_path << "\n";
}

// ---- option wiring --------------------------------------------------------

void add_graph_opts(CLI::App* cmd, Options& opt, bool required) {
  auto* g = cmd->add_option("--graph", opt.graph_path, "edge list file");
  if (required) g->required();
  cmd->add_flag("--directed", opt.directed, "treat edges as directed");
}

void add_sampler_opts(CLI::App* cmd, Options& opt) {
  cmd->add_option("--steps", opt.steps, "diffusion steps per cascade");
  cmd->add_option("--horizon", opt.horizon, "observation window length")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--passes", opt.passes, "diffusions started per vertex");
  cmd->add_option("--time-model", opt.time_model, "delay distribution (exp|powerlaw)");
  cmd->add_option("--time-param", opt.time_param,
                  "rate (exp) or exponent (powerlaw); 0 = model default");
}

void add_solver_opts(CLI::App* cmd, Options& opt) {
  cmd->add_option("--max-iterations", opt.solver.max_iterations, "solver iteration cap");
  cmd->add_option("--step-size", opt.solver.step_size, "initial gradient step");
  cmd->add_option("--tolerance", opt.solver.tolerance,
                  "relative objective decrease stopping threshold");
  cmd->add_option("--initial-rate", opt.solver.initial_rate, "starting rate value");
  cmd->add_option("--prune-threshold", opt.solver.prune_threshold,
                  "rates below this become exact zeros");
}

void add_eval_opts(CLI::App* cmd, Options& opt) {
  cmd->add_option("--ratios", opt.ratios, "train ratios")->delimiter(',');
  cmd->add_option("--repetitions", opt.repetitions, "splits per ratio");
  cmd->add_option("--regularization", opt.regularization, "L2 strength");
}

void add_embed_opts(CLI::App* cmd, Options& opt) {
  cmd->add_option("--dim", opt.dim, "embedding dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--normalize", opt.normalize, "rate normalization (row|sym|none)");
  cmd->add_flag("--symmetrize", opt.symmetrize, "use (A + A^T)/2 before normalizing");
}

void add_common_opts(CLI::App* cmd, Options& opt) {
  cmd->add_option("--seed", opt.seed, "master random seed");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--config", opt.config_path,
                  "key=value config file (flags take precedence)");
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"diffusion-based network embedding toolkit"};
  app.require_subcommand(1);
  // Later occurrences win, so config-injected values yield to explicit flags
  // (subcommands inherit this default).
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Options opt;

  auto* sample = app.add_subcommand("sample", "simulate diffusion cascades");
  add_graph_opts(sample, opt, true);
  add_sampler_opts(sample, opt);
  add_common_opts(sample, opt);
  sample->callback([&] { cmd_sample(opt); });

  auto* infer = app.add_subcommand("infer", "recover transmission rates from cascades");
  infer->add_option("--cascades", opt.cascades_path, "cascade file")->required();
  infer->add_option("--nodes", opt.nodes_override,
                    "node count override (default: max index + 1)");
  infer->add_option("--eval-support", opt.eval_support_path,
                    "reference `i j` edge file; prints support precision/recall");
  add_solver_opts(infer, opt);
  add_common_opts(infer, opt);
  infer->callback([&] { cmd_infer(opt); });

  auto* embed_cmd = app.add_subcommand("embed", "factorize rates into an embedding");
  embed_cmd->add_option("--rates", opt.rates_path, "rate matrix file")->required();
  add_graph_opts(embed_cmd, opt, true);
  add_embed_opts(embed_cmd, opt);
  add_common_opts(embed_cmd, opt);
  embed_cmd->callback([&] { cmd_embed(opt); });

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "node classification on an embedding");
  evaluate_cmd->add_option("--embedding", opt.embedding_path, "embedding file")
      ->required();
  evaluate_cmd->add_option("--labels", opt.labels_path, "label file")->required();
  add_eval_opts(evaluate_cmd, opt);
  add_common_opts(evaluate_cmd, opt);
  evaluate_cmd->callback([&] { cmd_evaluate(opt); });

  auto* pipeline = app.add_subcommand("pipeline", "sample, infer, embed, evaluate");
  add_graph_opts(pipeline, opt, true);
  pipeline->add_option("--labels", opt.labels_path, "label file (optional)");
  add_sampler_opts(pipeline, opt);
  add_solver_opts(pipeline, opt);
  add_embed_opts(pipeline, opt);
  add_eval_opts(pipeline, opt);
  add_common_opts(pipeline, opt);
  pipeline->callback([&] { cmd_pipeline(opt); });

  auto* sweep = app.add_subcommand("sweep", "pipeline over a parameter grid");
  add_graph_opts(sweep, opt, true);
  sweep->add_option("--labels", opt.labels_path, "label file (optional)");
  sweep->add_option("--param", opt.sweep_param, "passes|horizon|steps|dim")->required();
  sweep->add_option("--values", opt.sweep_values, "comma-separated grid")
      ->required()
      ->delimiter(',');
  add_sampler_opts(sweep, opt);
  add_solver_opts(sweep, opt);
  add_embed_opts(sweep, opt);
  add_eval_opts(sweep, opt);
  add_common_opts(sweep, opt);
  sweep->callback([&] { cmd_sweep(opt); });

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 vector parse wants reversed args
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace dbne::cli
