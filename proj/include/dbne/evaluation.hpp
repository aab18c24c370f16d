#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dbne/embedding.hpp"
#include "dbne/graph.hpp"
#include "dbne/rng.hpp"

namespace dbne {

struct EvalConfig {
  std::vector<double> train_ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint32_t repetitions = 10;
  double regularization = 1e-4;  // L2 strength on weights (bias unpenalized)
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> test;
};

// Stratified split: per class, ceil(ratio * count) nodes go to train; when a
// class would be consumed whole and has >= 2 members, one node is held back
// for test. Classes with a single member are kept whole in train (reported
// to stderr). Class members are visited in ascending node order.
Split stratified_split(const LabelTable& labels, double ratio, Rng& rng);

// One-vs-rest L2-regularized logistic regression, trained by gradient
// descent with backtracking line search from zero initialization.
struct OvrClassifier {
  Eigen::MatrixXd weights;  // class_count x d
  Eigen::VectorXd bias;     // class_count
};

OvrClassifier train_ovr_logreg(const Embedding& embedding, std::span<const NodeId> train,
                               const LabelTable& labels, double regularization,
                               Rng& rng);

// Argmax of per-class scores; ties break toward the lower class id.
std::vector<std::int32_t> predict(const OvrClassifier& model, const Embedding& embedding,
                                  std::span<const NodeId> nodes);

struct F1Pair {
  double micro = 0.0;
  double macro = 0.0;
};

// Micro-F1 pools counts over all instances (equals accuracy for single-label
// predictions); Macro-F1 averages per-class F1 over all class_count classes,
// counting classes with zero support as 0.
F1Pair f1_scores(std::span<const std::int32_t> predicted,
                 std::span<const std::int32_t> truth, std::int32_t class_count);

struct RatioStats {
  double ratio = 0.0;
  double micro_mean = 0.0, micro_std = 0.0;
  double macro_mean = 0.0, macro_std = 0.0;
};

struct EvalReport {
  std::vector<RatioStats> rows;
};

EvalReport evaluate(const Embedding& embedding, const LabelTable& labels,
                    const EvalConfig& config);

// CSV rows: `ratio,metric,mean,std` with metric in {micro_f1, macro_f1}.
void save_report_csv(const EvalReport& report, const std::string& path);
void print_report(const EvalReport& report, std::ostream& out);

}  // namespace dbne
