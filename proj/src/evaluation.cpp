#include "dbne/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <ostream>

#include "dbne/errors.hpp"
#include "dbne/parallel.hpp"

namespace dbne {

Split stratified_split(const LabelTable& labels, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw UsageError("train ratio must lie strictly between 0 and 1");
  }
  // Class member lists in ascending node order (canonical order; splits are
  // equivariant under permutations that preserve within-class order).
  std::vector<std::vector<NodeId>> members(labels.class_count);
  for (NodeId v = 0; v < labels.labels.size(); ++v) {
    const std::int32_t c = labels.labels[v];
    if (c >= 0) members[c].push_back(v);
  }

  Split split;
  for (std::int32_t c = 0; c < labels.class_count; ++c) {
    auto& list = members[c];
    const std::size_t count = list.size();
    if (count == 0) continue;
    std::size_t n_train = static_cast<std::size_t>(std::ceil(ratio * count));
    if (count < 2) {
      std::cerr << "split: class " << c << " has a single labeled node; kept in train\n";
      n_train = count;
    } else if (n_train >= count) {
      n_train = count - 1;  // keep at least one test node per class
    }
    // Partial Fisher-Yates: the first n_train slots become the train picks.
    for (std::size_t i = 0; i < n_train; ++i) {
      const std::size_t j = i + rng.next_below(count - i);
      std::swap(list[i], list[j]);
    }
    split.train.insert(split.train.end(), list.begin(), list.begin() + n_train);
    split.test.insert(split.test.end(), list.begin() + n_train, list.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

// Mean logistic loss plus (reg/2)|w|^2; bias unpenalized. Returns the
// objective and fills the gradient.
double logreg_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        double reg, const Eigen::VectorXd& w, double b,
                        Eigen::VectorXd* grad_w, double* grad_b) {
  const Eigen::ArrayXd margins = -(y.array() * ((x * w).array() + b));
  // log(1 + e^m), stable for both signs of m.
  const Eigen::ArrayXd losses =
      (margins > 0.0).select(margins + (1.0 + (-margins).exp()).log(),
                             (1.0 + margins.exp()).log());
  const double n = static_cast<double>(x.rows());
  const double value = losses.sum() / n + 0.5 * reg * w.squaredNorm();
  if (grad_w != nullptr) {
    // d/dm log(1+e^m) = sigmoid(m)
    const Eigen::ArrayXd sig =
        (margins > 0.0).select(1.0 / (1.0 + (-margins).exp()),
                               margins.exp() / (1.0 + margins.exp()));
    const Eigen::VectorXd coeff = (-(y.array()) * sig).matrix() / n;
    *grad_w = x.transpose() * coeff + reg * w;
    *grad_b = coeff.sum();
  }
  return value;
}

struct BinaryModel {
  Eigen::VectorXd w;
  double b = 0.0;
};

// Gradient descent with backtracking, separate step scales for the weight
// block and the (unpenalized) bias so strong regularization cannot starve
// the bias of progress.
BinaryModel train_binary(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double reg) {
  constexpr std::uint32_t kMaxIter = 2000;
  constexpr double kTolerance = 1e-6;

  BinaryModel m;
  m.w = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd grad_w(x.cols());
  double grad_b = 0.0;
  double f_cur = logreg_objective(x, y, reg, m.w, m.b, &grad_w, &grad_b);
  double step_w = 1.0;
  double step_b = 1.0;
  for (std::uint32_t iter = 0; iter < kMaxIter; ++iter) {
    double decrease = 0.0;

    Eigen::VectorXd w_trial;
    for (int halvings = 0; halvings < 60; ++halvings) {
      w_trial = m.w - step_w * grad_w;
      const double f_trial = logreg_objective(x, y, reg, w_trial, m.b, nullptr, nullptr);
      if (f_trial <= f_cur) {
        m.w = std::move(w_trial);
        decrease += f_cur - f_trial;
        f_cur = f_trial;
        step_w *= 2.0;
        break;
      }
      step_w *= 0.5;
    }

    logreg_objective(x, y, reg, m.w, m.b, &grad_w, &grad_b);
    for (int halvings = 0; halvings < 60; ++halvings) {
      const double b_trial = m.b - step_b * grad_b;
      const double f_trial = logreg_objective(x, y, reg, m.w, b_trial, nullptr, nullptr);
      if (f_trial <= f_cur) {
        m.b = b_trial;
        decrease += f_cur - f_trial;
        f_cur = f_trial;
        step_b *= 2.0;
        break;
      }
      step_b *= 0.5;
    }

    if (decrease <= kTolerance * std::max(1.0, std::fabs(f_cur))) break;
    logreg_objective(x, y, reg, m.w, m.b, &grad_w, &grad_b);
  }
  return m;
}

}  // namespace

OvrClassifier train_ovr_logreg(const Embedding& embedding, std::span<const NodeId> train,
                               const LabelTable& labels, double regularization,
                               Rng& rng) {
  (void)rng;  // zero initialization keeps training deterministic
  if (train.empty()) throw DataError("empty training set");

  Eigen::MatrixXd x(train.size(), embedding.dimension);
  std::vector<std::int32_t> y_class(train.size());
  std::vector<char> present(labels.class_count, 0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    const NodeId v = train[r];
    if (v >= embedding.node_count) throw DataError("train index out of range");
    const std::int32_t c = labels.labels[v];
    if (c < 0) throw DataError("unlabeled node in training set");
    x.row(r) = embedding.vectors.row(v);
    y_class[r] = c;
    present[c] = 1;
  }
  if (std::count(present.begin(), present.end(), char(1)) < 2) {
    throw DataError("training set must contain at least two classes");
  }

  OvrClassifier model;
  model.weights.resize(labels.class_count, embedding.dimension);
  model.bias.resize(labels.class_count);
  for (std::int32_t c = 0; c < labels.class_count; ++c) {
    Eigen::VectorXd y(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      y(r) = y_class[r] == c ? 1.0 : -1.0;
    }
    const BinaryModel m = train_binary(x, y, regularization);
    model.weights.row(c) = m.w.transpose();
    model.bias(c) = m.b;
  }
  return model;
}

std::vector<std::int32_t> predict(const OvrClassifier& model, const Embedding& embedding,
                                  std::span<const NodeId> nodes) {
  if (model.weights.cols() != embedding.dimension) {
    throw DataError("classifier dimension does not match embedding");
  }
  std::vector<std::int32_t> out(nodes.size());
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const NodeId v = nodes[r];
    if (v >= embedding.node_count) throw DataError("predict index out of range");
    const Eigen::VectorXd scores =
        model.weights * embedding.vectors.row(v).transpose() + model.bias;
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.size(); ++c) {
      if (scores(c) > scores(best)) best = c;  // strict: ties keep lower id
    }
    out[r] = static_cast<std::int32_t>(best);
  }
  return out;
}

F1Pair f1_scores(std::span<const std::int32_t> predicted,
                 std::span<const std::int32_t> truth, std::int32_t class_count) {
  if (predicted.empty() || predicted.size() != truth.size()) {
    throw DataError("f1_scores: label vectors must be non-empty and equal-length");
  }
  std::vector<std::int64_t> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::int32_t p = predicted[i];
    const std::int32_t t = truth[i];
    if (p < 0 || p >= class_count || t < 0 || t >= class_count) {
      throw DataError("f1_scores: class id out of range");
    }
    if (p == t) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro_sum = 0.0;
  for (std::int32_t c = 0; c < class_count; ++c) {
    tp_sum += tp[c];
    fp_sum += fp[c];
    fn_sum += fn[c];
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    macro_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  F1Pair out;
  const double micro_denom = static_cast<double>(2 * tp_sum + fp_sum + fn_sum);
  out.micro = micro_denom > 0.0 ? 2.0 * static_cast<double>(tp_sum) / micro_denom : 0.0;
  out.macro = class_count > 0 ? macro_sum / class_count : 0.0;
  return out;
}

EvalReport evaluate(const Embedding& embedding, const LabelTable& labels,
                    const EvalConfig& config) {
  if (config.repetitions < 1) throw UsageError("repetitions must be >= 1");
  if (embedding.node_count != labels.labels.size()) {
    throw DataError("embedding and label table disagree on node count");
  }
  for (const double r : config.train_ratios) {
    if (!(r > 0.0 && r < 1.0)) throw UsageError("ratios must lie in (0, 1)");
  }

  const std::size_t total = config.train_ratios.size() * config.repetitions;
  std::vector<F1Pair> scores(total);
  parallel_for(total, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t ri = task / config.repetitions;
      const std::size_t rep = task % config.repetitions;
      Rng split_rng(derive_seed(config.seed, {stage::kEvalSplit, ri, rep}));
      const Split split = stratified_split(labels, config.train_ratios[ri], split_rng);
      Rng train_rng(derive_seed(config.seed, {stage::kEvalTrain, ri, rep}));
      const OvrClassifier model = train_ovr_logreg(
          embedding, split.train, labels, config.regularization, train_rng);
      const auto predicted = predict(model, embedding, split.test);
      std::vector<std::int32_t> truth(split.test.size());
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        truth[i] = labels.labels[split.test[i]];
      }
      scores[task] = f1_scores(predicted, truth, labels.class_count);
    }
  });

  EvalReport report;
  for (std::size_t ri = 0; ri < config.train_ratios.size(); ++ri) {
    RatioStats row;
    row.ratio = config.train_ratios[ri];
    const std::size_t base = ri * config.repetitions;
    double micro_sum = 0.0, macro_sum = 0.0;
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      micro_sum += scores[base + rep].micro;
      macro_sum += scores[base + rep].macro;
    }
    const double n = static_cast<double>(config.repetitions);
    row.micro_mean = micro_sum / n;
    row.macro_mean = macro_sum / n;
    if (config.repetitions > 1) {
      double micro_var = 0.0, macro_var = 0.0;
      for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        micro_var += std::pow(scores[base + rep].micro - row.micro_mean, 2);
        macro_var += std::pow(scores[base + rep].macro - row.macro_mean, 2);
      }
      row.micro_std = std::sqrt(micro_var / (n - 1.0));
      row.macro_std = std::sqrt(macro_var / (n - 1.0));
    }
    report.rows.push_back(row);
  }
  return report;
}

void save_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << "ratio,metric,mean,std\n";
  char buf[128];
  for (const RatioStats& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%g,micro_f1,%.6f,%.6f\n", row.ratio,
                  row.micro_mean, row.micro_std);
    out << buf;
    std::snprintf(buf, sizeof buf, "%g,macro_f1,%.6f,%.6f\n", row.ratio,
                  row.macro_mean, row.macro_std);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path);
}

void print_report(const EvalReport& report, std::ostream& out) {
  char buf[160];
  out << "ratio   micro-f1 (std)      macro-f1 (std)\n";
  for (const RatioStats& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%-7g %.4f (%.4f)     %.4f (%.4f)\n", row.ratio,
                  row.micro_mean, row.micro_std, row.macro_mean, row.macro_std);
    out << buf;
  }
}

}  // namespace dbne
