#include "dbne/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dbne/errors.hpp"

namespace dbne {

std::vector<Triplet> normalize_rates(const RateMatrix& rates, NormalizeMode mode) {
  std::vector<Triplet> out(rates.entries.begin(), rates.entries.end());
  if (mode == NormalizeMode::kNone) return out;

  std::vector<double> row_sum(rates.node_count, 0.0);
  for (const Triplet& e : out) row_sum[e.src] += e.value;

  if (mode == NormalizeMode::kRow) {
    for (Triplet& e : out) {
      if (row_sum[e.src] > 0.0) e.value /= row_sum[e.src];
    }
  } else {  // symmetric
    std::vector<double> inv_sqrt(rates.node_count, 0.0);
    for (NodeId v = 0; v < rates.node_count; ++v) {
      if (row_sum[v] > 0.0) inv_sqrt[v] = 1.0 / std::sqrt(row_sum[v]);
    }
    for (Triplet& e : out) {
      e.value *= inv_sqrt[e.src] * (inv_sqrt[e.dst] > 0.0 ? inv_sqrt[e.dst] : 1.0);
    }
  }
  return out;
}

namespace {

// Sparse CSR wrapper for y = A x and y = A^T x products.
struct SparseOps {
  NodeId n;
  std::vector<std::size_t> offsets;
  std::vector<NodeId> cols;
  std::vector<double> values;

  SparseOps(NodeId n, std::span<const Triplet> entries) : n(n) {
    offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const Triplet& e : entries) {
      if (e.src >= n || e.dst >= n) throw DataError("matrix entry out of range");
      if (!std::isfinite(e.value)) throw NumericalError("non-finite matrix entry");
      ++offsets[e.src + 1];
    }
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    cols.resize(entries.size());
    values.resize(entries.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const Triplet& e : entries) {
      cols[cursor[e.src]] = e.dst;
      values[cursor[e.src]] = e.value;
      ++cursor[e.src];
    }
  }

  // Y = A * X
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, x.cols());
    for (NodeId r = 0; r < n; ++r) {
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        y.row(r) += values[k] * x.row(cols[k]);
      }
    }
    return y;
  }

  // Y = A^T * X
  Eigen::MatrixXd apply_transposed(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, x.cols());
    for (NodeId r = 0; r < n; ++r) {
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        y.row(cols[k]) += values[k] * x.row(r);
      }
    }
    return y;
  }
};

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

SvdResult truncated_svd(NodeId n, std::span<const Triplet> matrix, int d, Rng& rng) {
  if (d < 1 || static_cast<NodeId>(d) > n) {
    throw UsageError("svd rank must satisfy 1 <= d <= N");
  }
  const SparseOps ops(n, matrix);

  const int sketch = static_cast<int>(
      std::min<std::size_t>(n, static_cast<std::size_t>(d) + std::max(10, d / 4)));
  Eigen::MatrixXd omega(n, sketch);
  for (int c = 0; c < sketch; ++c) {
    for (NodeId r = 0; r < n; ++r) omega(r, c) = rng.next_gaussian();
  }

  Eigen::MatrixXd q = thin_q(ops.apply(omega));

  // Power iterations until the leading singular value estimates stabilize.
  const int max_rounds = n <= 512 ? 400 : 60;
  const double stable_tol = 1e-10;
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(d);
  int stable_streak = 0;
  for (int round = 0; round < max_rounds; ++round) {
    const Eigen::MatrixXd z = ops.apply_transposed(q);
    // Ritz estimates from the Gram matrix of A^T Q.
    const Eigen::MatrixXd gram = z.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);  // ascending order
    Eigen::VectorXd est(d);
    for (int k = 0; k < d; ++k) {
      const double lambda = std::max(0.0, eig.eigenvalues()(sketch - 1 - k));
      est(k) = std::sqrt(lambda);
    }
    double max_rel = 0.0;
    for (int k = 0; k < d; ++k) {
      const double denom = std::max(est(k), 1e-300);
      max_rel = std::max(max_rel, std::abs(est(k) - prev(k)) / denom);
    }
    prev = est;
    q = thin_q(ops.apply(thin_q(z)));
    if (round >= 1 && max_rel < stable_tol) {
      if (++stable_streak >= 2) break;
    } else {
      stable_streak = 0;
    }
  }

  // Final factorization through the converged subspace: A ~ Q (Q^T A).
  const Eigen::MatrixXd b = ops.apply_transposed(q).transpose();  // sketch x N
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdResult result;
  result.u.resize(n, d);
  result.v.resize(n, d);
  result.sigma.resize(d);
  const Eigen::MatrixXd full_u = q * svd.matrixU();
  for (int k = 0; k < d; ++k) {
    result.sigma(k) = svd.singularValues()(k);
    result.u.col(k) = full_u.col(k);
    result.v.col(k) = svd.matrixV().col(k);
  }

  // Clamp values below the numerical rank so rank-deficient inputs produce
  // exactly-zero trailing factors.
  const double rank_floor =
      result.sigma.size() > 0
          ? result.sigma(0) * static_cast<double>(n) *
                std::numeric_limits<double>::epsilon()
          : 0.0;
  for (int k = 0; k < d; ++k) {
    if (result.sigma(k) <= rank_floor) result.sigma(k) = 0.0;
  }

  // Deterministic sign: first nonzero entry of each left vector nonnegative.
  for (int k = 0; k < d; ++k) {
    for (NodeId r = 0; r < n; ++r) {
      const double x = result.u(r, k);
      if (x != 0.0) {
        if (x < 0.0) {
          result.u.col(k) = -result.u.col(k);
          result.v.col(k) = -result.v.col(k);
        }
        break;
      }
    }
  }
  return result;
}

Embedding embed(const RateMatrix& rates, int d, Rng& rng, const EmbedOptions& opts) {
  RateMatrix input = rates;
  if (opts.symmetrize) {
    std::vector<Triplet> sym;
    sym.reserve(rates.entries.size() * 2);
    for (const Triplet& e : rates.entries) {
      sym.push_back(Triplet{e.src, e.dst, 0.5 * e.value});
      sym.push_back(Triplet{e.dst, e.src, 0.5 * e.value});
    }
    std::sort(sym.begin(), sym.end(), [](const Triplet& a, const Triplet& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    std::vector<Triplet> merged;
    for (const Triplet& e : sym) {
      if (!merged.empty() && merged.back().src == e.src && merged.back().dst == e.dst) {
        merged.back().value += e.value;
      } else {
        merged.push_back(e);
      }
    }
    input.entries = std::move(merged);
  }

  const std::vector<Triplet> normalized = normalize_rates(input, opts.normalize);
  const SvdResult svd = truncated_svd(rates.node_count, normalized, d, rng);

  Embedding emb;
  emb.node_count = rates.node_count;
  emb.dimension = d;
  emb.vectors.resize(rates.node_count, d);
  for (int k = 0; k < d; ++k) {
    emb.vectors.col(k) = svd.u.col(k) * std::sqrt(svd.sigma(k));
  }
  return emb;
}

void save_embedding(const Embedding& emb, const IdMap& ids, const std::string& path) {
  if (ids.size() != emb.node_count) {
    throw DataError("id map size does not match embedding rows");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out << emb.node_count << ' ' << emb.dimension << '\n';
  char buf[40];
  for (NodeId v = 0; v < emb.node_count; ++v) {
    out << ids.label(v);
    for (int k = 0; k < emb.dimension; ++k) {
      std::snprintf(buf, sizeof buf, "%.9g", emb.vectors(v, k));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

LoadedEmbedding load_embedding(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header");
  std::istringstream header(line);
  std::size_t n = 0;
  int d = 0;
  if (!(header >> n >> d) || d < 1) throw DataError(path + ": bad header");

  LoadedEmbedding out;
  out.embedding.node_count = static_cast<NodeId>(n);
  out.embedding.dimension = d;
  out.embedding.vectors.resize(n, d);
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (row >= n) throw DataError(path + ": more rows than header declares");
    std::istringstream ss(line);
    std::string label;
    if (!(ss >> label)) throw DataError(path + ":" + std::to_string(line_no) + ": bad row");
    const NodeId id = out.ids.intern(label);
    if (id != row) throw DataError(path + ": duplicate node label `" + label + "`");
    for (int k = 0; k < d; ++k) {
      double x = 0.0;
      if (!(ss >> x)) {
        throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(d) + " values");
      }
      out.embedding.vectors(row, k) = x;
    }
    double extra;
    if (ss >> extra) {
      throw DataError(path + ":" + std::to_string(line_no) + ": too many values");
    }
    ++row;
  }
  if (row != n) throw DataError(path + ": fewer rows than header declares");
  return out;
}

}  // namespace dbne
