#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "dbne/graph.hpp"
#include "dbne/inference.hpp"
#include "dbne/rng.hpp"

namespace dbne {

enum class NormalizeMode {
  kRow,        // divide each nonzero row by its row sum (default)
  kSymmetric,  // D^{-1/2} A D^{-1/2} with D = row sums
  kNone,
};

// Normalized copy of the rate matrix; all-zero rows stay zero.
std::vector<Triplet> normalize_rates(const RateMatrix& rates,
                                     NormalizeMode mode = NormalizeMode::kRow);

struct SvdResult {
  Eigen::MatrixXd u;      // N x d, orthonormal columns
  Eigen::VectorXd sigma;  // d singular values, non-increasing
  Eigen::MatrixXd v;      // N x d, orthonormal columns
};

// Top-d singular triplets of a sparse N x N matrix via randomized subspace
// iteration, iterated until the leading singular values stabilize. Sign
// convention: the first nonzero entry of each left singular vector is
// nonnegative. Trailing values below the numerical rank are clamped to 0.
SvdResult truncated_svd(NodeId n, std::span<const Triplet> matrix, int d, Rng& rng);

struct Embedding {
  NodeId node_count = 0;
  int dimension = 0;
  Eigen::MatrixXd vectors;  // N x d; row per node
};

struct EmbedOptions {
  NormalizeMode normalize = NormalizeMode::kRow;
  bool symmetrize = false;  // replace A by (A + A^T)/2 before normalizing
};

// Y = U_d diag(sqrt(sigma)): normalize, factorize, scale.
Embedding embed(const RateMatrix& rates, int d, Rng& rng, const EmbedOptions& opts = {});

// Embedding file: header `N d`, then one `node_label v_1 ... v_d` line per
// node in dense-index order, values at 9 significant digits.
void save_embedding(const Embedding& emb, const IdMap& ids, const std::string& path);

struct LoadedEmbedding {
  Embedding embedding;
  IdMap ids;  // row order of the file
};
LoadedEmbedding load_embedding(const std::string& path);

}  // namespace dbne
