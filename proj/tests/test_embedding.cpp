#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dbne/embedding.hpp"
#include "dbne/errors.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dbne;
using oracles::make_rates;
using test_util::TempDir;
using test_util::read_file;

namespace {

Eigen::MatrixXd dense_of(NodeId n, std::span<const Triplet> entries) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const Triplet& e : entries) m(e.src, e.dst) += e.value;
  return m;
}

std::vector<Triplet> triplets_of(const Eigen::MatrixXd& m) {
  std::vector<Triplet> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) {
        out.push_back(Triplet{static_cast<NodeId>(r), static_cast<NodeId>(c), m(r, c)});
      }
    }
  }
  return out;
}

Eigen::MatrixXd random_dense(NodeId n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, n);
  for (NodeId r = 0; r < n; ++r) {
    for (NodeId c = 0; c < n; ++c) m(r, c) = rng.next_gaussian();
  }
  return m;
}

double best_rank_error(const Eigen::MatrixXd& m, int d) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  double tail = 0.0;
  for (Eigen::Index k = d; k < svd.singularValues().size(); ++k) {
    tail += svd.singularValues()(k) * svd.singularValues()(k);
  }
  return std::sqrt(tail);
}

}  // namespace

TEST_CASE("row normalization") {
  const RateMatrix m = make_rates(3, {{0, 1, 2.0}, {0, 2, 2.0}, {2, 0, 1.0}, {2, 1, 3.0}});
  const auto norm = normalize_rates(m);
  const Eigen::MatrixXd d = dense_of(3, norm);
  CHECK(d(0, 1) == doctest::Approx(0.5));
  CHECK(d(0, 2) == doctest::Approx(0.5));
  CHECK(d(2, 0) == doctest::Approx(0.25));
  CHECK(d(2, 1) == doctest::Approx(0.75));
  CHECK(d.row(1).norm() == 0.0);  // zero rows stay zero
}

TEST_CASE("normalization modes") {
  const RateMatrix m = make_rates(2, {{0, 1, 4.0}, {1, 0, 1.0}});
  const Eigen::MatrixXd none = dense_of(2, normalize_rates(m, NormalizeMode::kNone));
  CHECK(none(0, 1) == 4.0);
  const Eigen::MatrixXd sym = dense_of(2, normalize_rates(m, NormalizeMode::kSymmetric));
  CHECK(sym(0, 1) == doctest::Approx(4.0 / (2.0 * 1.0)));
  CHECK(sym(1, 0) == doctest::Approx(1.0 / (1.0 * 2.0)));
}

TEST_CASE("identity matrix has unit spectrum") {
  const int n = 24;
  std::vector<Triplet> entries;  // identity is not a RateMatrix (diagonal), so
  for (int i = 0; i < n; ++i) {  // feed the factorization directly
    entries.push_back(Triplet{static_cast<NodeId>(i), static_cast<NodeId>(i), 1.0});
  }
  Rng rng(1);
  const SvdResult svd = truncated_svd(n, entries, n, rng);
  for (int k = 0; k < n; ++k) CHECK(svd.sigma(k) == doctest::Approx(1.0).epsilon(1e-9));
  const Eigen::MatrixXd recon =
      svd.u * svd.sigma.asDiagonal() * svd.v.transpose();
  CHECK((recon - Eigen::MatrixXd::Identity(n, n)).norm() ==
        doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("rank-1 matrix recovered exactly") {
  const int n = 12;
  Eigen::VectorXd u(n), v(n);
  Rng rng(5);
  for (int i = 0; i < n; ++i) {
    u(i) = rng.next_gaussian();
    v(i) = rng.next_gaussian();
  }
  u.normalize();
  v.normalize();
  const double a = 3.5;
  const Eigen::MatrixXd m = a * u * v.transpose();
  Rng svd_rng(2);
  const auto entries = triplets_of(m);
  const SvdResult svd = truncated_svd(n, entries, 1, svd_rng);
  CHECK(svd.sigma(0) == doctest::Approx(a).epsilon(1e-9));
  const Eigen::MatrixXd recon = svd.u * svd.sigma.asDiagonal() * svd.v.transpose();
  CHECK((m - recon).norm() == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("random matrices match the full-decomposition oracle") {
  for (const std::uint64_t seed : {11ull, 12ull}) {
    const NodeId n = 60;
    const int d = 8;
    const Eigen::MatrixXd m = random_dense(n, seed);
    const auto entries = triplets_of(m);
    Rng rng(seed + 100);
    const SvdResult mine = truncated_svd(n, entries, d, rng);

    Eigen::BDCSVD<Eigen::MatrixXd> oracle(m);
    for (int k = 0; k < d; ++k) {
      CHECK(mine.sigma(k) ==
            doctest::Approx(oracle.singularValues()(k)).epsilon(1e-6));
    }
    const Eigen::MatrixXd recon =
        mine.u * mine.sigma.asDiagonal() * mine.v.transpose();
    const double err = (m - recon).norm();
    CHECK(err == doctest::Approx(best_rank_error(m, d)).epsilon(1e-6));
  }
}

TEST_CASE("orthonormal factors and descending values") {
  const NodeId n = 40;
  const Eigen::MatrixXd m = random_dense(n, 77);
  Rng rng(3);
  const SvdResult svd = truncated_svd(n, triplets_of(m), 10, rng);
  const Eigen::MatrixXd utu = svd.u.transpose() * svd.u;
  const Eigen::MatrixXd vtv = svd.v.transpose() * svd.v;
  CHECK((utu - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-8);
  CHECK((vtv - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-8);
  for (int k = 1; k < 10; ++k) CHECK(svd.sigma(k) <= svd.sigma(k - 1) + 1e-12);
  for (int k = 0; k < 10; ++k) {
    for (NodeId r = 0; r < n; ++r) {
      if (svd.u(r, k) != 0.0) {
        CHECK(svd.u(r, k) > 0.0);  // sign convention
        break;
      }
    }
  }
}

TEST_CASE("reconstruction error shrinks as rank grows") {
  const NodeId n = 50;
  const Eigen::MatrixXd m = random_dense(n, 31);
  const auto entries = triplets_of(m);
  double previous = 1e300;
  for (const int d : {2, 6, 12, 24}) {
    Rng rng(9);
    const SvdResult svd = truncated_svd(n, entries, d, rng);
    const double err = (m - svd.u * svd.sigma.asDiagonal() * svd.v.transpose()).norm();
    CHECK(err <= previous + 1e-9);
    previous = err;
  }
}

TEST_CASE("determinism and rank bounds") {
  const NodeId n = 30;
  const Eigen::MatrixXd m = random_dense(n, 41);
  const auto entries = triplets_of(m);
  Rng rng_a(5);
  Rng rng_b(5);
  const SvdResult a = truncated_svd(n, entries, 6, rng_a);
  const SvdResult b = truncated_svd(n, entries, 6, rng_b);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(a.sigma == b.sigma);

  Rng rng_c(6);
  CHECK_THROWS_AS(truncated_svd(n, entries, 0, rng_c), UsageError);
  CHECK_THROWS_AS(truncated_svd(n, entries, 31, rng_c), UsageError);
}

TEST_CASE("zero matrix gives zero embedding at any rank") {
  RateMatrix zero;
  zero.node_count = 9;
  for (const int d : {1, 4, 9}) {
    Rng rng(13);
    const Embedding emb = embed(zero, d, rng);
    CHECK(emb.vectors.norm() == 0.0);
    CHECK(emb.dimension == d);
    CHECK(emb.vectors.cols() == d);
  }
}

TEST_CASE("rank-deficient input zero-pads trailing columns") {
  // Rank-2 rate matrix: two disjoint edges.
  const RateMatrix m = make_rates(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  Rng rng(21);
  const Embedding emb = embed(m, 4, rng, {NormalizeMode::kNone, false});
  CHECK(emb.vectors.col(2).norm() == 0.0);
  CHECK(emb.vectors.col(3).norm() == 0.0);
  CHECK(emb.vectors.col(0).norm() > 0.0);
}

TEST_CASE("embedding reconstructs the normalized matrix at full rank") {
  // Y W with W = sqrt(sigma) V^T reconstructs A_d; at d = N the error is the
  // best-rank-N error, i.e. zero.
  Rng graph_rng(99);
  const Graph g = oracles::random_regular_digraph(16, 3, graph_rng);
  std::vector<Triplet> entries;
  Rng weight_rng(100);
  for (NodeId v = 0; v < 16; ++v) {
    for (NodeId u : g.out_neighbors(v)) {
      entries.push_back(Triplet{v, u, 0.5 + weight_rng.next_unit()});
    }
  }
  const RateMatrix rates = make_rates(16, std::move(entries));
  const auto norm = normalize_rates(rates);
  const Eigen::MatrixXd a = dense_of(16, norm);

  Rng rng(7);
  const SvdResult svd = truncated_svd(16, norm, 16, rng);
  Eigen::MatrixXd y(16, 16), w(16, 16);
  for (int k = 0; k < 16; ++k) {
    const double root = std::sqrt(svd.sigma(k));
    y.col(k) = svd.u.col(k) * root;
    w.row(k) = svd.v.col(k).transpose() * root;
  }
  CHECK((a - y * w).norm() == doctest::Approx(0.0).epsilon(1e-8));

  Rng rng2(7);
  const Embedding emb = embed(rates, 16, rng2);
  CHECK((emb.vectors - y).norm() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("symmetrize option averages the matrix with its transpose") {
  const RateMatrix m = make_rates(2, {{0, 1, 2.0}});
  Rng rng(3);
  const Embedding plain = embed(m, 2, rng, {NormalizeMode::kNone, false});
  Rng rng2(3);
  const Embedding sym = embed(m, 2, rng2, {NormalizeMode::kNone, true});
  // (A + A^T)/2 has entries 1.0 on both off-diagonals: symmetric spectrum.
  CHECK(plain.vectors.col(0).norm() != doctest::Approx(sym.vectors.col(0).norm()));
}

TEST_CASE("embedding files round-trip at stated precision") {
  IdMap ids;
  ids.intern("alpha");
  ids.intern("beta");
  ids.intern("gamma");
  Embedding emb;
  emb.node_count = 3;
  emb.dimension = 2;
  emb.vectors.resize(3, 2);
  emb.vectors << 0.123456789, -1.5, 3.25e-7, 42.0, 0.0, -0.5;

  TempDir dir;
  save_embedding(emb, ids, dir.file("e.txt"));
  const LoadedEmbedding back = load_embedding(dir.file("e.txt"));
  CHECK(back.embedding.node_count == 3);
  CHECK(back.embedding.dimension == 2);
  CHECK(back.ids.label(0) == "alpha");
  CHECK(back.ids.label(2) == "gamma");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) {
      CHECK(back.embedding.vectors(r, c) ==
            doctest::Approx(emb.vectors(r, c)).epsilon(1e-9));
    }
  }
  // parse -> serialize is byte-stable at 9 significant digits
  save_embedding(back.embedding, back.ids, dir.file("e2.txt"));
  CHECK(read_file(dir.file("e.txt")) == read_file(dir.file("e2.txt")));
}
