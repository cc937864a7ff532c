#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "isg/errors.hpp"
#include "isg/sai.hpp"
#include "helpers.hpp"

using namespace isg;
using sai::SparseMatrixD;

namespace {

SparseMatrixD sparse_identity(int n) {
  SparseMatrixD a(n, n);
  a.setIdentity();
  return a;
}

SparseMatrixD tridiagonal(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseMatrixD a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

SpinState all_spins(int n, int value) { return SpinState::Constant(n, value); }

}  // namespace

TEST_CASE("position graph construction") {
  SUBCASE("identity in a-squared mode: diagonal positions, no adjacency") {
    const auto pg = sai::build_position_graph(sparse_identity(3),
                                              sai::PatternMode::PatternOfASquared);
    CHECK(pg.positions.size() == 3);
    CHECK(pg.graph.num_edges() == 0);
    for (const auto& [i, j] : pg.positions) {
      CHECK(i == j);
    }
  }
  SUBCASE("identity in full mode: 9 positions, 4 neighbors each") {
    const auto pg = sai::build_position_graph(sparse_identity(3), sai::PatternMode::Full);
    CHECK(pg.positions.size() == 9);
    for (int k = 0; k < 9; ++k) {
      CHECK(pg.graph.degree(k) == 4);
    }
  }
  SUBCASE("tridiagonal 30x30 gives the pentadiagonal 5n-6 position count") {
    const auto pg =
        sai::build_position_graph(tridiagonal(30), sai::PatternMode::PatternOfASquared);
    CHECK(pg.positions.size() == 5 * 30 - 6);
  }
  SUBCASE("features carry A, A^2 and a constant") {
    const SparseMatrixD a = tridiagonal(4);
    const auto pg = sai::build_position_graph(a, sai::PatternMode::Full);
    const Eigen::MatrixXd a2 = (Eigen::MatrixXd(a) * Eigen::MatrixXd(a));
    for (std::size_t k = 0; k < pg.positions.size(); ++k) {
      const auto [i, j] = pg.positions[k];
      CHECK(pg.graph.node_features(static_cast<Eigen::Index>(k), 0) ==
            doctest::Approx(Eigen::MatrixXd(a)(i, j)));
      CHECK(pg.graph.node_features(static_cast<Eigen::Index>(k), 1) ==
            doctest::Approx(a2(i, j)));
      CHECK(pg.graph.node_features(static_cast<Eigen::Index>(k), 2) == 1.0);
    }
  }
  SUBCASE("asymmetric and oversized inputs rejected") {
    SparseMatrixD bad(2, 2);
    bad.insert(0, 1) = 1.0;
    bad.insert(0, 0) = 1.0;
    bad.insert(1, 1) = 1.0;
    bad.makeCompressed();
    CHECK_THROWS_AS(sai::build_position_graph(bad, sai::PatternMode::Full),
                    std::invalid_argument);
    CHECK_THROWS_AS(sai::build_position_graph(sparse_identity(70), sai::PatternMode::Full),
                    std::invalid_argument);
  }
  SUBCASE("adjacency is the shared row-or-column relation") {
    const auto pg = sai::build_position_graph(tridiagonal(5), sai::PatternMode::Full);
    for (const auto& [a, b] : edge_list(pg.graph)) {
      const auto [ra, ca] = pg.positions[static_cast<std::size_t>(a)];
      const auto [rb, cb] = pg.positions[static_cast<std::size_t>(b)];
      CHECK((ra == rb || ca == cb));
    }
  }
}

TEST_CASE("pattern extraction from spin states") {
  const auto pg = sai::build_position_graph(tridiagonal(6), sai::PatternMode::PatternOfASquared);
  const int p = static_cast<int>(pg.positions.size());
  SUBCASE("all up selects the full a priori pattern") {
    const auto pattern = sai::pattern_from_state(pg, all_spins(p, 1));
    CHECK(pattern.count == p);
  }
  SUBCASE("all down selects nothing") {
    const auto pattern = sai::pattern_from_state(pg, all_spins(p, -1));
    CHECK(pattern.count == 0);
  }
  SUBCASE("selected count tracks the sampling fraction") {
    SpinState x = all_spins(p, -1);
    for (int k = 0; k < p; k += 3) {
      x[k] = 1;
    }
    const auto pattern = sai::pattern_from_state(pg, x);
    CHECK(pattern.count == (p + 2) / 3);
    CHECK(static_cast<double>(pattern.count) / p == doctest::Approx(sampling_fraction(x)));
  }
  SUBCASE("symmetrize and force-diagonal flags") {
    SpinState x = all_spins(p, -1);
    // pick the (0,1) position only
    for (std::size_t k = 0; k < pg.positions.size(); ++k) {
      if (pg.positions[k] == std::make_pair(0, 1)) {
        x[static_cast<Eigen::Index>(k)] = 1;
      }
    }
    sai::PatternOptions opts;
    opts.symmetrize = true;
    opts.force_diagonal = true;
    const auto pattern = sai::pattern_from_state(pg, x, opts);
    CHECK(pattern.count == 2 + 6);  // (0,1), (1,0) and the diagonal
  }
}

TEST_CASE("column least squares") {
  SUBCASE("identity with diagonal pattern solves exactly") {
    const SparseMatrixD a = sparse_identity(3);
    const auto m = sai::solve_columns(a, sai::pattern_of(a));
    CHECK(sai::frobenius_loss(a, m) == doctest::Approx(0.0));
    CHECK(Eigen::MatrixXd(m).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  }
  SUBCASE("diagonal matrix inverts entrywise") {
    SparseMatrixD a(2, 2);
    a.insert(0, 0) = 2.0;
    a.insert(1, 1) = 4.0;
    a.makeCompressed();
    sai::SparsityPattern full;
    full.dim = 2;
    full.rows_per_col = {{0, 1}, {0, 1}};
    full.count = 4;
    const auto m = sai::solve_columns(a, full);
    CHECK(Eigen::MatrixXd(m)(0, 0) == doctest::Approx(0.5));
    CHECK(Eigen::MatrixXd(m)(1, 1) == doctest::Approx(0.25));
    CHECK(std::abs(Eigen::MatrixXd(m)(0, 1)) < 1e-14);
  }
  SUBCASE("empty column yields a zero column and unit residual") {
    const SparseMatrixD a = sparse_identity(2);
    sai::SparsityPattern pattern;
    pattern.dim = 2;
    pattern.rows_per_col = {{0}, {}};
    pattern.count = 1;
    const auto m = sai::solve_columns(a, pattern);
    CHECK(Eigen::MatrixXd(m).col(1).norm() == 0.0);
    CHECK(sai::frobenius_loss(a, m) == doctest::Approx(1.0));
  }
  SUBCASE("column order inside the pattern does not matter") {
    const SparseMatrixD a = tridiagonal(8);
    sai::SparsityPattern fwd;
    fwd.dim = 8;
    fwd.rows_per_col.assign(8, {0, 3, 5});
    fwd.count = 24;
    sai::SparsityPattern rev = fwd;
    rev.rows_per_col.assign(8, {5, 0, 3});
    const Eigen::MatrixXd m1(sai::solve_columns(a, fwd));
    const Eigen::MatrixXd m2(sai::solve_columns(a, rev));
    CHECK(m1.isApprox(m2, 1e-12));
  }
  SUBCASE("rank-deficient columns take the minimum-norm solution") {
    SparseMatrixD a(2, 2);
    a.insert(0, 0) = 1.0;
    a.insert(1, 1) = 1e-18;  // effectively rank one after pivot thresholding
    a.makeCompressed();
    sai::SparsityPattern pattern;
    pattern.dim = 2;
    pattern.rows_per_col = {{0, 1}, {0, 1}};
    pattern.count = 4;
    const auto m = sai::solve_columns(a, pattern);
    CHECK(Eigen::MatrixXd(m).allFinite());
  }
  SUBCASE("parallel solves agree with serial") {
    const SparseMatrixD a = tridiagonal(12);
    const auto pattern = sai::pattern_of(a);
    const Eigen::MatrixXd serial(sai::solve_columns(a, pattern, 1));
    const Eigen::MatrixXd parallel(sai::solve_columns(a, pattern, 4));
    CHECK(serial == parallel);
  }
}

TEST_CASE("frobenius loss") {
  const SparseMatrixD a = tridiagonal(5);
  SUBCASE("exact inverse scores zero") {
    const Eigen::MatrixXd inv = Eigen::MatrixXd(a).inverse();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        t.emplace_back(i, j, inv(i, j));
      }
    }
    SparseMatrixD m(5, 5);
    m.setFromTriplets(t.begin(), t.end());
    CHECK(sai::frobenius_loss(a, m) < 1e-12);
  }
  SUBCASE("zero approximation scores sqrt(n)") {
    const SparseMatrixD zero(5, 5);
    CHECK(sai::frobenius_loss(a, zero) == doctest::Approx(std::sqrt(5.0)));
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(sai::frobenius_loss(a, sparse_identity(4)), std::invalid_argument);
  }
}

TEST_CASE("loss never improves when positions are removed from the full pattern") {
  // per-column least squares over a superset can only lower the residual
  for (int trial = 0; trial < 5; ++trial) {
    const auto mats = sai::gen_dataset1(1, 12, 900 + trial);
    const SparseMatrixD& a = mats[0];
    const auto pg = sai::build_position_graph(a, sai::PatternMode::PatternOfASquared, 64);
    const int p = static_cast<int>(pg.positions.size());
    const double full_loss =
        sai::frobenius_loss(a, sai::solve_columns(a, sai::pattern_from_state(pg, all_spins(p, 1))));
    SpinState x = all_spins(p, 1);
    for (int k = 0; k < p; ++k) {
      if (rng::uniform(950 + trial, k) < 0.4) {
        x[k] = -1;
      }
    }
    const double subset_loss =
        sai::frobenius_loss(a, sai::solve_columns(a, sai::pattern_from_state(pg, x)));
    CHECK(full_loss <= subset_loss + 1e-12);
  }
}

TEST_CASE("dataset 1 generator") {
  const auto mats = sai::gen_dataset1(30, 30, 77);
  REQUIRE(mats.size() == 30);
  double sparsity_acc = 0.0;
  for (const auto& a : mats) {
    CHECK(sai::is_symmetric(a));
    const Eigen::MatrixXd dense(a);
    for (int i = 0; i < 30; ++i) {
      CHECK(dense(i, i) == 1.0);  // diagonal always present
    }
    const double det = sai::determinant(a);
    CHECK(det >= 0.001);
    CHECK(det <= 50.0);
    const double s = sai::sparsity(a);
    CHECK(s <= 0.96);
    sparsity_acc += s;
  }
  const double mean_sparsity = sparsity_acc / 30;
  CHECK(mean_sparsity > 0.75);
  CHECK(mean_sparsity < 0.90);

  SUBCASE("deterministic per seed") {
    const auto again = sai::gen_dataset1(3, 30, 77);
    CHECK(Eigen::MatrixXd(again[0]) == Eigen::MatrixXd(mats[0]));
  }
}

TEST_CASE("submatrix extraction") {
  SUBCASE("identity input splits into identity windows") {
    // a 30x30 identity is 96.7% sparse and falls to the 96% cap, so the
    // boundary case is exercised at window 25 where it sits exactly on it
    const auto windows = sai::extract_submatrices(sparse_identity(75), 25);
    REQUIRE(windows.size() == 3);
    for (const auto& w : windows) {
      CHECK(Eigen::MatrixXd(w) == Eigen::MatrixXd::Identity(25, 25));
    }
  }
  SUBCASE("banded input splits into banded windows at the default size") {
    // unit diagonal with 0.3 off-band keeps the windowed determinant inside
    // the [0.001, 50] acceptance band
    SparseMatrixD big(90, 90);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 90; ++i) {
      t.emplace_back(i, i, 1.0);
      if (i + 1 < 90) {
        t.emplace_back(i, i + 1, 0.3);
        t.emplace_back(i + 1, i, 0.3);
      }
    }
    big.setFromTriplets(t.begin(), t.end());
    const auto windows = sai::extract_submatrices(big, 30);
    REQUIRE(windows.size() == 3);
    for (const auto& w : windows) {
      CHECK(sai::is_symmetric(w));
      CHECK(Eigen::MatrixXd(w).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    }
  }
  SUBCASE("windows are rescaled to unit max magnitude") {
    SparseMatrixD big(60, 60);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 60; ++i) {
      t.emplace_back(i, i, 4.0);
      if (i + 1 < 60) {
        t.emplace_back(i, i + 1, 1.2);
        t.emplace_back(i + 1, i, 1.2);
      }
    }
    big.setFromTriplets(t.begin(), t.end());
    const auto windows = sai::extract_submatrices(big, 30);
    REQUIRE(windows.size() == 2);
    for (const auto& w : windows) {
      CHECK(Eigen::MatrixXd(w).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    }
  }
  SUBCASE("near-zero windows are dropped") {
    SparseMatrixD big(60, 60);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 30; ++i) {
      t.emplace_back(i, i, 1.0);
      if (i + 1 < 30) {
        t.emplace_back(i, i + 1, 0.3);
        t.emplace_back(i + 1, i, 0.3);
      }
    }
    t.emplace_back(40, 40, 1e-9);
    big.setFromTriplets(t.begin(), t.end());
    const auto windows = sai::extract_submatrices(big, 30);
    CHECK(windows.size() == 1);
  }
  SUBCASE("symmetrization uses the upper triangle") {
    SparseMatrixD big(30, 30);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 30; ++i) {
      t.emplace_back(i, i, 1.0);
      if (i + 1 < 30) {
        t.emplace_back(i, i + 1, 0.3);
        t.emplace_back(i + 1, i, 0.3);
      }
    }
    t.emplace_back(2, 7, 0.5);   // upper entry kept
    t.emplace_back(9, 4, 0.25);  // lower entry discarded
    big.setFromTriplets(t.begin(), t.end());
    const auto windows = sai::extract_submatrices(big, 30);
    REQUIRE(windows.size() == 1);
    const Eigen::MatrixXd w(windows[0]);
    CHECK(w(2, 7) == doctest::Approx(0.5));
    CHECK(w(7, 2) == doctest::Approx(0.5));
    CHECK(w(9, 4) == 0.0);
    CHECK(w(4, 9) == 0.0);
  }
  SUBCASE("no qualifying window is an error") {
    SparseMatrixD big(30, 30);  // all zero
    CHECK_THROWS_AS(sai::extract_submatrices(big, 30), DataError);
  }
}

TEST_CASE("matrix market round trip") {
  const auto mats = sai::gen_dataset1(1, 12, 5);
  std::stringstream buffer;
  sai::write_matrix_market(buffer, mats[0]);
  const std::string text = buffer.str();
  CHECK(text.rfind("%%MatrixMarket matrix coordinate real symmetric", 0) == 0);
  std::istringstream in(text);
  const SparseMatrixD back = sai::read_matrix_market(in);
  CHECK(Eigen::MatrixXd(back) == Eigen::MatrixXd(mats[0]));

  std::istringstream bad("not a header\n1 1 1\n1 1 1.0\n");
  CHECK_THROWS_AS(sai::read_matrix_market(bad), DataError);
}

TEST_CASE("baselines") {
  const auto mats = sai::gen_dataset1(1, 20, 31);
  const SparseMatrixD& a = mats[0];
  const auto pg = sai::build_position_graph(a, sai::PatternMode::PatternOfASquared, 64);
  IsingConfig icfg;
  icfg.coupling = -0.4;

  SUBCASE("only-a on the identity is exact") {
    const SparseMatrixD eye = sparse_identity(20);
    const auto pg_eye = sai::build_position_graph(eye, sai::PatternMode::PatternOfASquared, 64);
    const auto scores = sai::baselines(eye, pg_eye, 0.5, icfg, 3, 1, {"only-a"});
    CHECK(scores[0].loss == doctest::Approx(0.0));
  }
  SUBCASE("random selects the exact count") {
    const auto scores = sai::baselines(a, pg, 0.5, icfg, 3, 2, {"random"});
    const int p = static_cast<int>(pg.positions.size());
    CHECK(scores[0].fraction ==
          doctest::Approx(std::lround(0.5 * p) / static_cast<double>(p)));
  }
  SUBCASE("ising field tuning hits the requested fraction") {
    const Coloring c = greedy_color(pg.graph);
    for (double target : {0.3, 0.5, 0.7}) {
      const double field = sai::tune_constant_field(pg.graph, c, icfg, 3, target, 7);
      IsingParams p = make_params(icfg.beta, icfg.coupling,
                                  Eigen::VectorXd::Constant(pg.graph.num_nodes, field));
      double realized = 0.0;
      const int draws = 64;
      for (int d = 0; d < draws; ++d) {
        realized += sampling_fraction(mh_sample(pg.graph, c, p, 3, rng::key(800, d)));
      }
      realized /= draws;
      CHECK(std::abs(realized - target) < 0.06);
    }
  }
  SUBCASE("unknown method rejected") {
    CHECK_THROWS_AS(sai::baselines(a, pg, 0.5, icfg, 3, 1, {"bogus"}), std::invalid_argument);
    CHECK_THROWS_AS(sai::baselines(a, pg, 1.5, icfg, 3, 1, {"random"}), std::invalid_argument);
  }
}
