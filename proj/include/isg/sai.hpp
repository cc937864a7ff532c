#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "isg/graph.hpp"
#include "isg/sampler.hpp"
#include "isg/trainer.hpp"

namespace isg::sai {

using SparseMatrixD = Eigen::SparseMatrix<double>;

bool is_symmetric(const SparseMatrixD& a, double tol = 0.0);
double sparsity(const SparseMatrixD& a);          // fraction of zero entries
double determinant(const SparseMatrixD& a);       // dense LU; intended for small matrices

enum class PatternMode { PatternOfASquared, Full };

// Candidate positions of the approximate inverse, lifted to a graph: one node
// per position (i, j), adjacent iff two positions share a row or a column.
// Node features per position: [A_ij, (A^2)_ij, 1].
struct PositionGraph {
  int dim = 0;
  PatternMode mode = PatternMode::PatternOfASquared;
  std::vector<std::pair<int, int>> positions;  // (row, col), column-major order
  Graph graph;
};

PositionGraph build_position_graph(const SparseMatrixD& a, PatternMode mode, int dim_cap = 64);

struct SparsityPattern {
  int dim = 0;
  std::vector<std::vector<int>> rows_per_col;  // ascending row ids per column
  int count = 0;
};

struct PatternOptions {
  bool symmetrize = false;      // union (i, j) with (j, i)
  bool force_diagonal = false;  // always include (k, k)
};

// Positions with spin +1 are selected.
SparsityPattern pattern_from_state(const PositionGraph& pg, const SpinState& x,
                                   const PatternOptions& opts = {});

SparsityPattern pattern_of(const SparseMatrixD& a);  // nonzero positions of a

// Per-column least squares: min_v ||A(:, pattern_k) v - e_k||_2 via a
// column-pivoted orthogonal decomposition; rank-deficient columns get the
// minimum-norm solution, empty columns stay zero.
SparseMatrixD solve_columns(const SparseMatrixD& a, const SparsityPattern& pattern,
                            int threads = 1);

// || A M - I ||_F
double frobenius_loss(const SparseMatrixD& a, const SparseMatrixD& m);

// Synthetic corpus: symmetric binary matrices, always-nonzero diagonal,
// off-diagonal nonzero probability p(d) = 0.9 exp(-(d/4)^2) decaying with the
// distance d from the diagonal. Rejection-sampled until the zero fraction is
// at most 0.96 and det(A) lies in [0.001, 50].
std::vector<SparseMatrixD> gen_dataset1(int count, int n, std::uint64_t seed,
                                        int max_attempts_per_matrix = 10000);

// Non-overlapping diagonal windows of a larger matrix, symmetrized from the
// upper triangle, rescaled to unit max magnitude; windows that are all-zero
// below 1e-6, too sparse, or outside the determinant bounds are dropped.
std::vector<SparseMatrixD> extract_submatrices(const SparseMatrixD& big, int window = 30);

// Coordinate text format, 1-based indices. Symmetric files store the lower
// triangle; general files store every entry.
SparseMatrixD read_matrix_market(std::istream& in);
SparseMatrixD read_matrix_market_file(const std::string& path);
void write_matrix_market(std::ostream& out, const SparseMatrixD& a);
void write_matrix_market_file(const std::string& path, const SparseMatrixD& a);

// Task loss for training: pattern -> column solves -> Frobenius residual.
TaskLoss make_loss(const SparseMatrixD& a, const PositionGraph& pg,
                   const PatternOptions& opts = {});

struct BaselineScore {
  std::string method;
  double loss = 0.0;
  double fraction = 0.0;
};

// ISING: constant-field antiferromagnetic sample, field tuned by bisection to
// the requested fraction. RANDOM: uniform subset of the a priori pattern of
// exactly round(fraction * positions). ONLY-A: the pattern of A itself.
std::vector<BaselineScore> baselines(const SparseMatrixD& a, const PositionGraph& pg,
                                     double fraction, const IsingConfig& icfg, int sweeps,
                                     std::uint64_t seed,
                                     const std::vector<std::string>& methods);

// Constant field value c such that sampling with field c realizes the target
// fraction of +1 spins, found by bisection over seeded sample averages.
double tune_constant_field(const Graph& g, const Coloring& coloring, const IsingConfig& icfg,
                           int sweeps, double fraction, std::uint64_t seed);

}  // namespace isg::sai
