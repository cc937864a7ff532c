#include "isg/sai.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "isg/errors.hpp"
#include "isg/parallel.hpp"
#include "isg/rng.hpp"

namespace isg::sai {

namespace {

constexpr double kDetLow = 0.001;
constexpr double kDetHigh = 50.0;
constexpr double kMaxSparsity = 0.96;

SparseMatrixD from_dense(const Eigen::MatrixXd& dense, double drop_tol = 0.0) {
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index j = 0; j < dense.cols(); ++j) {
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
      if (std::abs(dense(i, j)) > drop_tol) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(j), dense(i, j));
      }
    }
  }
  SparseMatrixD a(dense.rows(), dense.cols());
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

}  // namespace

bool is_symmetric(const SparseMatrixD& a, double tol) {
  if (a.rows() != a.cols()) {
    return false;
  }
  SparseMatrixD diff = SparseMatrixD(a.transpose()) - a;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrixD::InnerIterator it(diff, k); it; ++it) {
      if (std::abs(it.value()) > tol) {
        return false;
      }
    }
  }
  return true;
}

double sparsity(const SparseMatrixD& a) {
  const double total = static_cast<double>(a.rows()) * static_cast<double>(a.cols());
  int nnz = 0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrixD::InnerIterator it(a, k); it; ++it) {
      if (it.value() != 0.0) {
        ++nnz;
      }
    }
  }
  return 1.0 - static_cast<double>(nnz) / total;
}

double determinant(const SparseMatrixD& a) {
  return Eigen::MatrixXd(a).partialPivLu().determinant();
}

PositionGraph build_position_graph(const SparseMatrixD& a, PatternMode mode, int dim_cap) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("position graph: matrix must be square");
  }
  if (!is_symmetric(a)) {
    throw std::invalid_argument("position graph: matrix must be symmetric");
  }
  const int n = static_cast<int>(a.rows());
  if (n > dim_cap) {
    throw std::invalid_argument("position graph: dimension " + std::to_string(n) +
                                " exceeds cap " + std::to_string(dim_cap) +
                                "; the position graph grows quadratically");
  }

  const SparseMatrixD a2 = (a * a).pruned();
  PositionGraph pg;
  pg.dim = n;
  pg.mode = mode;

  Eigen::MatrixXd a_dense(a);
  Eigen::MatrixXd a2_dense(a2);
  if (mode == PatternMode::Full) {
    pg.positions.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        pg.positions.emplace_back(i, j);
      }
    }
  } else {
    // Pattern of A + A^2. A appears in A + A^2 unless a value cancels
    // exactly, so take the union of both patterns explicitly.
    std::vector<char> mask(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    auto mark = [&mask, n](const SparseMatrixD& s) {
      for (int k = 0; k < s.outerSize(); ++k) {
        for (SparseMatrixD::InnerIterator it(s, k); it; ++it) {
          if (it.value() != 0.0) {
            mask[static_cast<std::size_t>(it.col()) * n + it.row()] = 1;
          }
        }
      }
    };
    mark(a);
    mark(a2);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(j) * n + i]) {
          pg.positions.emplace_back(i, j);
        }
      }
    }
  }

  const int p = static_cast<int>(pg.positions.size());
  std::vector<std::vector<int>> by_row(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> by_col(static_cast<std::size_t>(n));
  for (int k = 0; k < p; ++k) {
    by_row[static_cast<std::size_t>(pg.positions[static_cast<std::size_t>(k)].first)].push_back(k);
    by_col[static_cast<std::size_t>(pg.positions[static_cast<std::size_t>(k)].second)].push_back(k);
  }
  EdgeList edges;
  auto clique = [&edges](const std::vector<int>& group) {
    for (std::size_t x = 0; x < group.size(); ++x) {
      for (std::size_t y = x + 1; y < group.size(); ++y) {
        edges.emplace_back(group[x], group[y]);
      }
    }
  };
  for (int r = 0; r < n; ++r) {
    clique(by_row[static_cast<std::size_t>(r)]);
  }
  for (int c = 0; c < n; ++c) {
    clique(by_col[static_cast<std::size_t>(c)]);
  }

  Eigen::MatrixXd features(p, 3);
  for (int k = 0; k < p; ++k) {
    const auto [i, j] = pg.positions[static_cast<std::size_t>(k)];
    features(k, 0) = a_dense(i, j);
    features(k, 1) = a2_dense(i, j);
    features(k, 2) = 1.0;
  }
  pg.graph = build_graph(p, edges, std::move(features));
  return pg;
}

SparsityPattern pattern_from_state(const PositionGraph& pg, const SpinState& x,
                                   const PatternOptions& opts) {
  if (x.size() != static_cast<Eigen::Index>(pg.positions.size())) {
    throw std::invalid_argument("pattern_from_state: state size != position count");
  }
  std::vector<std::vector<char>> selected(
      static_cast<std::size_t>(pg.dim),
      std::vector<char>(static_cast<std::size_t>(pg.dim), 0));
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] > 0) {
      const auto [i, j] = pg.positions[static_cast<std::size_t>(k)];
      selected[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
      if (opts.symmetrize) {
        selected[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
      }
    }
  }
  if (opts.force_diagonal) {
    for (int d = 0; d < pg.dim; ++d) {
      selected[static_cast<std::size_t>(d)][static_cast<std::size_t>(d)] = 1;
    }
  }
  SparsityPattern pattern;
  pattern.dim = pg.dim;
  pattern.rows_per_col.resize(static_cast<std::size_t>(pg.dim));
  for (int j = 0; j < pg.dim; ++j) {
    for (int i = 0; i < pg.dim; ++i) {
      if (selected[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
        pattern.rows_per_col[static_cast<std::size_t>(j)].push_back(i);
        ++pattern.count;
      }
    }
  }
  return pattern;
}

SparsityPattern pattern_of(const SparseMatrixD& a) {
  SparsityPattern pattern;
  pattern.dim = static_cast<int>(a.rows());
  pattern.rows_per_col.resize(static_cast<std::size_t>(pattern.dim));
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrixD::InnerIterator it(a, k); it; ++it) {
      if (it.value() != 0.0) {
        pattern.rows_per_col[static_cast<std::size_t>(it.col())].push_back(
            static_cast<int>(it.row()));
        ++pattern.count;
      }
    }
  }
  for (auto& rows : pattern.rows_per_col) {
    std::sort(rows.begin(), rows.end());
  }
  return pattern;
}

SparseMatrixD solve_columns(const SparseMatrixD& a, const SparsityPattern& pattern,
                            int threads) {
  const int n = static_cast<int>(a.rows());
  if (pattern.dim != n) {
    throw std::invalid_argument("solve_columns: pattern dimension != matrix dimension");
  }
  const Eigen::MatrixXd dense(a);
  std::vector<Eigen::VectorXd> values(static_cast<std::size_t>(n));
  parallel_for(
      n, threads,
      [&](int begin, int end) {
        for (int k = begin; k < end; ++k) {
          const auto& rows = pattern.rows_per_col[static_cast<std::size_t>(k)];
          if (rows.empty()) {
            continue;
          }
          Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(rows.size()));
          for (std::size_t c = 0; c < rows.size(); ++c) {
            sub.col(static_cast<Eigen::Index>(c)) = dense.col(rows[c]);
          }
          Eigen::VectorXd rhs = Eigen::VectorXd::Unit(n, k);
          values[static_cast<std::size_t>(k)] =
              sub.completeOrthogonalDecomposition().solve(rhs);
        }
      },
      4);

  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < n; ++k) {
    const auto& rows = pattern.rows_per_col[static_cast<std::size_t>(k)];
    for (std::size_t c = 0; c < rows.size(); ++c) {
      trips.emplace_back(rows[c], k, values[static_cast<std::size_t>(k)][static_cast<Eigen::Index>(c)]);
    }
  }
  SparseMatrixD m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

double frobenius_loss(const SparseMatrixD& a, const SparseMatrixD& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw std::invalid_argument("frobenius_loss: dimension mismatch");
  }
  SparseMatrixD residual = a * m;
  residual -= SparseMatrixD(Eigen::VectorXd::Ones(a.rows()).asDiagonal());
  return residual.norm();
}

std::vector<SparseMatrixD> gen_dataset1(int count, int n, std::uint64_t seed,
                                        int max_attempts_per_matrix) {
  if (count < 1 || n < 1) {
    throw std::invalid_argument("gen_dataset1: count and n must be positive");
  }
  constexpr double kPeak = 0.9;
  constexpr double kWidth = 4.0;
  std::vector<SparseMatrixD> out;
  out.reserve(static_cast<std::size_t>(count));
  std::uint64_t attempt = 0;
  while (static_cast<int>(out.size()) < count) {
    if (attempt > static_cast<std::uint64_t>(max_attempts_per_matrix) *
                      static_cast<std::uint64_t>(count)) {
      throw NumericalError("gen_dataset1: rejection budget exceeded");
    }
    const std::uint64_t mseed = rng::key(seed, attempt++);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    std::uint64_t draw = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d = static_cast<double>(j - i);
        const double p = kPeak * std::exp(-(d / kWidth) * (d / kWidth));
        if (rng::uniform(mseed, draw++) < p) {
          a(i, j) = a(j, i) = 1.0;
        }
      }
    }
    const double zero_frac =
        1.0 - static_cast<double>((a.array() != 0.0).count()) / static_cast<double>(n * n);
    if (zero_frac > kMaxSparsity) {
      continue;
    }
    const double det = a.partialPivLu().determinant();
    if (det < kDetLow || det > kDetHigh) {
      continue;
    }
    out.push_back(from_dense(a));
  }
  return out;
}

std::vector<SparseMatrixD> extract_submatrices(const SparseMatrixD& big, int window) {
  if (window < 1) {
    throw std::invalid_argument("extract_submatrices: window must be positive");
  }
  const int n = static_cast<int>(std::min(big.rows(), big.cols()));
  std::vector<SparseMatrixD> out;
  const Eigen::MatrixXd dense(big);
  for (int start = 0; start + window <= n; start += window) {
    Eigen::MatrixXd w = dense.block(start, start, window, window);
    // Symmetrize from the upper triangle.
    for (int i = 0; i < window; ++i) {
      for (int j = 0; j < i; ++j) {
        w(i, j) = w(j, i);
      }
    }
    const double max_abs = w.cwiseAbs().maxCoeff();
    if (max_abs < 1e-6) {
      continue;
    }
    w /= max_abs;
    const double zero_frac = 1.0 - static_cast<double>((w.array() != 0.0).count()) /
                                       static_cast<double>(window * window);
    if (zero_frac > kMaxSparsity) {
      continue;
    }
    const double det = w.partialPivLu().determinant();
    if (det < kDetLow || det > kDetHigh) {
      continue;
    }
    out.push_back(from_dense(w));
  }
  if (out.empty()) {
    throw DataError("extract_submatrices: no qualifying windows");
  }
  return out;
}

SparseMatrixD read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw DataError("matrix market: missing header");
  }
  const bool symmetric = line.find("symmetric") != std::string::npos;
  if (line.find("coordinate") == std::string::npos) {
    throw DataError("matrix market: only coordinate format is supported");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') {
      break;
    }
  }
  std::istringstream dims(line);
  int rows = 0;
  int cols = 0;
  long long nnz = 0;
  if (!(dims >> rows >> cols >> nnz)) {
    throw DataError("matrix market: malformed size line");
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nnz) * (symmetric ? 2 : 1));
  for (long long e = 0; e < nnz; ++e) {
    int i = 0;
    int j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) {
      throw DataError("matrix market: truncated entry list");
    }
    trips.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) {
      trips.emplace_back(j - 1, i - 1, v);
    }
  }
  SparseMatrixD a(rows, cols);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

SparseMatrixD read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open matrix file: " + path);
  }
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const SparseMatrixD& a) {
  const bool symmetric = is_symmetric(a);
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general")
      << "\n";
  std::vector<std::string> entries;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrixD::InnerIterator it(a, k); it; ++it) {
      if (it.value() == 0.0) {
        continue;
      }
      if (symmetric && it.row() < it.col()) {
        continue;  // store the lower triangle only
      }
      std::ostringstream e;
      e.precision(17);
      e << (it.row() + 1) << ' ' << (it.col() + 1) << ' ' << it.value();
      entries.push_back(e.str());
    }
  }
  out << a.rows() << ' ' << a.cols() << ' ' << entries.size() << '\n';
  for (const auto& e : entries) {
    out << e << '\n';
  }
}

void write_matrix_market_file(const std::string& path, const SparseMatrixD& a) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open matrix file for writing: " + path);
  }
  write_matrix_market(out, a);
}

TaskLoss make_loss(const SparseMatrixD& a, const PositionGraph& pg, const PatternOptions& opts) {
  return [&a, &pg, opts](const SpinState& x) {
    return frobenius_loss(a, solve_columns(a, pattern_from_state(pg, x, opts)));
  };
}

double tune_constant_field(const Graph& g, const Coloring& coloring, const IsingConfig& icfg,
                           int sweeps, double fraction, std::uint64_t seed) {
  constexpr int kSamples = 16;
  constexpr int kIters = 24;
  auto realized = [&](double c) {
    IsingParams p = make_params(icfg.beta, icfg.coupling,
                                Eigen::VectorXd::Constant(g.num_nodes, c));
    double acc = 0.0;
    for (int s = 0; s < kSamples; ++s) {
      acc += sampling_fraction(
          mh_sample(g, coloring, p, sweeps, rng::key(seed, static_cast<std::uint64_t>(s))));
    }
    return acc / kSamples;
  };
  // The realized fraction is monotone in the constant field.
  double lo = -4.0 / icfg.beta;
  double hi = 4.0 / icfg.beta;
  for (int it = 0; it < kIters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (realized(mid) < fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<BaselineScore> baselines(const SparseMatrixD& a, const PositionGraph& pg,
                                     double fraction, const IsingConfig& icfg, int sweeps,
                                     std::uint64_t seed,
                                     const std::vector<std::string>& methods) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("sai baselines: fraction must lie in (0, 1)");
  }
  std::vector<BaselineScore> scores;
  const int p = static_cast<int>(pg.positions.size());
  for (const std::string& method : methods) {
    BaselineScore score;
    score.method = method;
    SparsityPattern pattern;
    if (method == "ising") {
      const Coloring coloring = greedy_color(pg.graph);
      const double c = tune_constant_field(pg.graph, coloring, icfg, sweeps, fraction,
                                           rng::key(seed, 0x74756e65));
      IsingParams ip = make_params(icfg.beta, icfg.coupling,
                                   Eigen::VectorXd::Constant(p, c));
      const SpinState x =
          mh_sample(pg.graph, coloring, ip, sweeps, rng::key(seed, 0x6973696e));
      pattern = pattern_from_state(pg, x);
    } else if (method == "random") {
      const int want = static_cast<int>(std::lround(fraction * p));
      std::vector<int> ids(static_cast<std::size_t>(p));
      std::iota(ids.begin(), ids.end(), 0);
      for (int k = 0; k < want; ++k) {
        const int pick = k + static_cast<int>(rng::key(seed, 0x72616e64, k) %
                                              static_cast<std::uint64_t>(p - k));
        std::swap(ids[static_cast<std::size_t>(k)], ids[static_cast<std::size_t>(pick)]);
      }
      SpinState x = SpinState::Constant(p, -1);
      for (int k = 0; k < want; ++k) {
        x[ids[static_cast<std::size_t>(k)]] = 1;
      }
      pattern = pattern_from_state(pg, x);
    } else if (method == "only-a") {
      pattern = pattern_of(a);
    } else {
      throw std::invalid_argument("sai baselines: unknown method " + method);
    }
    score.loss = frobenius_loss(a, solve_columns(a, pattern));
    score.fraction = static_cast<double>(pattern.count) / static_cast<double>(p);
    scores.push_back(std::move(score));
  }
  return scores;
}

}  // namespace isg::sai
