#include "isg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "isg/errors.hpp"
#include "isg/parallel.hpp"
#include "isg/rng.hpp"

namespace isg {

namespace {

void check_sizes(const Graph& g, const IsingParams& p, const SpinState& x) {
  if (p.field.size() != g.num_nodes) {
    throw std::invalid_argument("ising: field length != num_nodes");
  }
  if (x.size() != g.num_nodes) {
    throw std::invalid_argument("ising: spin state length != num_nodes");
  }
  if (p.per_edge.size() != 0 &&
      p.per_edge.size() != static_cast<Eigen::Index>(g.neighbor_ids.size())) {
    throw std::invalid_argument("ising: per-edge coupling not arc-aligned");
  }
  if (!(p.beta > 0)) {
    throw std::invalid_argument("ising: beta must be positive");
  }
}

inline double arc_coupling(const IsingParams& p, int arc) {
  return p.per_edge.size() != 0 ? p.per_edge[arc] : p.coupling;
}

SpinState uniform_spins(const Graph& g, std::uint64_t seed) {
  // Sweep index 0 is reserved for initialization; updates key from sweep + 1.
  SpinState x(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    x[i] = rng::uniform(seed, static_cast<std::uint64_t>(i), 0, 0) < 0.5 ? -1 : 1;
  }
  return x;
}

void mh_sweep(const Graph& g, const Coloring& c, const IsingParams& p, SpinState& x,
              int sweep, std::uint64_t seed, const MhOptions& opts) {
  const double beta_factor = opts.double_beta_acceptance ? 2.0 * p.beta : p.beta;
  for (int color = 0; color < c.num_colors; ++color) {
    const auto& cls = c.classes[static_cast<std::size_t>(color)];
    // Nodes of one color share no edges, so their Markov blankets are frozen
    // during the pass and they may update in any order.
    parallel_for(static_cast<int>(cls.size()), opts.threads, [&](int begin, int end) {
      for (int idx = begin; idx < end; ++idx) {
        const int i = cls[static_cast<std::size_t>(idx)];
        double heff = p.field[i];
        for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
          heff += arc_coupling(p, k) * x[g.neighbor_ids[static_cast<std::size_t>(k)]];
        }
        const double d_energy = 2.0 * x[i] * heff;
        bool accept = d_energy < 0;
        if (!accept) {
          const double r = rng::uniform(seed, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(sweep) + 1,
                                        static_cast<std::uint64_t>(color));
          accept = std::exp(-beta_factor * d_energy) > r;
        }
        if (accept) {
          x[i] = -x[i];
        }
      }
    });
  }
}

}  // namespace

IsingParams make_params(double beta, double coupling, Eigen::VectorXd field) {
  IsingParams p;
  p.beta = beta;
  p.coupling = coupling;
  p.field = std::move(field);
  return p;
}

IsingParams with_graph_couplings(const Graph& g, IsingParams p) {
  if (g.edge_coupling.size() != static_cast<Eigen::Index>(g.neighbor_ids.size())) {
    throw std::invalid_argument("with_graph_couplings: graph carries no arc-aligned couplings");
  }
  p.per_edge = g.edge_coupling;
  return p;
}

double energy(const Graph& g, const IsingParams& p, const SpinState& x) {
  check_sizes(g, p, x);
  double pair_sum = 0.0;
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
      const int j = g.neighbor_ids[static_cast<std::size_t>(k)];
      if (j > i) {
        pair_sum += arc_coupling(p, k) * x[i] * x[j];
      }
    }
  }
  return -pair_sum - p.field.dot(x.cast<double>());
}

double effective_field(const Graph& g, const IsingParams& p, const SpinState& x, int i) {
  check_sizes(g, p, x);
  if (i < 0 || i >= g.num_nodes) {
    throw std::invalid_argument("effective_field: node index out of range");
  }
  double acc = p.field[i];
  for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
    acc += arc_coupling(p, k) * x[g.neighbor_ids[static_cast<std::size_t>(k)]];
  }
  return acc;
}

double delta_energy(const Graph& g, const IsingParams& p, const SpinState& x, int i) {
  return 2.0 * x[i] * effective_field(g, p, x, i);
}

SpinState mh_sample(const Graph& g, const Coloring& c, const IsingParams& p,
                    int sweeps, std::uint64_t seed, const MhOptions& opts) {
  if (sweeps < 1) {
    throw std::invalid_argument("mh_sample: sweeps must be >= 1");
  }
  if (!validate_coloring(g, c)) {
    throw std::invalid_argument("mh_sample: improper coloring");
  }
  SpinState x = uniform_spins(g, seed);
  check_sizes(g, p, x);
  for (int t = 0; t < sweeps; ++t) {
    mh_sweep(g, c, p, x, t, seed, opts);
  }
  return x;
}

MhChain::MhChain(const Graph& g, const Coloring& c, IsingParams p, std::uint64_t seed,
                 MhOptions opts)
    : graph_(&g), coloring_(&c), params_(std::move(p)), opts_(opts), seed_(seed) {
  if (!validate_coloring(g, c)) {
    throw std::invalid_argument("MhChain: improper coloring");
  }
  state_ = uniform_spins(g, seed_);
  check_sizes(g, params_, state_);
}

void MhChain::advance(int sweeps) {
  for (int t = 0; t < sweeps; ++t) {
    mh_sweep(*graph_, *coloring_, params_, state_, sweeps_done_++, seed_, opts_);
  }
}

ExactDistribution exact_distribution(const Graph& g, const IsingParams& p) {
  if (g.num_nodes > 20) {
    throw std::invalid_argument("exact_distribution: enumeration capped at 20 nodes");
  }
  const std::uint64_t count = std::uint64_t{1} << g.num_nodes;
  ExactDistribution d;
  d.num_nodes = g.num_nodes;

  Eigen::VectorXd log_weight(static_cast<Eigen::Index>(count));
  for (std::uint64_t s = 0; s < count; ++s) {
    const SpinState x = spins_from_index(s, g.num_nodes);
    log_weight[static_cast<Eigen::Index>(s)] = -p.beta * energy(g, p, x);
  }
  const double max_lw = log_weight.maxCoeff();
  const double sum_exp = (log_weight.array() - max_lw).exp().sum();
  d.log_partition = max_lw + std::log(sum_exp);
  d.probabilities = (log_weight.array() - d.log_partition).exp();
  return d;
}

SpinState exact_sample(const ExactDistribution& d, std::uint64_t seed) {
  const double u = rng::uniform(seed);
  double acc = 0.0;
  const Eigen::Index count = d.probabilities.size();
  for (Eigen::Index s = 0; s < count; ++s) {
    acc += d.probabilities[s];
    if (u < acc) {
      return spins_from_index(static_cast<std::uint64_t>(s), d.num_nodes);
    }
  }
  return spins_from_index(static_cast<std::uint64_t>(count - 1), d.num_nodes);
}

SpinState spins_from_index(std::uint64_t index, int num_nodes) {
  SpinState x(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    x[i] = (index >> i) & 1 ? 1 : -1;
  }
  return x;
}

std::uint64_t index_from_spins(const SpinState& x) {
  std::uint64_t index = 0;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] > 0) {
      index |= std::uint64_t{1} << i;
    }
  }
  return index;
}

double eta_deterministic(const IsingParams& p) {
  if (p.field.size() == 0) {
    throw std::invalid_argument("eta_deterministic: empty field");
  }
  return (p.beta * p.field.array()).tanh().mean();
}

double eta_stochastic(const Graph& g, const IsingParams& p, const SpinState& x) {
  check_sizes(g, p, x);
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes; ++i) {
    acc += std::tanh(p.beta * effective_field(g, p, x, i));
  }
  return acc / g.num_nodes;
}

double sampling_fraction(const SpinState& x) {
  if (x.size() == 0) {
    return 0.0;
  }
  return static_cast<double>((x.array() > 0).count()) / static_cast<double>(x.size());
}

MeanFieldResult mean_field_solve(const Graph& g, const IsingParams& p,
                                 int max_iters, double tol) {
  if (p.field.size() != g.num_nodes) {
    throw std::invalid_argument("mean_field_solve: field length != num_nodes");
  }
  constexpr double kDamping = 0.5;
  constexpr std::uint64_t kNoiseSeed = 0x6d65616e;  // fixed; the solver is deterministic
  MeanFieldResult r;
  r.magnetization.resize(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    r.magnetization[i] = 1e-4 * (rng::uniform(kNoiseSeed, static_cast<std::uint64_t>(i)) - 0.5);
  }
  Eigen::VectorXd next(g.num_nodes);
  int it = 0;
  while (it < max_iters) {
    ++it;
    for (int i = 0; i < g.num_nodes; ++i) {
      double heff = p.field[i];
      for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
        heff += arc_coupling(p, k) * r.magnetization[g.neighbor_ids[static_cast<std::size_t>(k)]];
      }
      next[i] = std::tanh(p.beta * heff);
    }
    r.residual = (next - r.magnetization).cwiseAbs().maxCoeff();
    r.magnetization = kDamping * r.magnetization + (1.0 - kDamping) * next;
    if (r.residual < tol) {
      r.converged = true;
      break;
    }
  }
  r.iterations = it;
  return r;
}

EnergyTrace energy_trace(const Graph& g, const Coloring& c, const IsingParams& p,
                         int sweeps, int replicas, std::uint64_t seed,
                         const MhOptions& opts) {
  if (replicas < 1) {
    throw std::invalid_argument("energy_trace: replicas must be >= 1");
  }
  if (sweeps < 1) {
    throw std::invalid_argument("energy_trace: sweeps must be >= 1");
  }
  if (!validate_coloring(g, c)) {
    throw std::invalid_argument("energy_trace: improper coloring");
  }
  Eigen::MatrixXd energies(replicas, sweeps);
  for (int rep = 0; rep < replicas; ++rep) {
    const std::uint64_t chain_seed = rng::substream(seed, static_cast<std::uint64_t>(rep));
    SpinState x = uniform_spins(g, chain_seed);
    check_sizes(g, p, x);
    for (int t = 0; t < sweeps; ++t) {
      mh_sweep(g, c, p, x, t, chain_seed, opts);
      energies(rep, t) = energy(g, p, x);
    }
  }
  EnergyTrace trace;
  trace.mean = energies.colwise().mean();
  trace.stddev.resize(sweeps);
  for (int t = 0; t < sweeps; ++t) {
    trace.stddev[t] = std::sqrt((energies.col(t).array() - trace.mean[t]).square().mean());
  }
  return trace;
}

void write_energy_trace_csv(std::ostream& out, const EnergyTrace& trace) {
  out << "sweep,mean_energy,std_energy\n";
  for (Eigen::Index t = 0; t < trace.mean.size(); ++t) {
    out << (t + 1) << ',' << trace.mean[t] << ',' << trace.stddev[t] << '\n';
  }
}

std::string format_spins(const SpinState& x) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) {
      out << ' ';
    }
    out << (x[i] > 0 ? "+1" : "-1");
  }
  return out.str();
}

SpinState parse_spins(const std::string& line) {
  std::istringstream in(line);
  std::vector<int> vals;
  int v = 0;
  while (in >> v) {
    if (v != 1 && v != -1) {
      throw DataError("spin token must be +1 or -1");
    }
    vals.push_back(v);
  }
  return Eigen::Map<const SpinState>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace isg
