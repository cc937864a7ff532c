#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>

#include "isg/graph.hpp"

namespace isg {

// One configuration of the model: entries are exactly -1 or +1. +1 means the
// node is selected/kept.
using SpinState = Eigen::VectorXi;

struct IsingParams {
  double beta = 1.0;        // inverse temperature, > 0
  double coupling = 1.0;    // scalar J, used when per_edge is empty
  Eigen::VectorXd per_edge; // optional per-arc J_ij aligned with g.neighbor_ids
  Eigen::VectorXd field;    // h, one entry per node
};

IsingParams make_params(double beta, double coupling, Eigen::VectorXd field);

// Copies the graph's stored per-edge couplings into the parameter set.
IsingParams with_graph_couplings(const Graph& g, IsingParams p);

// -sum_{(i,j) in E} J_ij x_i x_j - sum_i h_i x_i, each undirected edge once.
double energy(const Graph& g, const IsingParams& p, const SpinState& x);

// Energy change caused by flipping spin i: 2 x_i (h_i + sum_j J_ij x_j).
double delta_energy(const Graph& g, const IsingParams& p, const SpinState& x, int i);

// h_i + sum_{j in N(i)} J_ij x_j
double effective_field(const Graph& g, const IsingParams& p, const SpinState& x, int i);

struct MhOptions {
  int threads = 1;
  // Accept with exp(-2 beta dE) instead of exp(-beta dE). Matches the
  // doubled-exponent variant of the update rule; equivalent to sampling at
  // inverse temperature 2 beta.
  bool double_beta_acceptance = false;
};

// Color-parallel Metropolis-Hastings. Initial spins are uniform; each sweep
// visits the color classes in order and proposes a flip at every node of the
// class, accepting when dE < 0 or exp(-beta dE) > r, r ~ U[0,1). Randomness
// is keyed by (seed, node, sweep, color), so the result is identical for any
// thread count.
SpinState mh_sample(const Graph& g, const Coloring& c, const IsingParams& p,
                    int sweeps, std::uint64_t seed, const MhOptions& opts = {});

// Resumable chain for long-run frequency studies: the state persists across
// advance() calls and randomness is keyed by the absolute sweep index.
class MhChain {
 public:
  MhChain(const Graph& g, const Coloring& c, IsingParams p, std::uint64_t seed,
          MhOptions opts = {});
  void advance(int sweeps);
  const SpinState& state() const { return state_; }
  int sweeps_done() const { return sweeps_done_; }

 private:
  const Graph* graph_;
  const Coloring* coloring_;
  IsingParams params_;
  MhOptions opts_;
  std::uint64_t seed_;
  SpinState state_;
  int sweeps_done_ = 0;
};

struct ExactDistribution {
  int num_nodes = 0;
  Eigen::VectorXd probabilities;  // 2^n entries; bit i of the index set <=> x_i = +1
  double log_partition = 0.0;
};

// Full enumeration of the Boltzmann distribution. Hard-capped at 20 nodes.
ExactDistribution exact_distribution(const Graph& g, const IsingParams& p);

// One i.i.d. configuration by inverse-CDF over the enumerated table.
SpinState exact_sample(const ExactDistribution& d, std::uint64_t seed);

SpinState spins_from_index(std::uint64_t index, int num_nodes);
std::uint64_t index_from_spins(const SpinState& x);

// Deterministic magnetization estimate: mean_i tanh(beta h_i).
double eta_deterministic(const IsingParams& p);

// One-sample stochastic estimate: mean_i tanh(beta h_eff_i(x)).
double eta_stochastic(const Graph& g, const IsingParams& p, const SpinState& x);

// Fraction of +1 spins.
double sampling_fraction(const SpinState& x);

struct MeanFieldResult {
  Eigen::VectorXd magnetization;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped fixed-point iteration of xbar_i = tanh(beta (h_i + sum_j J_ij xbar_j)),
// damping 0.5, starting from zero plus tiny symmetry-breaking noise. The last
// iterate is returned even when the residual never reaches tol; convergence
// can fail near the critical temperature.
MeanFieldResult mean_field_solve(const Graph& g, const IsingParams& p,
                                 int max_iters = 500, double tol = 1e-8);

struct EnergyTrace {
  Eigen::VectorXd mean;    // one entry per sweep
  Eigen::VectorXd stddev;  // population std across replicas
};

// Energy recorded after each sweep across independent chains.
EnergyTrace energy_trace(const Graph& g, const Coloring& c, const IsingParams& p,
                         int sweeps, int replicas, std::uint64_t seed,
                         const MhOptions& opts = {});

// CSV schema: sweep,mean_energy,std_energy (sweep is 1-based).
void write_energy_trace_csv(std::ostream& out, const EnergyTrace& trace);

// One line of "+1"/"-1" tokens.
std::string format_spins(const SpinState& x);
SpinState parse_spins(const std::string& line);

}  // namespace isg
