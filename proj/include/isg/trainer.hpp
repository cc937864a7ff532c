#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isg/field_net.hpp"
#include "isg/graph.hpp"
#include "isg/sampler.hpp"

namespace isg {

// Black-box task loss; no differentiability required, but it must be pure:
// the same state always yields the same value.
using TaskLoss = std::function<double(const SpinState&)>;

// Draws one configuration from the model defined by (graph, params). The
// training loop passes a fresh seed per draw.
using SamplerFn = std::function<SpinState(const Graph&, const Coloring&, const IsingParams&,
                                          std::uint64_t seed)>;

struct IsingConfig {
  double beta = 1.0;
  double coupling = -0.4;
  bool double_beta_acceptance = false;
};

// Metropolis-Hastings sampler closure over the given options.
SamplerFn mh_sampler(int sweeps, int threads = 1, bool double_beta_acceptance = false);

struct TrainConfig {
  double eta_target = 0.0;   // desired average magnetization, in (-1, 1)
  int sweeps = 3;            // MCMC sweeps per training sample
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 300;
  int batch_size = 1;        // gradient-accumulation window
  std::uint64_t rng_seed = 0;
  int rloo_k = 2;
  double penalty_weight = 1.0;
  // Regularize through the one-sample stochastic fraction estimate inside the
  // task loss instead of the deterministic penalty. Experimental; the
  // deterministic penalty works better.
  bool stochastic_fraction_reg = false;
};

// Sampling fraction implied by the magnetization target.
inline double target_fraction(const TrainConfig& cfg) { return (1.0 + cfg.eta_target) / 2.0; }

struct StepReport {
  std::vector<double> losses;       // one per RLOO sample
  double penalty = 0.0;
  double realized_fraction = 0.0;   // mean over the samples
  double task_grad_norm = 0.0;
  double penalty_grad_norm = 0.0;
};

struct StepResult {
  GradientBundle grad;
  StepReport report;
};

// One leave-one-out estimator step: draws K independent samples at the
// current field, scores them, and turns the loss differences into a parameter
// gradient. log Z never appears; its contributions cancel across the K terms.
// The magnetization penalty gradient is added on top. Throws NumericalError
// when the loss returns a non-finite value.
StepResult rloo_step(const Graph& g, const Coloring& coloring, const FieldNetParams& params,
                     const FieldNetConfig& fcfg, const IsingConfig& icfg,
                     const TrainConfig& tcfg, const TaskLoss& loss, const SamplerFn& sampler,
                     std::uint64_t step_seed);

// Deterministic-penalty contribution alone: value and the per-node upstream
// that routes it through backward().
struct PenaltyTerm {
  double value = 0.0;
  Eigen::VectorXd upstream;
};
PenaltyTerm magnetization_penalty(const Eigen::VectorXd& field, double beta, double eta_target,
                                  double weight);

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step = 0;
};

// Standard adaptive-moment update with bias correction. Rejects non-finite
// gradients.
void adam_update(FieldNetParams& params, const GradientBundle& grad, AdamState& state,
                 const FieldNetConfig& fcfg, const TrainConfig& tcfg);

struct TrainInstance {
  const Graph* graph = nullptr;
  Coloring coloring;
  TaskLoss loss;
  std::string id;
};

struct EpochMetrics {
  int epoch = 0;
  std::string split;
  double mean_task_loss = 0.0;
  double mean_penalty = 0.0;
  double mean_sampling_fraction = 0.0;
};

// CSV schema: epoch,split,mean_task_loss,mean_penalty,mean_sampling_fraction
std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

struct TrainState {
  FieldNetParams params;
  AdamState adam;
  int next_epoch = 0;
};

struct TrainResult {
  FieldNetParams best_params;
  double best_val_loss = 0.0;
  int best_epoch = -1;
  TrainState final_state;
  std::vector<EpochMetrics> metrics;
};

// Per-instance loop: forward, K samples, RLOO + penalty gradient, Adam.
// Validation runs once per epoch with a single sample per instance; the best
// validation parameters are kept. With an empty validation set the training
// loss selects the checkpoint.
TrainResult train(const std::vector<TrainInstance>& train_set,
                  const std::vector<TrainInstance>& val_set, const FieldNetConfig& fcfg,
                  const IsingConfig& icfg, const TrainConfig& tcfg,
                  const SamplerFn& sampler = {},
                  const std::function<void(const EpochMetrics&)>& on_metrics = {},
                  std::optional<TrainState> resume = {});

// Mean task loss / fraction over a set, one seeded sample per instance.
EpochMetrics evaluate(const std::vector<TrainInstance>& set, const FieldNetParams& params,
                      const FieldNetConfig& fcfg, const IsingConfig& icfg,
                      const TrainConfig& tcfg, const SamplerFn& sampler, int epoch,
                      const std::string& split, std::uint64_t seed);

}  // namespace isg
