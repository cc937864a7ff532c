#include "isg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "isg/errors.hpp"
#include "isg/rng.hpp"

namespace isg {

namespace {

constexpr std::uint64_t kSampleTag = 0x73616d70;
constexpr std::uint64_t kShuffleTag = 0x73687566;
constexpr std::uint64_t kValTag = 0x76616c;

GradientBundle bundle_from_vector(const Eigen::VectorXd& flat, const FieldNetConfig& cfg) {
  return from_vector(flat, cfg);
}

}  // namespace

SamplerFn mh_sampler(int sweeps, int threads, bool double_beta_acceptance) {
  MhOptions opts;
  opts.threads = threads;
  opts.double_beta_acceptance = double_beta_acceptance;
  return [sweeps, opts](const Graph& g, const Coloring& c, const IsingParams& p,
                        std::uint64_t seed) { return mh_sample(g, c, p, sweeps, seed, opts); };
}

PenaltyTerm magnetization_penalty(const Eigen::VectorXd& field, double beta, double eta_target,
                                  double weight) {
  const Eigen::Index n = field.size();
  const Eigen::ArrayXd t = (beta * field.array()).tanh();
  const double eta_det = t.mean();
  PenaltyTerm term;
  term.value = weight * (eta_det - eta_target) * (eta_det - eta_target);
  term.upstream =
      (weight * 2.0 * (eta_det - eta_target) * beta / static_cast<double>(n)) * (1.0 - t.square());
  return term;
}

StepResult rloo_step(const Graph& g, const Coloring& coloring, const FieldNetParams& params,
                     const FieldNetConfig& fcfg, const IsingConfig& icfg,
                     const TrainConfig& tcfg, const TaskLoss& loss, const SamplerFn& sampler,
                     std::uint64_t step_seed) {
  if (tcfg.rloo_k < 2) {
    throw std::invalid_argument("rloo_step: need at least two samples");
  }
  ForwardCache cache;
  const Eigen::VectorXd field = forward(g, params, fcfg, &cache);

  IsingParams ip = make_params(icfg.beta, icfg.coupling, field);

  const int k = tcfg.rloo_k;
  std::vector<SpinState> samples;
  samples.reserve(static_cast<std::size_t>(k));
  StepResult out;
  out.report.losses.resize(static_cast<std::size_t>(k));
  double fraction_acc = 0.0;
  for (int s = 0; s < k; ++s) {
    samples.push_back(
        sampler(g, coloring, ip, rng::key(step_seed, kSampleTag, static_cast<std::uint64_t>(s))));
    double value = loss(samples.back());
    if (tcfg.stochastic_fraction_reg) {
      const double eta_sto = eta_stochastic(g, ip, samples.back());
      value += tcfg.penalty_weight * (eta_sto - tcfg.eta_target) * (eta_sto - tcfg.eta_target);
    }
    if (!std::isfinite(value)) {
      throw NumericalError("rloo_step: task loss returned a non-finite value for sample " +
                           std::to_string(s));
    }
    out.report.losses[static_cast<std::size_t>(s)] = value;
    fraction_acc += sampling_fraction(samples.back());
  }
  out.report.realized_fraction = fraction_acc / k;

  // (1/K) sum_k (l_k - mean_{j != k} l_j) * grad log p(x_k); grad log p(x_k)
  // routes through the field as beta * x_k, and the log-partition terms sum
  // to zero because the leave-one-out weights do.
  const double total =
      std::accumulate(out.report.losses.begin(), out.report.losses.end(), 0.0);
  Eigen::VectorXd task_upstream = Eigen::VectorXd::Zero(g.num_nodes);
  for (int s = 0; s < k; ++s) {
    const double value = out.report.losses[static_cast<std::size_t>(s)];
    const double baseline = (total - value) / (k - 1);
    const double weight = icfg.beta * (value - baseline) / k;
    task_upstream += weight * samples[static_cast<std::size_t>(s)].cast<double>();
  }
  GradientBundle task_grad = backward(params, fcfg, cache, task_upstream);
  out.report.task_grad_norm = to_vector(task_grad).norm();

  if (!tcfg.stochastic_fraction_reg && tcfg.penalty_weight != 0.0) {
    const PenaltyTerm penalty =
        magnetization_penalty(field, icfg.beta, tcfg.eta_target, tcfg.penalty_weight);
    out.report.penalty = penalty.value;
    GradientBundle penalty_grad = backward(params, fcfg, cache, penalty.upstream);
    out.report.penalty_grad_norm = to_vector(penalty_grad).norm();
    out.grad = bundle_from_vector(to_vector(task_grad) + to_vector(penalty_grad), fcfg);
  } else {
    out.grad = std::move(task_grad);
  }
  return out;
}

void adam_update(FieldNetParams& params, const GradientBundle& grad, AdamState& state,
                 const FieldNetConfig& fcfg, const TrainConfig& tcfg) {
  const Eigen::VectorXd g = to_vector(grad);
  if (!g.allFinite()) {
    throw NumericalError("adam_update: non-finite gradient");
  }
  if (state.first_moment.size() != g.size()) {
    state.first_moment = Eigen::VectorXd::Zero(g.size());
    state.second_moment = Eigen::VectorXd::Zero(g.size());
    state.step = 0;
  }
  ++state.step;
  state.first_moment = tcfg.adam_beta1 * state.first_moment + (1.0 - tcfg.adam_beta1) * g;
  state.second_moment =
      tcfg.adam_beta2 * state.second_moment + (1.0 - tcfg.adam_beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(tcfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(tcfg.adam_beta2, static_cast<double>(state.step));
  const Eigen::VectorXd update =
      (state.first_moment / c1).array() /
      ((state.second_moment / c2).array().sqrt() + tcfg.adam_epsilon);
  params = from_vector(to_vector(params) - tcfg.learning_rate * update, fcfg);
}

std::string metrics_csv_header() {
  return "epoch,split,mean_task_loss,mean_penalty,mean_sampling_fraction";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream out;
  out << m.epoch << ',' << m.split << ',' << m.mean_task_loss << ',' << m.mean_penalty << ','
      << m.mean_sampling_fraction;
  return out.str();
}

EpochMetrics evaluate(const std::vector<TrainInstance>& set, const FieldNetParams& params,
                      const FieldNetConfig& fcfg, const IsingConfig& icfg,
                      const TrainConfig& tcfg, const SamplerFn& sampler, int epoch,
                      const std::string& split, std::uint64_t seed) {
  EpochMetrics m;
  m.epoch = epoch;
  m.split = split;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const TrainInstance& inst = set[i];
    const Eigen::VectorXd field = forward(*inst.graph, params, fcfg);
    IsingParams ip = make_params(icfg.beta, icfg.coupling, field);
    const SpinState x =
        sampler(*inst.graph, inst.coloring, ip, rng::key(seed, kValTag, i));
    m.mean_task_loss += inst.loss(x);
    m.mean_penalty +=
        magnetization_penalty(field, icfg.beta, tcfg.eta_target, tcfg.penalty_weight).value;
    m.mean_sampling_fraction += sampling_fraction(x);
  }
  if (!set.empty()) {
    const double n = static_cast<double>(set.size());
    m.mean_task_loss /= n;
    m.mean_penalty /= n;
    m.mean_sampling_fraction /= n;
  }
  return m;
}

TrainResult train(const std::vector<TrainInstance>& train_set,
                  const std::vector<TrainInstance>& val_set, const FieldNetConfig& fcfg,
                  const IsingConfig& icfg, const TrainConfig& tcfg, const SamplerFn& sampler,
                  const std::function<void(const EpochMetrics&)>& on_metrics,
                  std::optional<TrainState> resume) {
  if (train_set.empty()) {
    throw std::invalid_argument("train: empty training set");
  }
  const SamplerFn sample_fn =
      sampler ? sampler : mh_sampler(tcfg.sweeps, 1, icfg.double_beta_acceptance);

  TrainResult result;
  TrainState state;
  if (resume) {
    state = std::move(*resume);
  } else {
    state.params = init_params(fcfg, tcfg.rng_seed);
  }
  result.best_params = state.params;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = state.next_epoch; epoch < tcfg.epochs; ++epoch) {
    // Deterministic per-epoch shuffle keyed off the root seed.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::uint64_t r =
          rng::key(tcfg.rng_seed, kShuffleTag, static_cast<std::uint64_t>(epoch), i);
      std::swap(order[i - 1], order[static_cast<std::size_t>(r % i)]);
    }

    EpochMetrics train_metrics;
    train_metrics.epoch = epoch;
    train_metrics.split = "train";
    GradientBundle accum = zero_like(state.params);
    int in_batch = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const TrainInstance& inst = train_set[order[step]];
      const std::uint64_t step_seed =
          rng::key(tcfg.rng_seed, static_cast<std::uint64_t>(epoch), step);
      StepResult sr = rloo_step(*inst.graph, inst.coloring, state.params, fcfg, icfg, tcfg,
                                inst.loss, sample_fn, step_seed);
      const double mean_loss =
          std::accumulate(sr.report.losses.begin(), sr.report.losses.end(), 0.0) /
          static_cast<double>(sr.report.losses.size());
      train_metrics.mean_task_loss += mean_loss;
      train_metrics.mean_penalty += sr.report.penalty;
      train_metrics.mean_sampling_fraction += sr.report.realized_fraction;

      accum = bundle_from_vector(to_vector(accum) + to_vector(sr.grad), fcfg);
      ++in_batch;
      if (in_batch == tcfg.batch_size || step + 1 == order.size()) {
        accum = bundle_from_vector(to_vector(accum) / in_batch, fcfg);
        adam_update(state.params, accum, state.adam, fcfg, tcfg);
        accum = zero_like(state.params);
        in_batch = 0;
      }
    }
    const double n_steps = static_cast<double>(order.size());
    train_metrics.mean_task_loss /= n_steps;
    train_metrics.mean_penalty /= n_steps;
    train_metrics.mean_sampling_fraction /= n_steps;
    result.metrics.push_back(train_metrics);
    if (on_metrics) {
      on_metrics(train_metrics);
    }

    const std::vector<TrainInstance>& selection_set = val_set.empty() ? train_set : val_set;
    EpochMetrics val_metrics =
        evaluate(selection_set, state.params, fcfg, icfg, tcfg, sample_fn, epoch,
                 val_set.empty() ? "train-as-val" : "val",
                 rng::key(tcfg.rng_seed, kValTag, static_cast<std::uint64_t>(epoch)));
    result.metrics.push_back(val_metrics);
    if (on_metrics) {
      on_metrics(val_metrics);
    }
    if (val_metrics.mean_task_loss < result.best_val_loss) {
      result.best_val_loss = val_metrics.mean_task_loss;
      result.best_epoch = epoch;
      result.best_params = state.params;
    }
    state.next_epoch = epoch + 1;
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace isg
