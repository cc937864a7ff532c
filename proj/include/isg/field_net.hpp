#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

#include "isg/graph.hpp"

namespace isg {

// Field predictor h_theta: graph with node features -> one real per node.
// Residual graph-convolution stack: H0 = X W_in + b_in, then
//   H_l = relu( ((1-alpha) A_hat H_{l-1} + alpha H0) ((1-beta_l) I + beta_l W) )
// with A_hat the degree-normalized adjacency with self-loops and
// beta_l = ln(theta_id / l + 1). The penultimate node vectors are centered by
// subtracting their mean across nodes before the scalar output head.
struct FieldNetConfig {
  int num_layers = 4;
  int hidden_dim = 64;
  double alpha = 0.1;      // initial-residual strength, in [0, 1]
  double theta_id = 0.5;   // identity-map strength hyperparameter
  bool weight_sharing = true;
  int input_dim = 0;
  enum class Activation : std::uint8_t { Relu = 0 };
  Activation activation = Activation::Relu;
};

void validate_config(const FieldNetConfig& cfg);

// beta_l = ln(theta_id / layer + 1), layer >= 1
double identity_mix(const FieldNetConfig& cfg, int layer);

struct FieldNetParams {
  Eigen::MatrixXd input_weight;               // input_dim x hidden
  Eigen::RowVectorXd input_bias;              // hidden
  std::vector<Eigen::MatrixXd> layer_weights; // one matrix if shared, else one per layer
  Eigen::VectorXd output_weight;              // hidden
  double output_bias = 0.0;
};

// Shape-congruent with FieldNetParams; each member holds dL/d(member).
using GradientBundle = FieldNetParams;

// Glorot-uniform weights, zero biases, deterministic per seed.
FieldNetParams init_params(const FieldNetConfig& cfg, std::uint64_t seed);

// Symmetric degree-normalized adjacency with self-loops.
Eigen::SparseMatrix<double> normalized_adjacency(const Graph& g);

struct ForwardCache {
  Eigen::SparseMatrix<double> adjacency;
  Eigen::MatrixXd features;               // X, needed for the embed gradient
  Eigen::MatrixXd embedded;               // H0
  std::vector<Eigen::MatrixXd> combined;  // M_l = (1-alpha) A H_{l-1} + alpha H0
  std::vector<Eigen::MatrixXd> activated; // H_l
  Eigen::MatrixXd centered;               // penultimate, mean-centered
};

// Returns h (one value per node); fills the cache when given one.
Eigen::VectorXd forward(const Graph& g, const FieldNetParams& params,
                        const FieldNetConfig& cfg, ForwardCache* cache = nullptr);

// Exact gradients of sum_i upstream_i * h_i with respect to every parameter,
// by reverse-mode chain rule through the cached forward state.
GradientBundle backward(const FieldNetParams& params, const FieldNetConfig& cfg,
                        const ForwardCache& cache, const Eigen::VectorXd& upstream);

GradientBundle zero_like(const FieldNetParams& params);

// Flattened views in a fixed order (input_weight, input_bias, layer weights,
// output_weight, output_bias); used by the optimizer and the checkpoints.
Eigen::VectorXd to_vector(const FieldNetParams& params);
FieldNetParams from_vector(const Eigen::VectorXd& flat, const FieldNetConfig& cfg);
Eigen::Index parameter_count(const FieldNetConfig& cfg);

}  // namespace isg
