#include "isg/field_net.hpp"

#include <cmath>
#include <stdexcept>

#include "isg/rng.hpp"

namespace isg {

namespace {

int num_weight_matrices(const FieldNetConfig& cfg) {
  return cfg.weight_sharing ? 1 : cfg.num_layers;
}

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                       std::uint64_t tag) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::uint64_t e = static_cast<std::uint64_t>(c * rows + r);
      m(r, c) = limit * (2.0 * rng::uniform(seed, tag, e) - 1.0);
    }
  }
  return m;
}

}  // namespace

void validate_config(const FieldNetConfig& cfg) {
  if (cfg.num_layers < 1 || cfg.hidden_dim < 1 || cfg.input_dim < 1) {
    throw std::invalid_argument("field net: layers, hidden_dim, input_dim must be positive");
  }
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) {
    throw std::invalid_argument("field net: alpha must lie in [0, 1]");
  }
  for (int l = 1; l <= cfg.num_layers; ++l) {
    const double b = identity_mix(cfg, l);
    if (!(b > 0.0 && b <= 1.0)) {
      throw std::invalid_argument("field net: identity mix out of (0, 1]; bad theta_id");
    }
  }
}

double identity_mix(const FieldNetConfig& cfg, int layer) {
  return std::log(cfg.theta_id / layer + 1.0);
}

FieldNetParams init_params(const FieldNetConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  FieldNetParams p;
  p.input_weight = glorot(cfg.input_dim, cfg.hidden_dim, seed, 0);
  p.input_bias = Eigen::RowVectorXd::Zero(cfg.hidden_dim);
  p.layer_weights.resize(static_cast<std::size_t>(num_weight_matrices(cfg)));
  for (std::size_t w = 0; w < p.layer_weights.size(); ++w) {
    p.layer_weights[w] = glorot(cfg.hidden_dim, cfg.hidden_dim, seed, 1 + w);
  }
  p.output_weight = glorot(cfg.hidden_dim, 1, seed, 1 + p.layer_weights.size()).col(0);
  p.output_bias = 0.0;
  return p;
}

Eigen::SparseMatrix<double> normalized_adjacency(const Graph& g) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.neighbor_ids.size() + static_cast<std::size_t>(g.num_nodes));
  Eigen::VectorXd inv_sqrt_deg(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);
  }
  for (int i = 0; i < g.num_nodes; ++i) {
    trips.emplace_back(i, i, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    for (int j : g.neighbors(i)) {
      trips.emplace_back(i, j, inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
  }
  Eigen::SparseMatrix<double> a(g.num_nodes, g.num_nodes);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Eigen::VectorXd forward(const Graph& g, const FieldNetParams& params,
                        const FieldNetConfig& cfg, ForwardCache* cache) {
  validate_config(cfg);
  if (g.node_features.size() == 0) {
    throw std::invalid_argument("field net: graph has no node features");
  }
  if (g.node_features.cols() != cfg.input_dim) {
    throw std::invalid_argument("field net: feature dim != config input_dim");
  }
  if (params.input_weight.rows() != cfg.input_dim ||
      params.input_weight.cols() != cfg.hidden_dim ||
      static_cast<int>(params.layer_weights.size()) != num_weight_matrices(cfg)) {
    throw std::invalid_argument("field net: parameter shapes do not match config");
  }

  ForwardCache local;
  ForwardCache& cc = cache ? *cache : local;
  cc.adjacency = normalized_adjacency(g);
  cc.features = g.node_features;
  cc.embedded = (g.node_features * params.input_weight).rowwise() + params.input_bias;
  cc.combined.clear();
  cc.activated.clear();
  cc.combined.reserve(static_cast<std::size_t>(cfg.num_layers));
  cc.activated.reserve(static_cast<std::size_t>(cfg.num_layers));

  Eigen::MatrixXd h = cc.embedded;
  for (int l = 1; l <= cfg.num_layers; ++l) {
    const double beta_l = identity_mix(cfg, l);
    const Eigen::MatrixXd& w =
        params.layer_weights[cfg.weight_sharing ? 0 : static_cast<std::size_t>(l - 1)];
    Eigen::MatrixXd combined = (1.0 - cfg.alpha) * (cc.adjacency * h) + cfg.alpha * cc.embedded;
    h = ((1.0 - beta_l) * combined + beta_l * (combined * w)).cwiseMax(0.0);
    cc.combined.push_back(std::move(combined));
    cc.activated.push_back(h);
  }

  cc.centered = h.rowwise() - h.colwise().mean();
  return (cc.centered * params.output_weight).array() + params.output_bias;
}

GradientBundle backward(const FieldNetParams& params, const FieldNetConfig& cfg,
                        const ForwardCache& cache, const Eigen::VectorXd& upstream) {
  if (static_cast<int>(cache.activated.size()) != cfg.num_layers || cache.embedded.size() == 0) {
    throw std::invalid_argument("field net backward: cache does not match config");
  }
  if (upstream.size() != cache.embedded.rows()) {
    throw std::invalid_argument("field net backward: upstream length != num_nodes");
  }

  GradientBundle grad = zero_like(params);
  grad.output_weight = cache.centered.transpose() * upstream;
  grad.output_bias = upstream.sum();

  // Mean-centering is a symmetric linear map, so it applies unchanged to the
  // gradient flowing back through it.
  Eigen::MatrixXd d_h = upstream * params.output_weight.transpose();
  d_h.rowwise() -= d_h.colwise().mean().eval();

  Eigen::MatrixXd d_h0 = Eigen::MatrixXd::Zero(cache.embedded.rows(), cache.embedded.cols());
  for (int l = cfg.num_layers; l >= 1; --l) {
    const double beta_l = identity_mix(cfg, l);
    const std::size_t wi = cfg.weight_sharing ? 0 : static_cast<std::size_t>(l - 1);
    const Eigen::MatrixXd& w = params.layer_weights[wi];
    const Eigen::MatrixXd& combined = cache.combined[static_cast<std::size_t>(l - 1)];
    const Eigen::MatrixXd& act = cache.activated[static_cast<std::size_t>(l - 1)];

    const Eigen::MatrixXd d_pre =
        ((act.array() > 0.0).cast<double>() * d_h.array()).matrix();
    grad.layer_weights[wi] += beta_l * (combined.transpose() * d_pre);
    const Eigen::MatrixXd d_combined =
        (1.0 - beta_l) * d_pre + beta_l * (d_pre * w.transpose());
    d_h0 += cfg.alpha * d_combined;
    // The normalized adjacency is symmetric.
    d_h = (1.0 - cfg.alpha) * (cache.adjacency * d_combined);
  }
  d_h0 += d_h;

  grad.input_weight = cache.features.transpose() * d_h0;
  grad.input_bias = d_h0.colwise().sum();
  return grad;
}

GradientBundle zero_like(const FieldNetParams& params) {
  GradientBundle g;
  g.input_weight = Eigen::MatrixXd::Zero(params.input_weight.rows(), params.input_weight.cols());
  g.input_bias = Eigen::RowVectorXd::Zero(params.input_bias.cols());
  g.layer_weights.resize(params.layer_weights.size());
  for (std::size_t i = 0; i < params.layer_weights.size(); ++i) {
    g.layer_weights[i] = Eigen::MatrixXd::Zero(params.layer_weights[i].rows(),
                                               params.layer_weights[i].cols());
  }
  g.output_weight = Eigen::VectorXd::Zero(params.output_weight.size());
  g.output_bias = 0.0;
  return g;
}

Eigen::Index parameter_count(const FieldNetConfig& cfg) {
  const Eigen::Index d = cfg.input_dim;
  const Eigen::Index h = cfg.hidden_dim;
  return d * h + h + num_weight_matrices(cfg) * h * h + h + 1;
}

Eigen::VectorXd to_vector(const FieldNetParams& params) {
  Eigen::Index total = params.input_weight.size() + params.input_bias.size() +
                       params.output_weight.size() + 1;
  for (const auto& w : params.layer_weights) {
    total += w.size();
  }
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  auto put = [&flat, &at](const double* data, Eigen::Index n) {
    flat.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(data, n);
    at += n;
  };
  put(params.input_weight.data(), params.input_weight.size());
  put(params.input_bias.data(), params.input_bias.size());
  for (const auto& w : params.layer_weights) {
    put(w.data(), w.size());
  }
  put(params.output_weight.data(), params.output_weight.size());
  flat[at++] = params.output_bias;
  return flat;
}

FieldNetParams from_vector(const Eigen::VectorXd& flat, const FieldNetConfig& cfg) {
  validate_config(cfg);
  if (flat.size() != parameter_count(cfg)) {
    throw std::invalid_argument("from_vector: length does not match config");
  }
  FieldNetParams p;
  Eigen::Index at = 0;
  auto take = [&flat, &at](Eigen::Index n) {
    Eigen::VectorXd seg = flat.segment(at, n);
    at += n;
    return seg;
  };
  p.input_weight = Eigen::Map<const Eigen::MatrixXd>(take(cfg.input_dim * cfg.hidden_dim).data(),
                                                     cfg.input_dim, cfg.hidden_dim);
  p.input_bias = take(cfg.hidden_dim).transpose();
  p.layer_weights.resize(static_cast<std::size_t>(num_weight_matrices(cfg)));
  for (auto& w : p.layer_weights) {
    w = Eigen::Map<const Eigen::MatrixXd>(take(cfg.hidden_dim * cfg.hidden_dim).data(),
                                          cfg.hidden_dim, cfg.hidden_dim);
  }
  p.output_weight = take(cfg.hidden_dim);
  p.output_bias = flat[at];
  return p;
}

}  // namespace isg
