#include "isg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "isg/errors.hpp"

namespace isg {

namespace {

constexpr char kMagic[4] = {'I', 'S', 'N', 'G'};
constexpr std::uint32_t kVersion = 1;

// This writer assumes a little-endian host, which holds for every platform
// the project targets.
template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw DataError("checkpoint: truncated file");
  }
  return v;
}

}  // namespace

const ArrayBlob* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) {
      return &a;
    }
  }
  return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("checkpoint: cannot open for writing: " + path);
  }
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.num_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.hidden_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config.input_dim));
  put<std::uint8_t>(out, ckpt.config.weight_sharing ? 1 : 0);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.config.activation));
  put<double>(out, ckpt.config.alpha);
  put<double>(out, ckpt.config.theta_id);

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.dims.size()));
    std::uint64_t total = 1;
    for (std::uint64_t d : a.dims) {
      put<std::uint64_t>(out, d);
      total *= d;
    }
    if (total != a.data.size()) {
      throw std::invalid_argument("checkpoint: dims do not match payload for " + a.name);
    }
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) {
    throw DataError("checkpoint: write failed: " + path);
  }
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("checkpoint: cannot open: " + path);
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config.num_layers = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.hidden_dim = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.input_dim = static_cast<int>(get<std::uint32_t>(in));
  ckpt.config.weight_sharing = get<std::uint8_t>(in) != 0;
  ckpt.config.activation = static_cast<FieldNetConfig::Activation>(get<std::uint8_t>(in));
  ckpt.config.alpha = get<double>(in);
  ckpt.config.theta_id = get<double>(in);

  const auto count = get<std::uint32_t>(in);
  ckpt.arrays.resize(count);
  for (auto& a : ckpt.arrays) {
    const auto name_len = get<std::uint32_t>(in);
    a.name.resize(name_len);
    in.read(a.name.data(), name_len);
    const auto rank = get<std::uint32_t>(in);
    a.dims.resize(rank);
    std::uint64_t total = 1;
    for (auto& d : a.dims) {
      d = get<std::uint64_t>(in);
      total *= d;
    }
    a.data.resize(total);
    in.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) {
      throw DataError("checkpoint: truncated array " + a.name);
    }
  }
  return ckpt;
}

std::vector<ArrayBlob> params_to_blobs(const FieldNetParams& params) {
  std::vector<ArrayBlob> blobs;
  auto add = [&blobs](std::string name, std::vector<std::uint64_t> dims, const double* src,
                      std::size_t n) {
    ArrayBlob b;
    b.name = std::move(name);
    b.dims = std::move(dims);
    b.data.assign(src, src + n);
    blobs.push_back(std::move(b));
  };
  add("input_weight",
      {static_cast<std::uint64_t>(params.input_weight.rows()),
       static_cast<std::uint64_t>(params.input_weight.cols())},
      params.input_weight.data(), static_cast<std::size_t>(params.input_weight.size()));
  add("input_bias", {static_cast<std::uint64_t>(params.input_bias.size())},
      params.input_bias.data(), static_cast<std::size_t>(params.input_bias.size()));
  for (std::size_t i = 0; i < params.layer_weights.size(); ++i) {
    const auto& w = params.layer_weights[i];
    add("layer_weight_" + std::to_string(i),
        {static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())}, w.data(),
        static_cast<std::size_t>(w.size()));
  }
  add("output_weight", {static_cast<std::uint64_t>(params.output_weight.size())},
      params.output_weight.data(), static_cast<std::size_t>(params.output_weight.size()));
  add("output_bias", {1}, &params.output_bias, 1);
  return blobs;
}

FieldNetParams params_from_blobs(const Checkpoint& ckpt) {
  const FieldNetConfig& cfg = ckpt.config;
  validate_config(cfg);
  auto need = [&ckpt](const std::string& name) -> const ArrayBlob& {
    const ArrayBlob* b = ckpt.find(name);
    if (b == nullptr) {
      throw DataError("checkpoint: missing array " + name);
    }
    return *b;
  };
  FieldNetParams p;
  const auto& iw = need("input_weight");
  p.input_weight = Eigen::Map<const Eigen::MatrixXd>(
      iw.data.data(), static_cast<Eigen::Index>(iw.dims.at(0)),
      static_cast<Eigen::Index>(iw.dims.at(1)));
  const auto& ib = need("input_bias");
  p.input_bias = Eigen::Map<const Eigen::RowVectorXd>(
      ib.data.data(), static_cast<Eigen::Index>(ib.data.size()));
  const int n_mats = cfg.weight_sharing ? 1 : cfg.num_layers;
  p.layer_weights.resize(static_cast<std::size_t>(n_mats));
  for (int i = 0; i < n_mats; ++i) {
    const auto& w = need("layer_weight_" + std::to_string(i));
    p.layer_weights[static_cast<std::size_t>(i)] = Eigen::Map<const Eigen::MatrixXd>(
        w.data.data(), static_cast<Eigen::Index>(w.dims.at(0)),
        static_cast<Eigen::Index>(w.dims.at(1)));
  }
  const auto& ow = need("output_weight");
  p.output_weight = Eigen::Map<const Eigen::VectorXd>(
      ow.data.data(), static_cast<Eigen::Index>(ow.data.size()));
  p.output_bias = need("output_bias").data.at(0);
  return p;
}

}  // namespace isg
