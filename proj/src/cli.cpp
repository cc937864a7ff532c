#include "isg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "isg/checkpoint.hpp"
#include "isg/config.hpp"
#include "isg/errors.hpp"
#include "isg/mesh.hpp"
#include "isg/parallel.hpp"
#include "isg/rng.hpp"
#include "isg/sai.hpp"
#include "isg/trainer.hpp"

namespace fs = std::filesystem;

namespace isg {

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> list_files(const std::string& dir,
                                    const std::vector<std::string>& extensions) {
  if (!fs::is_directory(dir)) {
    throw DataError("not a directory: " + dir);
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("no data files in " + dir);
  }
  return files;
}

// Deterministic 60/20/20 split of indices by seeded shuffle.
struct Split {
  std::vector<std::size_t> train, val, test;
};

Split split_indices(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> ids(count);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = count; i > 1; --i) {
    const std::uint64_t r = rng::key(seed, 0x73706c6974, i);
    std::swap(ids[i - 1], ids[static_cast<std::size_t>(r % i)]);
  }
  Split s;
  const std::size_t n_train = (count * 6) / 10;
  const std::size_t n_val = (count * 2) / 10;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return s;
}

const std::vector<std::size_t>& pick_split(const Split& s, const std::string& name,
                                           std::vector<std::size_t>& all) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  if (name == "all") return all;
  throw ConfigError("unknown split: " + name);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  return out;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string task;
  std::string variant;
  int count = 10;
  int n = 30;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string input;
  int window = 30;
  int subdiv = 4;
  int segments = 19;
};

void cmd_gen_data(const GenDataArgs& a) {
  fs::create_directories(a.out_dir);
  if (a.task == "sai") {
    std::vector<sai::SparseMatrixD> mats;
    if (a.variant == "synthetic") {
      mats = sai::gen_dataset1(a.count, a.n, a.seed);
    } else if (a.variant == "suitesparse") {
      if (a.input.empty()) {
        throw ConfigError("gen-data suitesparse: --in is required");
      }
      mats = sai::extract_submatrices(sai::read_matrix_market_file(a.input), a.window);
    } else {
      throw ConfigError("gen-data sai: variant must be synthetic or suitesparse");
    }
    auto manifest = open_out((fs::path(a.out_dir) / "manifest.csv").string());
    manifest << "file,n,nnz,sparsity,det\n";
    for (std::size_t i = 0; i < mats.size(); ++i) {
      std::ostringstream name;
      name << "matrix_" << std::setw(4) << std::setfill('0') << i << ".mtx";
      sai::write_matrix_market_file((fs::path(a.out_dir) / name.str()).string(), mats[i]);
      manifest << name.str() << ',' << mats[i].rows() << ',' << mats[i].nonZeros() << ','
               << sai::sparsity(mats[i]) << ',' << sai::determinant(mats[i]) << '\n';
    }
    log_line("# wrote " + std::to_string(mats.size()) + " matrices to " + a.out_dir);
  } else if (a.task == "mesh") {
    if (!a.variant.empty() && a.variant != "procedural") {
      throw ConfigError("gen-data mesh: variant must be procedural");
    }
    auto manifest = open_out((fs::path(a.out_dir) / "manifest.csv").string());
    manifest << "file,vertices,faces\n";
    for (int i = 0; i < a.count; ++i) {
      const std::uint64_t mseed = rng::key(a.seed, static_cast<std::uint64_t>(i));
      mesh::TriMesh m;
      if (i % 2 == 0) {
        const int bumps = 4 + static_cast<int>(rng::key(mseed, 1) % 7);
        const double amplitude = 0.08 + 0.12 * rng::uniform(mseed, 2);
        m = mesh::make_bumpy_icosphere(a.subdiv, bumps, amplitude, mseed);
      } else {
        Eigen::Vector3d half;
        for (int k = 0; k < 3; ++k) {
          half[k] = 0.6 + 0.8 * rng::uniform(mseed, 3 + static_cast<std::uint64_t>(k));
        }
        const double power = 4.0 + 4.0 * rng::uniform(mseed, 6);
        m = mesh::make_rounded_box(a.segments, half, power);
      }
      std::ostringstream name;
      name << "mesh_" << std::setw(4) << std::setfill('0') << i << ".off";
      mesh::save_mesh((fs::path(a.out_dir) / name.str()).string(), m);
      manifest << name.str() << ',' << m.num_vertices() << ',' << m.num_faces() << '\n';
    }
    log_line("# wrote " + std::to_string(a.count) + " meshes to " + a.out_dir);
  } else {
    throw ConfigError("gen-data: task must be sai or mesh");
  }
}

// ---- instance assembly ----

struct SaiDataset {
  std::vector<std::string> ids;
  std::vector<sai::SparseMatrixD> matrices;
  std::vector<sai::PositionGraph> position_graphs;
  std::vector<Coloring> colorings;
};

SaiDataset load_sai(const std::vector<std::string>& files, const ExperimentConfig::Task& task) {
  SaiDataset d;
  d.ids.reserve(files.size());
  d.matrices.reserve(files.size());
  d.position_graphs.reserve(files.size());
  d.colorings.reserve(files.size());
  for (const auto& f : files) {
    d.ids.push_back(stem_of(f));
    d.matrices.push_back(sai::read_matrix_market_file(f));
    d.position_graphs.push_back(
        sai::build_position_graph(d.matrices.back(), task.sai_mode, task.sai_dim_cap));
    d.colorings.push_back(greedy_color(d.position_graphs.back().graph));
  }
  return d;
}

std::vector<TrainInstance> sai_instances(const SaiDataset& d,
                                         const std::vector<std::size_t>& ids,
                                         const sai::PatternOptions& opts, int threads) {
  std::vector<TrainInstance> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) {
    TrainInstance inst;
    inst.graph = &d.position_graphs[i].graph;
    inst.coloring = d.colorings[i];
    const auto& a = d.matrices[i];
    const auto& pg = d.position_graphs[i];
    inst.loss = [&a, &pg, opts, threads](const SpinState& x) {
      return sai::frobenius_loss(a, sai::solve_columns(a, sai::pattern_from_state(pg, x, opts),
                                                       threads));
    };
    inst.id = d.ids[i];
    out.push_back(std::move(inst));
  }
  return out;
}

struct MeshDataset {
  std::vector<std::string> ids;
  std::vector<mesh::TriMesh> meshes;
  std::vector<Graph> feature_graphs;
  std::vector<Coloring> colorings;
};

MeshDataset load_meshes(const std::vector<std::string>& files) {
  MeshDataset d;
  d.ids.reserve(files.size());
  d.meshes.reserve(files.size());
  d.feature_graphs.reserve(files.size());
  d.colorings.reserve(files.size());
  for (const auto& f : files) {
    d.ids.push_back(stem_of(f));
    d.meshes.push_back(mesh::load_mesh(f));
    d.feature_graphs.push_back(
        mesh::feature_graph(d.meshes.back(), mesh::cot_laplacian_curvature(d.meshes.back())));
    d.colorings.push_back(greedy_color(d.feature_graphs.back()));
  }
  return d;
}

std::vector<TrainInstance> mesh_instances(const MeshDataset& d,
                                          const std::vector<std::size_t>& ids, int threads) {
  std::vector<TrainInstance> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) {
    TrainInstance inst;
    inst.graph = &d.feature_graphs[i];
    inst.coloring = d.colorings[i];
    inst.loss = mesh::make_loss(d.meshes[i], threads);
    inst.id = d.ids[i];
    out.push_back(std::move(inst));
  }
  return out;
}

// ---- train ----

void save_train_state(const std::string& path, const FieldNetConfig& cfg,
                      const TrainState& state) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.arrays = params_to_blobs(state.params);
  auto add_vec = [&ckpt](const std::string& name, const Eigen::VectorXd& v) {
    ArrayBlob b;
    b.name = name;
    b.dims = {static_cast<std::uint64_t>(v.size())};
    b.data.assign(v.data(), v.data() + v.size());
    ckpt.arrays.push_back(std::move(b));
  };
  add_vec("adam_m", state.adam.first_moment);
  add_vec("adam_v", state.adam.second_moment);
  add_vec("adam_step", Eigen::VectorXd::Constant(1, static_cast<double>(state.adam.step)));
  add_vec("epoch", Eigen::VectorXd::Constant(1, static_cast<double>(state.next_epoch)));
  write_checkpoint(path, ckpt);
}

TrainState load_train_state(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  TrainState state;
  state.params = params_from_blobs(ckpt);
  auto vec = [&ckpt](const std::string& name) {
    const ArrayBlob* b = ckpt.find(name);
    if (b == nullptr) {
      throw DataError("checkpoint lacks " + name + "; not a resumable state");
    }
    return Eigen::Map<const Eigen::VectorXd>(b->data.data(),
                                             static_cast<Eigen::Index>(b->data.size()))
        .eval();
  };
  state.adam.first_moment = vec("adam_m");
  state.adam.second_moment = vec("adam_v");
  state.adam.step = static_cast<long>(vec("adam_step")[0]);
  state.next_epoch = static_cast<int>(vec("epoch")[0]);
  return state;
}

void cmd_train(const std::string& config_path, const std::string& out_override,
               const std::string& resume_path, int epochs_override, int threads) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) {
    cfg.io.out_dir = out_override;
  }
  if (epochs_override >= 0) {
    cfg.train.epochs = epochs_override;
  }
  if (cfg.io.out_dir.empty()) {
    throw ConfigError("train: io.out (or --out) is required");
  }
  if (cfg.io.data_dir.empty()) {
    throw ConfigError("train: io.data is required");
  }
  cfg.model.input_dim = 3;  // both tasks feed three features per node
  log_line("# isingsub " + std::string(kVersion));
  std::cerr << resolved_config(cfg);

  fs::create_directories(cfg.io.out_dir);
  auto metrics_file = open_out((fs::path(cfg.io.out_dir) / "metrics.csv").string());
  metrics_file << metrics_csv_header() << "\n";
  std::cout << metrics_csv_header() << "\n";
  const auto on_metrics = [&metrics_file](const EpochMetrics& m) {
    const std::string row = metrics_csv_row(m);
    metrics_file << row << "\n";
    metrics_file.flush();
    std::cout << row << "\n";
  };

  std::optional<TrainState> resume;
  if (!resume_path.empty()) {
    resume = load_train_state(resume_path);
    log_line("# resuming from epoch " + std::to_string(resume->next_epoch));
  }

  TrainResult result;
  const SamplerFn sampler =
      mh_sampler(cfg.train.sweeps, threads, cfg.ising.double_beta_acceptance);

  // Keep the dataset storage alive for the duration of training; instances
  // hold references into it.
  if (cfg.task.name == "sai") {
    const auto files = list_files(cfg.io.data_dir, {".mtx"});
    const Split split = split_indices(files.size(), cfg.io.seed);
    const SaiDataset data = load_sai(files, cfg.task);
    sai::PatternOptions popts{cfg.task.sai_symmetrize, cfg.task.sai_force_diagonal};
    const auto train_set = sai_instances(data, split.train, popts, threads);
    const auto val_set = sai_instances(data, split.val, popts, threads);
    log_line("# sai dataset: " + std::to_string(files.size()) + " matrices (" +
             std::to_string(train_set.size()) + " train / " + std::to_string(val_set.size()) +
             " val)");
    result = train(train_set, val_set, cfg.model, cfg.ising, cfg.train, sampler, on_metrics,
                   std::move(resume));
  } else {
    const auto files = list_files(cfg.io.data_dir, {".off", ".obj"});
    const Split split = split_indices(files.size(), cfg.io.seed);
    const MeshDataset data = load_meshes(files);
    const auto train_set = mesh_instances(data, split.train, threads);
    const auto val_set = mesh_instances(data, split.val, threads);
    log_line("# mesh dataset: " + std::to_string(files.size()) + " meshes (" +
             std::to_string(train_set.size()) + " train / " + std::to_string(val_set.size()) +
             " val)");
    result = train(train_set, val_set, cfg.model, cfg.ising, cfg.train, sampler, on_metrics,
                   std::move(resume));
  }

  Checkpoint best;
  best.config = cfg.model;
  best.arrays = params_to_blobs(result.best_params);
  const std::string ckpt_path = (fs::path(cfg.io.out_dir) / "checkpoint.isng").string();
  write_checkpoint(ckpt_path, best);
  save_train_state((fs::path(cfg.io.out_dir) / "last.isng").string(), cfg.model,
                   result.final_state);
  log_line("# checkpoint: " + ckpt_path + " (best epoch " + std::to_string(result.best_epoch) +
           ", val loss " + std::to_string(result.best_val_loss) + ")");
}

// ---- eval ----

struct EvalArgs {
  std::string task;
  std::string ckpt;
  std::string data_dir;
  std::string baselines;  // comma-separated
  std::string out;
  std::string split = "all";
  std::uint64_t seed = 1;
  int sweeps = -1;  // default per task
  double beta = 1.0;
  double coupling = 0.0;  // 0 -> default per task
  std::string mode = "a2";
};

std::vector<std::string> parse_methods(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

void cmd_eval(const EvalArgs& a, int threads) {
  if (a.task != "sai" && a.task != "mesh") {
    throw ConfigError("eval: task must be sai or mesh");
  }
  const Checkpoint ckpt = read_checkpoint(a.ckpt);
  const FieldNetParams params = params_from_blobs(ckpt);
  const FieldNetConfig& fcfg = ckpt.config;
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file = open_out(a.out);
    out = &file;
  }
  log_line("# isingsub " + std::string(kVersion) + " eval task=" + a.task +
           " split=" + a.split + " seed=" + std::to_string(a.seed));

  if (a.task == "sai") {
    IsingConfig icfg;
    icfg.beta = a.beta;
    icfg.coupling = a.coupling == 0.0 ? -0.4 : a.coupling;
    const int sweeps = a.sweeps > 0 ? a.sweeps : 3;
    const auto files = list_files(a.data_dir, {".mtx"});
    const Split split = split_indices(files.size(), a.seed);
    std::vector<std::size_t> all(files.size());
    std::iota(all.begin(), all.end(), 0);
    const auto& ids = pick_split(split, a.split, all);
    ExperimentConfig::Task task;
    task.sai_mode = a.mode == "full" ? sai::PatternMode::Full : sai::PatternMode::PatternOfASquared;
    std::vector<std::string> selected;
    selected.reserve(ids.size());
    for (std::size_t i : ids) {
      selected.push_back(files[i]);
    }
    const SaiDataset data = load_sai(selected, task);

    *out << "matrix_id,method,frobenius_loss,fraction\n";
    // First pass: the model. Baselines are then matched to its mean fraction.
    std::vector<double> model_loss(data.ids.size());
    std::vector<double> model_fraction(data.ids.size());
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      const auto& pg = data.position_graphs[i];
      const Eigen::VectorXd field = forward(pg.graph, params, fcfg);
      IsingParams ip = make_params(icfg.beta, icfg.coupling, field);
      MhOptions opts;
      opts.threads = threads;
      const SpinState x = mh_sample(pg.graph, data.colorings[i], ip, sweeps,
                                    rng::key(a.seed, 0x6576616c, i), opts);
      const auto pattern = sai::pattern_from_state(pg, x);
      model_loss[i] = sai::frobenius_loss(data.matrices[i],
                                          sai::solve_columns(data.matrices[i], pattern, threads));
      model_fraction[i] = sampling_fraction(x);
      *out << data.ids[i] << ",ising+mag," << model_loss[i] << ',' << model_fraction[i] << "\n";
    }
    const double mean_fraction =
        std::accumulate(model_fraction.begin(), model_fraction.end(), 0.0) /
        static_cast<double>(model_fraction.size());
    for (const std::string& method : parse_methods(a.baselines)) {
      for (std::size_t i = 0; i < data.ids.size(); ++i) {
        const auto scores =
            sai::baselines(data.matrices[i], data.position_graphs[i], mean_fraction, icfg,
                           sweeps, rng::key(a.seed, 0x62617365, i), {method});
        *out << data.ids[i] << ',' << method << ',' << scores[0].loss << ','
             << scores[0].fraction << "\n";
      }
    }
  } else if (a.task == "mesh") {
    IsingConfig icfg;
    icfg.beta = a.beta;
    icfg.coupling = a.coupling == 0.0 ? -1.0 : a.coupling;
    const int sweeps = a.sweeps > 0 ? a.sweeps : 10;
    const auto files = list_files(a.data_dir, {".off", ".obj"});
    const Split split = split_indices(files.size(), a.seed);
    std::vector<std::size_t> all(files.size());
    std::iota(all.begin(), all.end(), 0);
    const auto& ids = pick_split(split, a.split, all);

    *out << "mesh_id,method,point_to_mesh_dist,kept_fraction,seconds\n";
    std::vector<double> fractions;
    std::vector<mesh::TriMesh> meshes;
    std::vector<std::string> mesh_ids;
    for (std::size_t i : ids) {
      meshes.push_back(mesh::load_mesh(files[i]));
      mesh_ids.push_back(stem_of(files[i]));
    }
    for (std::size_t k = 0; k < meshes.size(); ++k) {
      const auto [cm, metrics] = mesh::sparsify_learned(meshes[k], params, fcfg, icfg, sweeps,
                                                        rng::key(a.seed, 0x6576616c, k), threads);
      fractions.push_back(metrics.kept_fraction);
      *out << mesh_ids[k] << ",ising+mag," << metrics.point_to_mesh << ','
           << metrics.kept_fraction << ',' << metrics.seconds << "\n";
    }
    const double mean_fraction = fractions.empty()
                                     ? 0.5
                                     : std::accumulate(fractions.begin(), fractions.end(), 0.0) /
                                           static_cast<double>(fractions.size());
    for (const std::string& method : parse_methods(a.baselines)) {
      const mesh::Baseline b = mesh::baseline_from_name(method);
      for (std::size_t k = 0; k < meshes.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto feats = mesh::cot_laplacian_curvature(meshes[k]);
        const SpinState keep = mesh::baseline_sample(meshes[k], feats, mean_fraction, b,
                                                     rng::key(a.seed, 0x62617365, k), sweeps);
        const auto cm = mesh::collapse_to_coarse(meshes[k], keep);
        const double dist = mesh::point_to_mesh_distance(meshes[k].vertices, cm.mesh, threads);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        *out << mesh_ids[k] << ',' << method << ',' << dist << ','
             << sampling_fraction(keep) << ',' << secs << "\n";
      }
    }
  } else {
    throw ConfigError("eval: task must be sai or mesh");
  }
}

// ---- sample / trace ----

struct SampleArgs {
  std::string edges;
  std::string mesh_path;
  int nodes = 0;
  double beta = 1.0;
  double coupling = 1.0;
  int sweeps = 10;
  int replicas = 16;
  std::uint64_t seed = 1;
  std::string out;
  bool double_beta = false;
};

Graph sample_graph(const SampleArgs& a) {
  if (!a.mesh_path.empty()) {
    return mesh::load_mesh(a.mesh_path).edge_graph;
  }
  if (a.edges.empty()) {
    throw ConfigError("expected --edges or --mesh");
  }
  return read_edge_list_graph(a.edges, a.nodes);
}

void cmd_sample(const SampleArgs& a, int threads) {
  const Graph g = sample_graph(a);
  log_line("# sample: " + std::to_string(g.num_nodes) + " nodes, beta=" + std::to_string(a.beta) +
           " J=" + std::to_string(a.coupling) + " T=" + std::to_string(a.sweeps) +
           " seed=" + std::to_string(a.seed));
  IsingParams p = make_params(a.beta, a.coupling, Eigen::VectorXd::Zero(g.num_nodes));
  MhOptions opts;
  opts.threads = threads;
  opts.double_beta_acceptance = a.double_beta;
  const SpinState x = mh_sample(g, greedy_color(g), p, a.sweeps, a.seed, opts);
  if (a.out.empty()) {
    std::cout << format_spins(x) << "\n";
  } else {
    open_out(a.out) << format_spins(x) << "\n";
  }
}

void cmd_trace(const SampleArgs& a, int threads) {
  const Graph g = sample_graph(a);
  log_line("# trace: " + std::to_string(g.num_nodes) + " nodes, " +
           std::to_string(a.replicas) + " replicas");
  IsingParams p = make_params(a.beta, a.coupling, Eigen::VectorXd::Zero(g.num_nodes));
  MhOptions opts;
  opts.threads = threads;
  opts.double_beta_acceptance = a.double_beta;
  const EnergyTrace trace =
      energy_trace(g, greedy_color(g), p, a.sweeps, a.replicas, a.seed, opts);
  if (a.out.empty()) {
    write_energy_trace_csv(std::cout, trace);
  } else {
    auto out = open_out(a.out);
    write_energy_trace_csv(out, trace);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Graph subsampling by sampling a learned Ising model"};
  app.set_version_flag("--version", kVersion);
  int threads = hardware_threads();
  app.add_option("--threads", threads, "worker threads (default: available cores)");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate or extract datasets");
  gen_cmd->add_option("--task", gen.task, "sai or mesh")->required();
  gen_cmd->add_option("--variant", gen.variant, "synthetic | suitesparse | procedural");
  gen_cmd->add_option("--count", gen.count, "number of instances");
  gen_cmd->add_option("--n", gen.n, "matrix dimension (sai synthetic)");
  gen_cmd->add_option("--seed", gen.seed, "root seed");
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--in", gen.input, "source matrix file (sai suitesparse)");
  gen_cmd->add_option("--window", gen.window, "submatrix window size");
  gen_cmd->add_option("--subdiv", gen.subdiv, "icosphere subdivisions (mesh)");
  gen_cmd->add_option("--segments", gen.segments, "box segments per edge (mesh)");

  std::string train_config, train_out, train_resume;
  int train_epochs = -1;
  auto* train_cmd = app.add_subcommand("train", "train the field network");
  train_cmd->add_option("--config", train_config, "experiment config file")->required();
  train_cmd->add_option("--out", train_out, "output directory (overrides io.out)");
  train_cmd->add_option("--resume", train_resume, "resume from a last.isng state");
  train_cmd->add_option("--epochs", train_epochs, "override train.epochs");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against baselines");
  eval_cmd->add_option("--task", eval.task, "sai or mesh")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data_dir, "data directory")->required();
  eval_cmd->add_option("--baselines", eval.baselines,
                       "comma list: ising,random,only-a | random,fps,spectral,ising");
  eval_cmd->add_option("--out", eval.out, "metrics CSV path (default stdout)");
  eval_cmd->add_option("--split", eval.split, "all | train | val | test");
  eval_cmd->add_option("--seed", eval.seed, "root seed (split + draws)");
  eval_cmd->add_option("--sweeps", eval.sweeps, "MCMC sweeps per sample");
  eval_cmd->add_option("--beta", eval.beta, "inverse temperature");
  eval_cmd->add_option("--J", eval.coupling, "coupling (default: task-specific)");
  eval_cmd->add_option("--mode", eval.mode, "sai a priori pattern: a2 | full");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "draw one configuration and dump it");
  sample_cmd->add_option("--edges", sample.edges, "edge-list file");
  sample_cmd->add_option("--mesh", sample.mesh_path, "mesh file (uses its edge graph)");
  sample_cmd->add_option("--nodes", sample.nodes, "node-count hint for the edge list");
  sample_cmd->add_option("--beta", sample.beta, "inverse temperature");
  sample_cmd->add_option("--J", sample.coupling, "coupling");
  sample_cmd->add_option("--T", sample.sweeps, "sweeps");
  sample_cmd->add_option("--seed", sample.seed, "seed");
  sample_cmd->add_option("--out", sample.out, "output file (default stdout)");
  sample_cmd->add_flag("--alg1-double-beta", sample.double_beta,
                       "accept with exp(-2 beta dE)");

  SampleArgs trace;
  auto* trace_cmd = app.add_subcommand("trace", "energy-vs-sweep CSV across replicas");
  trace_cmd->add_option("--edges", trace.edges, "edge-list file");
  trace_cmd->add_option("--mesh", trace.mesh_path, "mesh file (uses its edge graph)");
  trace_cmd->add_option("--nodes", trace.nodes, "node-count hint for the edge list");
  trace_cmd->add_option("--beta", trace.beta, "inverse temperature");
  trace_cmd->add_option("--J", trace.coupling, "coupling");
  trace_cmd->add_option("--T", trace.sweeps, "sweeps");
  trace_cmd->add_option("--replicas", trace.replicas, "independent chains");
  trace_cmd->add_option("--seed", trace.seed, "seed");
  trace_cmd->add_option("--out", trace.out, "output CSV (default stdout)");
  trace_cmd->add_flag("--alg1-double-beta", trace.double_beta,
                      "accept with exp(-2 beta dE)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      cmd_gen_data(gen);
    } else if (train_cmd->parsed()) {
      cmd_train(train_config, train_out, train_resume, train_epochs, threads);
    } else if (eval_cmd->parsed()) {
      cmd_eval(eval, threads);
    } else if (sample_cmd->parsed()) {
      cmd_sample(sample, threads);
    } else if (trace_cmd->parsed()) {
      cmd_trace(trace, threads);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace isg
