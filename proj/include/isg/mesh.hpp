#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isg/field_net.hpp"
#include "isg/graph.hpp"
#include "isg/sampler.hpp"
#include "isg/trainer.hpp"

namespace isg::mesh {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Triangle mesh plus its edge graph. Manifoldness is not required; inputs may
// be imperfect.
struct TriMesh {
  Points vertices;
  std::vector<std::array<int, 3>> faces;
  Graph edge_graph;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
};

// Validates face indices and builds the edge graph.
TriMesh make_mesh(Points vertices, std::vector<std::array<int, 3>> faces);

// OFF and OBJ (ASCII). Non-triangle faces are fan-triangulated on load; the
// format is chosen by file extension.
TriMesh load_mesh(const std::string& path);
void save_mesh(const std::string& path, const TriMesh& m);
TriMesh read_off(std::istream& in);
TriMesh read_obj(std::istream& in);
void write_off(std::ostream& out, const TriMesh& m);
void write_obj(std::ostream& out, const TriMesh& m);

// Cotangent weights w_ij = (cot a_ij + cot b_ij) / 2 over the angles opposite
// each edge (one term on boundary edges) and the curvature measure
// z_i = || sum_j w_ij (r_i - r_j) ||^2. Cotangent contributions from
// degenerate triangles are clamped to +-cot_cap.
struct CurvatureFeatures {
  Eigen::VectorXd cot_weights;   // arc-aligned with edge_graph
  Eigen::VectorXd curvature;     // z_i >= 0, per vertex
  Eigen::VectorXd edge_lengths;  // arc-aligned Euclidean distances
};
CurvatureFeatures cot_laplacian_curvature(const TriMesh& m, double cot_cap = 1e6);

// Exact point-triangle closest-distance, squared.
double point_triangle_sq_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                  const Eigen::Vector3d& b, const Eigen::Vector3d& c);

// Axis-aligned bounding-box tree over triangles for nearest-surface queries.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& m);
  double min_sq_distance(const Eigen::Vector3d& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;   // children, or
    int begin = 0, end = 0;      // leaf triangle range
  };
  int build(int begin, int end);

  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Eigen::Matrix3d> tris_;  // rows a, b, c
  int root_ = -1;
};

// Sum over the points of the squared distance to the nearest point on the
// mesh surface. The tree-accelerated and brute-force versions return
// identical values.
double point_to_mesh_distance(const Points& points, const TriMesh& coarse, int threads = 1);
double point_to_mesh_distance_brute(const Points& points, const TriMesh& coarse);

// Vertex subset plus remapped faces. Kept vertices never move; removed
// vertices map to the nearest kept vertex by breadth-first search over mesh
// edges (ties by Euclidean distance, then index). Degenerate and duplicate
// faces are dropped.
struct CoarseMesh {
  TriMesh mesh;
  std::vector<int> kept_vertices;  // ascending original ids
  std::vector<int> vertex_map;     // original id -> original id of its kept target
};
CoarseMesh collapse_to_coarse(const TriMesh& m, const SpinState& keep);

enum class Baseline { Random, Fps, Spectral, Ising };
Baseline baseline_from_name(const std::string& name);

// Keep decisions per vertex. RANDOM keeps i.i.d. with the given probability;
// FPS grows a farthest-point set from the max-curvature vertex; SPECTRAL
// keeps the positive side of the largest Laplacian eigenvector; ISING samples
// the zero-field antiferromagnet.
SpinState baseline_sample(const TriMesh& m, const CurvatureFeatures& feats, double fraction,
                          Baseline method, std::uint64_t seed, int sweeps = 10);

// Largest-eigenvalue eigenvector of the combinatorial Laplacian by power
// iteration; deterministic start, canonical sign.
Eigen::VectorXd laplacian_top_eigenvector(const Graph& g, int max_iters = 3000,
                                          double tol = 1e-12);

// Node features for the field net: [curvature, degree, mean incident edge
// length], standardized per mesh.
Eigen::MatrixXd node_features(const TriMesh& m, const CurvatureFeatures& feats);

// Graph with mesh features attached, ready for the field net.
Graph feature_graph(const TriMesh& m, const CurvatureFeatures& feats);

struct SparsifyMetrics {
  double point_to_mesh = 0.0;
  double mean_point_to_mesh = 0.0;  // per fine vertex
  double kept_fraction = 0.0;
  double seconds = 0.0;
};

// Learned sparsification: field-net forward on curvature features, then
// antiferromagnetic sampling and collapse.
std::pair<CoarseMesh, SparsifyMetrics> sparsify_learned(const TriMesh& m,
                                                        const FieldNetParams& params,
                                                        const FieldNetConfig& fcfg,
                                                        const IsingConfig& icfg, int sweeps,
                                                        std::uint64_t seed, int threads = 1);

// Task loss for training: collapse then point-to-mesh distance from the fine
// vertices.
TaskLoss make_loss(const TriMesh& fine, int threads = 1);

// Procedural shapes for desk-scale experiments.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);
TriMesh make_bumpy_icosphere(int subdivisions, int bumps, double amplitude, std::uint64_t seed);
TriMesh make_rounded_box(int segments, const Eigen::Vector3d& half_extents, double power);
TriMesh make_grid_patch(int rows, int cols, double spacing = 1.0);

}  // namespace isg::mesh
