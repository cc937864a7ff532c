#include "isg/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "isg/errors.hpp"
#include "isg/parallel.hpp"
#include "isg/rng.hpp"

namespace isg::mesh {

namespace {

EdgeList face_edges(const std::vector<std::array<int, 3>>& faces) {
  EdgeList edges;
  edges.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    edges.emplace_back(f[0], f[1]);
    edges.emplace_back(f[1], f[2]);
    edges.emplace_back(f[2], f[0]);
  }
  return edges;
}

std::string lowercase_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) {
    return "";
  }
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

TriMesh make_mesh(Points vertices, std::vector<std::array<int, 3>> faces) {
  const int n = static_cast<int>(vertices.rows());
  for (const auto& f : faces) {
    for (int v : f) {
      if (v < 0 || v >= n) {
        throw DataError("mesh: face references vertex " + std::to_string(v) + " of " +
                        std::to_string(n));
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw DataError("mesh: degenerate face with repeated vertex");
    }
  }
  TriMesh m;
  m.vertices = std::move(vertices);
  m.edge_graph = build_graph(n, face_edges(faces));
  m.faces = std::move(faces);
  return m;
}

TriMesh read_off(std::istream& in) {
  auto next_token_line = [&in]() {
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first != std::string::npos && line[first] != '#') {
        return line;
      }
    }
    throw DataError("off: unexpected end of file");
  };
  std::string header = next_token_line();
  if (header.rfind("OFF", 0) != 0) {
    throw DataError("off: missing OFF header");
  }
  long nv = 0;
  long nf = 0;
  long ne = 0;
  {
    // counts may share the header line in some writers
    std::istringstream hs(header.substr(3));
    if (!(hs >> nv >> nf >> ne)) {
      std::istringstream cs(next_token_line());
      if (!(cs >> nv >> nf >> ne)) {
        throw DataError("off: malformed counts line");
      }
    }
  }
  if (nv <= 0) {
    throw DataError("off: empty mesh");
  }
  Points verts(nv, 3);
  for (long i = 0; i < nv; ++i) {
    std::istringstream vs(next_token_line());
    if (!(vs >> verts(i, 0) >> verts(i, 1) >> verts(i, 2))) {
      throw DataError("off: malformed vertex line " + std::to_string(i));
    }
  }
  std::vector<std::array<int, 3>> faces;
  faces.reserve(static_cast<std::size_t>(nf));
  for (long f = 0; f < nf; ++f) {
    std::istringstream fs(next_token_line());
    int arity = 0;
    if (!(fs >> arity) || arity < 3) {
      throw DataError("off: malformed face line " + std::to_string(f));
    }
    std::vector<int> poly(static_cast<std::size_t>(arity));
    for (int k = 0; k < arity; ++k) {
      if (!(fs >> poly[static_cast<std::size_t>(k)])) {
        throw DataError("off: truncated face line " + std::to_string(f));
      }
    }
    for (int k = 1; k + 1 < arity; ++k) {
      faces.push_back({poly[0], poly[static_cast<std::size_t>(k)],
                       poly[static_cast<std::size_t>(k) + 1]});
    }
  }
  return make_mesh(std::move(verts), std::move(faces));
}

TriMesh read_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  auto parse_index = [&verts](const std::string& token) {
    // strip /vt and /vn references
    const std::string head = token.substr(0, token.find('/'));
    int idx = std::stoi(head);
    if (idx < 0) {
      idx = static_cast<int>(verts.size()) + idx + 1;
    }
    return idx - 1;
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) {
      continue;
    }
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ls >> v[0] >> v[1] >> v[2])) {
        throw DataError("obj: malformed vertex line: " + line);
      }
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token) {
        poly.push_back(parse_index(token));
      }
      if (poly.size() < 3) {
        throw DataError("obj: face with fewer than three vertices: " + line);
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  if (verts.empty()) {
    throw DataError("obj: empty mesh");
  }
  Points pts(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    pts.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  }
  return make_mesh(std::move(pts), std::move(faces));
}

TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open mesh: " + path);
  }
  const std::string ext = lowercase_ext(path);
  if (ext == "off") {
    return read_off(in);
  }
  if (ext == "obj") {
    return read_obj(in);
  }
  throw DataError("unsupported mesh format: " + path);
}

void write_off(std::ostream& out, const TriMesh& m) {
  out << "OFF\n" << m.num_vertices() << ' ' << m.num_faces() << " 0\n";
  out.precision(17);
  for (int i = 0; i < m.num_vertices(); ++i) {
    out << m.vertices(i, 0) << ' ' << m.vertices(i, 1) << ' ' << m.vertices(i, 2) << '\n';
  }
  for (const auto& f : m.faces) {
    out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

void write_obj(std::ostream& out, const TriMesh& m) {
  out.precision(17);
  for (int i = 0; i < m.num_vertices(); ++i) {
    out << "v " << m.vertices(i, 0) << ' ' << m.vertices(i, 1) << ' ' << m.vertices(i, 2)
        << '\n';
  }
  for (const auto& f : m.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void save_mesh(const std::string& path, const TriMesh& m) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open mesh for writing: " + path);
  }
  const std::string ext = lowercase_ext(path);
  if (ext == "off") {
    write_off(out, m);
  } else if (ext == "obj") {
    write_obj(out, m);
  } else {
    throw DataError("unsupported mesh format: " + path);
  }
}

CurvatureFeatures cot_laplacian_curvature(const TriMesh& m, double cot_cap) {
  const Graph& g = m.edge_graph;
  CurvatureFeatures feats;
  feats.cot_weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.neighbor_ids.size()));
  feats.edge_lengths = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.neighbor_ids.size()));
  feats.curvature = Eigen::VectorXd::Zero(g.num_nodes);

  auto arc_of = [&g](int i, int j) {
    const auto nb = g.neighbors(i);
    const auto it = std::lower_bound(nb.begin(), nb.end(), j);
    return static_cast<int>(g.neighbor_offsets[i] + (it - nb.begin()));
  };
  auto clamped_cot = [cot_cap](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
    const double cross = u.cross(v).norm();
    if (cross < 1e-300) {
      return cot_cap;  // collapsed angle
    }
    return std::clamp(u.dot(v) / cross, -cot_cap, cot_cap);
  };

  for (const auto& f : m.faces) {
    for (int corner = 0; corner < 3; ++corner) {
      const int opp = f[static_cast<std::size_t>(corner)];
      const int i = f[static_cast<std::size_t>((corner + 1) % 3)];
      const int j = f[static_cast<std::size_t>((corner + 2) % 3)];
      const Eigen::Vector3d u = m.vertices.row(i).transpose() - m.vertices.row(opp).transpose();
      const Eigen::Vector3d v = m.vertices.row(j).transpose() - m.vertices.row(opp).transpose();
      const double cot = clamped_cot(u, v);
      feats.cot_weights[arc_of(i, j)] += 0.5 * cot;
      feats.cot_weights[arc_of(j, i)] += 0.5 * cot;
    }
  }

  for (int i = 0; i < g.num_nodes; ++i) {
    Eigen::Vector3d lap = Eigen::Vector3d::Zero();
    for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
      const int j = g.neighbor_ids[static_cast<std::size_t>(k)];
      const Eigen::Vector3d diff =
          m.vertices.row(i).transpose() - m.vertices.row(j).transpose();
      feats.edge_lengths[k] = diff.norm();
      lap += feats.cot_weights[k] * diff;
    }
    feats.curvature[i] = lap.squaredNorm();
  }
  return feats;
}

double point_triangle_sq_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                  const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Closest point on a triangle via barycentric region tests.
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    return ap.squaredNorm();
  }
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    return bp.squaredNorm();
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (ap - v * ab).squaredNorm();
  }
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    return cp.squaredNorm();
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (ap - w * ac).squaredNorm();
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (bp - w * (c - b)).squaredNorm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return (ap - v * ab - w * ac).squaredNorm();
}

TriangleBvh::TriangleBvh(const TriMesh& m) {
  if (m.faces.empty()) {
    throw std::invalid_argument("bvh: mesh has no faces");
  }
  tris_.reserve(m.faces.size());
  for (const auto& f : m.faces) {
    Eigen::Matrix3d t;
    t.row(0) = m.vertices.row(f[0]);
    t.row(1) = m.vertices.row(f[1]);
    t.row(2) = m.vertices.row(f[2]);
    tris_.push_back(t);
  }
  order_.resize(tris_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * tris_.size());
  root_ = build(0, static_cast<int>(tris_.size()));
}

int TriangleBvh::build(int begin, int end) {
  Node node;
  node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int k = begin; k < end; ++k) {
    const Eigen::Matrix3d& t = tris_[static_cast<std::size_t>(order_[static_cast<std::size_t>(k)])];
    node.lo = node.lo.cwiseMin(t.colwise().minCoeff().transpose());
    node.hi = node.hi.cwiseMax(t.colwise().maxCoeff().transpose());
  }
  node.begin = begin;
  node.end = end;
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin > 4) {
    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [this, axis](int x, int y) {
                       return tris_[static_cast<std::size_t>(x)].col(axis).sum() <
                              tris_[static_cast<std::size_t>(y)].col(axis).sum();
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
  }
  return index;
}

double TriangleBvh::min_sq_distance(const Eigen::Vector3d& p) const {
  auto box_sq = [&p](const Node& n) {
    const Eigen::Vector3d clamped = p.cwiseMax(n.lo).cwiseMin(n.hi);
    return (p - clamped).squaredNorm();
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, int>> stack;
  stack.reserve(64);
  stack.emplace_back(box_sq(nodes_[static_cast<std::size_t>(root_)]), root_);
  while (!stack.empty()) {
    const auto [bound, idx] = stack.back();
    stack.pop_back();
    if (bound >= best) {
      continue;
    }
    const Node& node = nodes_[static_cast<std::size_t>(idx)];
    if (node.left < 0) {
      for (int k = node.begin; k < node.end; ++k) {
        const Eigen::Matrix3d& t =
            tris_[static_cast<std::size_t>(order_[static_cast<std::size_t>(k)])];
        best = std::min(best, point_triangle_sq_distance(p, t.row(0), t.row(1), t.row(2)));
      }
      continue;
    }
    const double dl = box_sq(nodes_[static_cast<std::size_t>(node.left)]);
    const double dr = box_sq(nodes_[static_cast<std::size_t>(node.right)]);
    // push the farther child first so the nearer one is explored next
    if (dl < dr) {
      stack.emplace_back(dr, node.right);
      stack.emplace_back(dl, node.left);
    } else {
      stack.emplace_back(dl, node.left);
      stack.emplace_back(dr, node.right);
    }
  }
  return best;
}

double point_to_mesh_distance(const Points& points, const TriMesh& coarse, int threads) {
  if (coarse.faces.empty()) {
    throw std::invalid_argument("point_to_mesh_distance: empty coarse mesh");
  }
  const TriangleBvh bvh(coarse);
  const int n = static_cast<int>(points.rows());
  Eigen::VectorXd per_point(n);
  parallel_for(n, threads, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      per_point[i] = bvh.min_sq_distance(points.row(i).transpose());
    }
  });
  // Sequential reduction in index order keeps the value independent of the
  // thread count and identical to the brute-force path.
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += per_point[i];
  }
  return total;
}

double point_to_mesh_distance_brute(const Points& points, const TriMesh& coarse) {
  if (coarse.faces.empty()) {
    throw std::invalid_argument("point_to_mesh_distance: empty coarse mesh");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector3d p = points.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : coarse.faces) {
      best = std::min(best, point_triangle_sq_distance(p, coarse.vertices.row(f[0]).transpose(),
                                                       coarse.vertices.row(f[1]).transpose(),
                                                       coarse.vertices.row(f[2]).transpose()));
    }
    total += best;
  }
  return total;
}

CoarseMesh collapse_to_coarse(const TriMesh& m, const SpinState& keep) {
  const int n = m.num_vertices();
  if (keep.size() != n) {
    throw std::invalid_argument("collapse: keep vector length != num_vertices");
  }
  CoarseMesh cm;
  cm.vertex_map.assign(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    if (keep[i] > 0) {
      cm.kept_vertices.push_back(i);
      cm.vertex_map[static_cast<std::size_t>(i)] = i;
    }
  }
  if (cm.kept_vertices.empty()) {
    throw std::invalid_argument("collapse: no kept vertices");
  }

  // Ring-by-ring search from each removed vertex; among the kept vertices at
  // the smallest hop distance, pick the closest in space, then the smallest
  // id. Vertices whose component contains no kept vertex fall back to the
  // globally nearest kept vertex.
  const Graph& g = m.edge_graph;
  std::vector<int> ring;
  std::vector<int> next_ring;
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  std::vector<int> touched;
  for (int v = 0; v < n; ++v) {
    if (keep[v] > 0) {
      continue;
    }
    ring.assign(1, v);
    visited[static_cast<std::size_t>(v)] = 1;
    touched.assign(1, v);
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    while (!ring.empty() && best < 0) {
      next_ring.clear();
      for (int u : ring) {
        for (int w : g.neighbors(u)) {
          if (visited[static_cast<std::size_t>(w)]) {
            continue;
          }
          visited[static_cast<std::size_t>(w)] = 1;
          touched.push_back(w);
          if (keep[w] > 0) {
            const double d = (m.vertices.row(v) - m.vertices.row(w)).squaredNorm();
            if (d < best_dist || (d == best_dist && w < best)) {
              best = w;
              best_dist = d;
            }
          } else {
            next_ring.push_back(w);
          }
        }
      }
      ring.swap(next_ring);
    }
    if (best < 0) {
      for (int w : cm.kept_vertices) {
        const double d = (m.vertices.row(v) - m.vertices.row(w)).squaredNorm();
        if (d < best_dist) {
          best = w;
          best_dist = d;
        }
      }
    }
    cm.vertex_map[static_cast<std::size_t>(v)] = best;
    for (int u : touched) {
      visited[static_cast<std::size_t>(u)] = 0;
    }
  }

  std::vector<int> compact(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < cm.kept_vertices.size(); ++c) {
    compact[static_cast<std::size_t>(cm.kept_vertices[c])] = static_cast<int>(c);
  }
  cm.mesh.vertices.resize(static_cast<Eigen::Index>(cm.kept_vertices.size()), 3);
  for (std::size_t c = 0; c < cm.kept_vertices.size(); ++c) {
    cm.mesh.vertices.row(static_cast<Eigen::Index>(c)) = m.vertices.row(cm.kept_vertices[c]);
  }

  std::vector<std::array<int, 3>> faces;
  std::map<std::array<int, 3>, bool> seen;
  for (const auto& f : m.faces) {
    std::array<int, 3> r;
    for (int k = 0; k < 3; ++k) {
      r[static_cast<std::size_t>(k)] =
          compact[static_cast<std::size_t>(cm.vertex_map[static_cast<std::size_t>(
              f[static_cast<std::size_t>(k)])])];
    }
    if (r[0] == r[1] || r[1] == r[2] || r[0] == r[2]) {
      continue;
    }
    std::array<int, 3> key = r;
    std::sort(key.begin(), key.end());
    if (seen.emplace(key, true).second) {
      faces.push_back(r);
    }
  }
  cm.mesh.faces = std::move(faces);
  cm.mesh.edge_graph = build_graph(static_cast<int>(cm.kept_vertices.size()),
                                   face_edges(cm.mesh.faces));
  return cm;
}

Baseline baseline_from_name(const std::string& name) {
  if (name == "random") return Baseline::Random;
  if (name == "fps") return Baseline::Fps;
  if (name == "spectral") return Baseline::Spectral;
  if (name == "ising") return Baseline::Ising;
  throw ConfigError("unknown mesh baseline: " + name);
}

Eigen::VectorXd laplacian_top_eigenvector(const Graph& g, int max_iters, double tol) {
  const int n = g.num_nodes;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = rng::uniform(0x706f776572, static_cast<std::uint64_t>(i)) - 0.5;
  }
  v.normalize();
  Eigen::VectorXd next(n);
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i < n; ++i) {
      double acc = static_cast<double>(g.degree(i)) * v[i];
      for (int j : g.neighbors(i)) {
        acc -= v[j];
      }
      next[i] = acc;
    }
    const double norm = next.norm();
    if (norm == 0.0) {
      break;
    }
    next /= norm;
    const double delta = std::min((next - v).norm(), (next + v).norm());
    v = next;
    if (delta < tol) {
      break;
    }
  }
  // canonical sign: first entry of largest magnitude is positive
  int lead = 0;
  v.cwiseAbs().maxCoeff(&lead);
  if (v[lead] < 0) {
    v = -v;
  }
  return v;
}

SpinState baseline_sample(const TriMesh& m, const CurvatureFeatures& feats, double fraction,
                          Baseline method, std::uint64_t seed, int sweeps) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("mesh baseline: fraction must lie in (0, 1)");
  }
  const int n = m.num_vertices();
  SpinState keep = SpinState::Constant(n, -1);
  switch (method) {
    case Baseline::Random: {
      for (int i = 0; i < n; ++i) {
        if (rng::uniform(seed, static_cast<std::uint64_t>(i)) < fraction) {
          keep[i] = 1;
        }
      }
      if ((keep.array() > 0).count() == 0) {
        keep[0] = 1;
      }
      break;
    }
    case Baseline::Fps: {
      const int want = std::max(1, static_cast<int>(std::lround(fraction * n)));
      int current = 0;
      feats.curvature.maxCoeff(&current);
      keep[current] = 1;
      Eigen::VectorXd min_dist(n);
      for (int i = 0; i < n; ++i) {
        min_dist[i] = (m.vertices.row(i) - m.vertices.row(current)).squaredNorm();
      }
      for (int k = 1; k < want; ++k) {
        int far = 0;
        min_dist.maxCoeff(&far);
        keep[far] = 1;
        min_dist[far] = 0.0;
        for (int i = 0; i < n; ++i) {
          min_dist[i] =
              std::min(min_dist[i], (m.vertices.row(i) - m.vertices.row(far)).squaredNorm());
        }
      }
      break;
    }
    case Baseline::Spectral: {
      const Eigen::VectorXd v = laplacian_top_eigenvector(m.edge_graph);
      for (int i = 0; i < n; ++i) {
        keep[i] = v[i] > 0 ? 1 : -1;
      }
      break;
    }
    case Baseline::Ising: {
      IsingParams p = make_params(1.0, -1.0, Eigen::VectorXd::Zero(n));
      keep = mh_sample(m.edge_graph, greedy_color(m.edge_graph), p, sweeps, seed);
      break;
    }
  }
  return keep;
}

Eigen::MatrixXd node_features(const TriMesh& m, const CurvatureFeatures& feats) {
  const Graph& g = m.edge_graph;
  Eigen::MatrixXd raw(g.num_nodes, 3);
  for (int i = 0; i < g.num_nodes; ++i) {
    raw(i, 0) = feats.curvature[i];
    raw(i, 1) = static_cast<double>(g.degree(i));
    double mean_len = 0.0;
    for (int k = g.neighbor_offsets[i]; k < g.neighbor_offsets[i + 1]; ++k) {
      mean_len += feats.edge_lengths[k];
    }
    raw(i, 2) = g.degree(i) > 0 ? mean_len / g.degree(i) : 0.0;
  }
  // Standardize per mesh so the net sees unit-scaled inputs regardless of
  // model units.
  for (int c = 0; c < 3; ++c) {
    const double mean = raw.col(c).mean();
    const double std = std::sqrt((raw.col(c).array() - mean).square().mean());
    raw.col(c) = (raw.col(c).array() - mean) / (std > 1e-12 ? std : 1.0);
  }
  return raw;
}

Graph feature_graph(const TriMesh& m, const CurvatureFeatures& feats) {
  Graph g = m.edge_graph;
  g.node_features = node_features(m, feats);
  return g;
}

std::pair<CoarseMesh, SparsifyMetrics> sparsify_learned(const TriMesh& m,
                                                        const FieldNetParams& params,
                                                        const FieldNetConfig& fcfg,
                                                        const IsingConfig& icfg, int sweeps,
                                                        std::uint64_t seed, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const CurvatureFeatures feats = cot_laplacian_curvature(m);
  const Graph g = feature_graph(m, feats);
  const Eigen::VectorXd field = forward(g, params, fcfg);
  IsingParams ip = make_params(icfg.beta, icfg.coupling, field);
  MhOptions opts;
  opts.threads = threads;
  opts.double_beta_acceptance = icfg.double_beta_acceptance;
  const SpinState keep = mh_sample(g, greedy_color(g), ip, sweeps, seed, opts);
  CoarseMesh cm = collapse_to_coarse(m, keep);

  SparsifyMetrics metrics;
  metrics.kept_fraction = sampling_fraction(keep);
  metrics.point_to_mesh = point_to_mesh_distance(m.vertices, cm.mesh, threads);
  metrics.mean_point_to_mesh = metrics.point_to_mesh / m.num_vertices();
  metrics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(cm), metrics};
}

TaskLoss make_loss(const TriMesh& fine, int threads) {
  return [&fine, threads](const SpinState& keep) {
    const CoarseMesh cm = collapse_to_coarse(fine, keep);
    return point_to_mesh_distance(fine.vertices, cm.mesh, threads);
  };
}

TriMesh make_icosphere(int subdivisions, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) {
    v.normalize();
  }
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) {
        return it->second;
      }
      Eigen::Vector3d v = (verts[static_cast<std::size_t>(a)] +
                           verts[static_cast<std::size_t>(b)])
                              .normalized();
      verts.push_back(v);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  Points pts(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    pts.row(static_cast<Eigen::Index>(i)) = radius * verts[i].transpose();
  }
  return make_mesh(std::move(pts), std::move(faces));
}

TriMesh make_bumpy_icosphere(int subdivisions, int bumps, double amplitude, std::uint64_t seed) {
  TriMesh sphere = make_icosphere(subdivisions, 1.0);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(static_cast<std::size_t>(bumps));
  for (int b = 0; b < bumps; ++b) {
    Eigen::Vector3d c;
    for (int k = 0; k < 3; ++k) {
      c[k] = 2.0 * rng::uniform(seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(k)) -
             1.0;
    }
    if (c.norm() < 1e-6) {
      c = Eigen::Vector3d::UnitX();
    }
    centers.push_back(c.normalized());
  }
  Points pts = sphere.vertices;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::Vector3d dir = pts.row(i).normalized().transpose();
    double r = 1.0;
    for (std::size_t b = 0; b < centers.size(); ++b) {
      const double width = 0.15 + 0.2 * rng::uniform(seed, 0x77696474, b);
      const double angle_sq = (dir - centers[b]).squaredNorm();
      r += amplitude * std::exp(-angle_sq / (2.0 * width * width));
    }
    pts.row(i) = r * dir.transpose();
  }
  return make_mesh(std::move(pts), sphere.faces);
}

TriMesh make_rounded_box(int segments, const Eigen::Vector3d& half_extents, double power) {
  if (segments < 1) {
    throw std::invalid_argument("rounded box: segments must be >= 1");
  }
  // Subdivided cube faces, welded, then superellipsoid-normalized so edges
  // and corners carry the curvature.
  std::map<std::array<long long, 3>, int> dedup;
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
  const int s = segments;
  auto vertex_at = [&](const Eigen::Vector3d& unit) {
    const std::array<long long, 3> key = {std::llround(unit[0] * 1e9),
                                          std::llround(unit[1] * 1e9),
                                          std::llround(unit[2] * 1e9)};
    const auto it = dedup.find(key);
    if (it != dedup.end()) {
      return it->second;
    }
    verts.push_back(unit);
    dedup.emplace(key, static_cast<int>(verts.size()) - 1);
    return static_cast<int>(verts.size()) - 1;
  };
  const std::array<std::array<Eigen::Vector3d, 3>, 6> frames = {{
      {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()},
      {-Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY()},
      {Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX()},
      {-Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitZ()},
      {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()},
      {-Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitX()},
  }};
  for (const auto& frame : frames) {
    const Eigen::Vector3d normal = frame[0];
    const Eigen::Vector3d u = frame[1];
    const Eigen::Vector3d v = frame[2];
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) {
        auto corner = [&](int da, int db) {
          const double fa = 2.0 * (a + da) / s - 1.0;
          const double fb = 2.0 * (b + db) / s - 1.0;
          return vertex_at(normal + fa * u + fb * v);
        };
        const int v00 = corner(0, 0);
        const int v10 = corner(1, 0);
        const int v01 = corner(0, 1);
        const int v11 = corner(1, 1);
        faces.push_back({v00, v10, v11});
        faces.push_back({v00, v11, v01});
      }
    }
  }
  Points pts(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Eigen::Vector3d& c = verts[i];
    const double norm_p = std::pow(std::pow(std::abs(c[0]), power) +
                                       std::pow(std::abs(c[1]), power) +
                                       std::pow(std::abs(c[2]), power),
                                   1.0 / power);
    const Eigen::Vector3d scaled = (c / norm_p).cwiseProduct(half_extents);
    pts.row(static_cast<Eigen::Index>(i)) = scaled.transpose();
  }
  return make_mesh(std::move(pts), std::move(faces));
}

TriMesh make_grid_patch(int rows, int cols, double spacing) {
  if (rows < 2 || cols < 2) {
    throw std::invalid_argument("grid patch: need at least 2x2 vertices");
  }
  Points pts(static_cast<Eigen::Index>(rows) * cols, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pts.row(static_cast<Eigen::Index>(r) * cols + c) =
          Eigen::RowVector3d(c * spacing, r * spacing, 0.0);
    }
  }
  std::vector<std::array<int, 3>> faces;
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int i = r * cols + c;
      faces.push_back({i, i + 1, i + cols});
      faces.push_back({i + 1, i + cols + 1, i + cols});
    }
  }
  return make_mesh(std::move(pts), std::move(faces));
}

}  // namespace isg::mesh
