#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isg {

using EdgeList = std::vector<std::pair<int, int>>;

// Undirected graph in compressed adjacency form. Both directions of every
// edge are stored and neighbor lists are sorted ascending, so sweeps are
// deterministic. Arc k belongs to the node owning that offset range; per-arc
// payloads (edge_coupling, edge_features) are indexed the same way and must
// be symmetric across the two directions of an edge.
struct Graph {
  int num_nodes = 0;
  std::vector<int> neighbor_offsets;  // length num_nodes + 1
  std::vector<int> neighbor_ids;      // length 2 * num_edges
  Eigen::VectorXd edge_coupling;      // optional, arc-aligned, J_ij = J_ji
  Eigen::MatrixXd node_features;      // optional, num_nodes x feature_dim
  Eigen::MatrixXd edge_features;      // optional, arc-aligned rows

  int num_edges() const { return static_cast<int>(neighbor_ids.size()) / 2; }
  int degree(int i) const { return neighbor_offsets[i + 1] - neighbor_offsets[i]; }
  int max_degree() const;

  std::span<const int> neighbors(int i) const {
    return {neighbor_ids.data() + neighbor_offsets[i],
            neighbor_ids.data() + neighbor_offsets[i + 1]};
  }
};

// Symmetrizes, deduplicates, and sorts the edge list. Self-loops and
// out-of-range endpoints are rejected.
Graph build_graph(int num_nodes, const EdgeList& edges,
                  Eigen::MatrixXd node_features = {});

// rows x cols lattice with 4-neighbor connectivity, node id = r * cols + c.
Graph grid_graph(int rows, int cols);

// Unique undirected edges, i < j, lexicographic.
EdgeList edge_list(const Graph& g);

struct Coloring {
  std::vector<int> color_of;
  int num_colors = 0;
  std::vector<std::vector<int>> classes;  // per color, ascending node ids
};

// Greedy proper coloring, largest-degree-first with node-id tie breaking.
// Uses at most max_degree + 1 colors.
Coloring greedy_color(const Graph& g);

// True iff no edge is monochromatic and the classes partition the node set.
// Throws on size mismatch.
bool validate_coloring(const Graph& g, const Coloring& c);

// Edge-list text format: one "i j" pair per line, 0-based, whitespace
// separated; lines starting with '%' are comments. Node count on read is
// max index + 1 unless a larger hint is given.
EdgeList read_edge_list(std::istream& in);
Graph read_edge_list_graph(const std::string& path, int num_nodes_hint = 0);
void write_edge_list(std::ostream& out, const Graph& g);

}  // namespace isg
