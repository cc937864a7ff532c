#include "isg/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "isg/errors.hpp"

namespace isg {

int Graph::max_degree() const {
  int d = 0;
  for (int i = 0; i < num_nodes; ++i) {
    d = std::max(d, degree(i));
  }
  return d;
}

Graph build_graph(int num_nodes, const EdgeList& edges, Eigen::MatrixXd node_features) {
  if (num_nodes < 0) {
    throw std::invalid_argument("build_graph: negative node count");
  }
  if (node_features.size() != 0 && node_features.rows() != num_nodes) {
    throw std::invalid_argument("build_graph: node_features rows != num_nodes");
  }

  EdgeList canon;
  canon.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw std::invalid_argument("build_graph: edge (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ") out of range for " +
                                  std::to_string(num_nodes) + " nodes");
    }
    if (a == b) {
      throw std::invalid_argument("build_graph: self-loop at node " + std::to_string(a));
    }
    canon.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  Graph g;
  g.num_nodes = num_nodes;
  g.node_features = std::move(node_features);
  std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& [a, b] : canon) {
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  g.neighbor_offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (int i = 0; i < num_nodes; ++i) {
    g.neighbor_offsets[static_cast<std::size_t>(i) + 1] =
        g.neighbor_offsets[static_cast<std::size_t>(i)] + deg[static_cast<std::size_t>(i)];
  }
  g.neighbor_ids.resize(2 * canon.size());
  std::vector<int> cursor(g.neighbor_offsets.begin(), g.neighbor_offsets.end() - 1);
  for (const auto& [a, b] : canon) {
    g.neighbor_ids[static_cast<std::size_t>(cursor[static_cast<std::size_t>(a)]++)] = b;
    g.neighbor_ids[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b)]++)] = a;
  }
  // canon is sorted, so each neighbor list comes out ascending already for
  // the low endpoint; the high endpoint's list needs a sort.
  for (int i = 0; i < num_nodes; ++i) {
    std::sort(g.neighbor_ids.begin() + g.neighbor_offsets[static_cast<std::size_t>(i)],
              g.neighbor_ids.begin() + g.neighbor_offsets[static_cast<std::size_t>(i) + 1]);
  }
  return g;
}

Graph grid_graph(int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("grid_graph: dimensions must be positive");
  }
  EdgeList edges;
  edges.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 2);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) {
        edges.emplace_back(i, i + 1);
      }
      if (r + 1 < rows) {
        edges.emplace_back(i, i + cols);
      }
    }
  }
  return build_graph(rows * cols, edges);
}

EdgeList edge_list(const Graph& g) {
  EdgeList out;
  out.reserve(static_cast<std::size_t>(g.num_edges()));
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int j : g.neighbors(i)) {
      if (j > i) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

Coloring greedy_color(const Graph& g) {
  std::vector<int> order(static_cast<std::size_t>(g.num_nodes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&g](int a, int b) { return g.degree(a) > g.degree(b); });

  Coloring c;
  c.color_of.assign(static_cast<std::size_t>(g.num_nodes), -1);
  std::vector<char> used;
  for (int v : order) {
    used.assign(static_cast<std::size_t>(g.max_degree()) + 2, 0);
    for (int u : g.neighbors(v)) {
      const int cu = c.color_of[static_cast<std::size_t>(u)];
      if (cu >= 0) {
        used[static_cast<std::size_t>(cu)] = 1;
      }
    }
    int color = 0;
    while (used[static_cast<std::size_t>(color)]) {
      ++color;
    }
    c.color_of[static_cast<std::size_t>(v)] = color;
    c.num_colors = std::max(c.num_colors, color + 1);
  }
  c.classes.assign(static_cast<std::size_t>(c.num_colors), {});
  for (int v = 0; v < g.num_nodes; ++v) {
    c.classes[static_cast<std::size_t>(c.color_of[static_cast<std::size_t>(v)])].push_back(v);
  }
  return c;
}

bool validate_coloring(const Graph& g, const Coloring& c) {
  if (static_cast<int>(c.color_of.size()) != g.num_nodes) {
    throw std::invalid_argument("validate_coloring: coloring sized for a different graph");
  }
  std::vector<char> seen(static_cast<std::size_t>(g.num_nodes), 0);
  for (int color = 0; color < static_cast<int>(c.classes.size()); ++color) {
    for (int v : c.classes[static_cast<std::size_t>(color)]) {
      if (v < 0 || v >= g.num_nodes || seen[static_cast<std::size_t>(v)] ||
          c.color_of[static_cast<std::size_t>(v)] != color) {
        return false;
      }
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (int v = 0; v < g.num_nodes; ++v) {
    if (!seen[static_cast<std::size_t>(v)]) {
      return false;
    }
    const int cv = c.color_of[static_cast<std::size_t>(v)];
    if (cv < 0 || cv >= c.num_colors) {
      return false;
    }
    for (int u : g.neighbors(v)) {
      if (c.color_of[static_cast<std::size_t>(u)] == cv) {
        return false;
      }
    }
  }
  return true;
}

EdgeList read_edge_list(std::istream& in) {
  EdgeList edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') {
      continue;
    }
    std::istringstream ls(line);
    int a = 0;
    int b = 0;
    if (!(ls >> a >> b)) {
      throw DataError("edge list: malformed line " + std::to_string(line_no) + ": " + line);
    }
    edges.emplace_back(a, b);
  }
  return edges;
}

Graph read_edge_list_graph(const std::string& path, int num_nodes_hint) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open edge list: " + path);
  }
  EdgeList edges = read_edge_list(in);
  int n = num_nodes_hint;
  for (const auto& [a, b] : edges) {
    n = std::max({n, a + 1, b + 1});
  }
  return build_graph(n, edges);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "% " << g.num_nodes << " nodes, " << g.num_edges() << " edges\n";
  for (const auto& [a, b] : edge_list(g)) {
    out << a << ' ' << b << '\n';
  }
}

}  // namespace isg
