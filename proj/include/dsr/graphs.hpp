#pragma once

#include "dsr/common.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dsr {

/// Undirected edge with first < second. Vertex 0 plays the role of agent 1.
using Edge = std::pair<int, int>;

class Graph {
 public:
  Graph() = default;
  /// Normalizes each pair to (min, max) and sorts. Self-loops and
  /// duplicate edges are rejected.
  Graph(int p, std::vector<Edge> edges);

  int size() const { return p_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<int>& neighbors(int v) const { return adjacency_.at(v); }
  int degree(int v) const { return static_cast<int>(adjacency_.at(v).size()); }
  int max_degree() const;
  bool has_edge(int u, int v) const;
  bool connected() const;
  /// Longest shortest path; throws ProtocolError when disconnected.
  int diameter() const;

 private:
  int p_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

bool is_connected(int p, const std::vector<Edge>& edges);

struct SpanningTree {
  int root = 0;
  std::vector<int> parent;                 // -1 for the root
  std::vector<std::vector<int>> children;  // ascending
  std::vector<int> depth;
  /// Messages used by the distributed BFS construction: 2|E| - (P-1).
  long construction_messages = 0;

  int size() const { return static_cast<int>(parent.size()); }
  int height() const;
  bool is_leaf(int v) const { return children.at(v).empty(); }
  std::vector<Edge> edges() const;
};

SpanningTree bfs_spanning_tree(const Graph& g, int root = 0);

/// Periodic sequence of subgraphs of a base graph; time t uses
/// subgraphs[t mod period].
struct TvSchedule {
  Graph base;
  std::vector<std::vector<Edge>> subgraphs;

  int period() const { return static_cast<int>(subgraphs.size()); }
  const std::vector<Edge>& edges_at(long t) const;
};

/// A static graph viewed as a period-1 schedule.
TvSchedule make_static_schedule(const Graph& g);

Graph gen_barabasi_albert(int p, int attach_m, std::uint64_t seed);
Graph gen_erdos_renyi(int p, double pr, std::uint64_t seed);
Graph gen_geometric(int p, double d, std::uint64_t seed);

/// Attachment count whose edge total m(p - m) lies closest to the target.
int calibrate_ba_attach(int p, double target_edges);

TvSchedule gen_tv_schedule(const Graph& g, int count, std::uint64_t seed,
                           double retain_prob = 0.5);

/// Smallest W such that every W consecutive subgraphs (cyclically) have a
/// connected union. Throws AssumptionViolation on a disconnected base.
int validate_connectivity_window(const TvSchedule& s);

/// Smallest C such that every base edge appears in every window of C
/// consecutive steps.
int edge_recurrence_bound(const TvSchedule& s);

enum class GraphFamily { kBarabasiAlbert, kErdosRenyi25, kErdosRenyi75, kGeometric05, kGeometric075 };

const std::vector<GraphFamily>& all_graph_families();
std::string to_string(GraphFamily f);
GraphFamily graph_family_from_string(const std::string& s);

/// Family instance with the evaluation parameters (BA uses `ba_attach`).
Graph make_family_graph(GraphFamily f, int p, std::uint64_t seed, int ba_attach = 3);

/// "u v" per line after a "# p=<P>" header.
void write_graph(const Graph& g, std::ostream& os);
Graph read_graph(std::istream& is);
/// Blocks of edges separated by "# t=<i>" headers.
void write_schedule(const TvSchedule& s, std::ostream& os);
TvSchedule read_schedule(std::istream& is);

}  // namespace dsr
