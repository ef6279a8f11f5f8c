#include "dsr/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

namespace dsr {

namespace {

constexpr int kMaxResamples = 100000;

std::vector<std::vector<int>> build_adjacency(int p, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(p));
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int w : adj[u]) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace

Graph::Graph(int p, std::vector<Edge> edges) : p_(p) {
  require(p >= 1, "Graph: vertex count must be positive");
  for (auto& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
    require(e.first >= 0 && e.second < p, "Graph: edge endpoint out of range");
    require(e.first != e.second, "Graph: self-loop");
  }
  std::sort(edges.begin(), edges.end());
  require(std::adjacent_find(edges.begin(), edges.end()) == edges.end(), "Graph: duplicate edge");
  edges_ = std::move(edges);
  adjacency_ = build_adjacency(p_, edges_);
}

int Graph::max_degree() const {
  int best = 0;
  for (const auto& nb : adjacency_) best = std::max(best, static_cast<int>(nb.size()));
  return best;
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

bool Graph::connected() const { return is_connected(p_, edges_); }

int Graph::diameter() const {
  int diam = 0;
  for (int v = 0; v < p_; ++v) {
    const auto dist = bfs_distances(adjacency_, v);
    for (int d : dist) {
      if (d < 0) throw ProtocolError("diameter: graph is disconnected");
      diam = std::max(diam, d);
    }
  }
  return diam;
}

bool is_connected(int p, const std::vector<Edge>& edges) {
  if (p <= 1) return true;
  const auto dist = bfs_distances(build_adjacency(p, edges), 0);
  return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

int SpanningTree::height() const {
  return depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
}

std::vector<Edge> SpanningTree::edges() const {
  std::vector<Edge> out;
  for (int v = 0; v < size(); ++v)
    if (parent[v] >= 0) out.emplace_back(std::min(v, parent[v]), std::max(v, parent[v]));
  std::sort(out.begin(), out.end());
  return out;
}

SpanningTree bfs_spanning_tree(const Graph& g, int root) {
  require(root >= 0 && root < g.size(), "bfs_spanning_tree: root out of range");
  const int p = g.size();
  SpanningTree tree;
  tree.root = root;
  tree.parent.assign(p, -1);
  tree.depth.assign(p, -1);
  tree.children.assign(p, {});
  tree.depth[root] = 0;
  std::deque<int> queue{root};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int w : g.neighbors(u)) {  // ascending order
      if (tree.depth[w] < 0) {
        tree.depth[w] = tree.depth[u] + 1;
        tree.parent[w] = u;
        tree.children[u].push_back(w);
        queue.push_back(w);
      }
    }
  }
  for (int v = 0; v < p; ++v) {
    if (tree.depth[v] < 0)
      throw ProtocolError("bfs_spanning_tree: vertex " + std::to_string(v) +
                          " is unreachable from the root");
  }
  tree.construction_messages = 2 * static_cast<long>(g.edge_count()) - (p - 1);
  return tree;
}

const std::vector<Edge>& TvSchedule::edges_at(long t) const {
  const long period_l = period();
  return subgraphs[static_cast<std::size_t>(((t % period_l) + period_l) % period_l)];
}

TvSchedule make_static_schedule(const Graph& g) { return TvSchedule{g, {g.edges()}}; }

Graph gen_barabasi_albert(int p, int attach_m, std::uint64_t seed) {
  require(attach_m >= 1 && p > attach_m, "gen_barabasi_albert: need p > attach_m >= 1");
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> repeated;
  // Star on vertices 0..attach_m centered at 0.
  for (int v = 1; v <= attach_m; ++v) {
    edges.emplace_back(0, v);
    repeated.push_back(0);
    repeated.push_back(v);
  }
  for (int source = attach_m + 1; source < p; ++source) {
    std::set<int> targets;
    std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
    while (static_cast<int>(targets.size()) < attach_m) targets.insert(repeated[pick(rng)]);
    for (int t : targets) {
      edges.emplace_back(t, source);
      repeated.push_back(t);
      repeated.push_back(source);
    }
  }
  return Graph(p, std::move(edges));
}

int calibrate_ba_attach(int p, double target_edges) {
  require(p >= 2, "calibrate_ba_attach: p must be at least 2");
  int best = 1;
  double best_gap = std::abs(1.0 * (p - 1) - target_edges);
  for (int m = 2; m < p; ++m) {
    const double gap = std::abs(static_cast<double>(m) * (p - m) - target_edges);
    if (gap < best_gap) {
      best = m;
      best_gap = gap;
    }
  }
  return best;
}

Graph gen_erdos_renyi(int p, double pr, std::uint64_t seed) {
  require(pr > 0.0 && pr <= 1.0, "gen_erdos_renyi: pr must lie in (0, 1]");
  require(p >= 1, "gen_erdos_renyi: p must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    std::vector<Edge> edges;
    for (int u = 0; u < p; ++u)
      for (int v = u + 1; v < p; ++v)
        if (pr >= 1.0 || unif(rng) < pr) edges.emplace_back(u, v);
    if (is_connected(p, edges)) return Graph(p, std::move(edges));
  }
  throw ProtocolError("gen_erdos_renyi: no connected sample after resampling budget");
}

Graph gen_geometric(int p, double d, std::uint64_t seed) {
  require(d > 0.0, "gen_geometric: d must be positive");
  require(p >= 1, "gen_geometric: p must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> xs(p), ys(p);
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    for (int v = 0; v < p; ++v) {
      xs[v] = unif(rng);
      ys[v] = unif(rng);
    }
    std::vector<Edge> edges;
    for (int u = 0; u < p; ++u)
      for (int v = u + 1; v < p; ++v)
        if (std::hypot(xs[u] - xs[v], ys[u] - ys[v]) <= d) edges.emplace_back(u, v);
    if (is_connected(p, edges)) return Graph(p, std::move(edges));
  }
  throw ProtocolError("gen_geometric: no connected sample after resampling budget");
}

TvSchedule gen_tv_schedule(const Graph& g, int count, std::uint64_t seed, double retain_prob) {
  require(count >= 1, "gen_tv_schedule: count must be positive");
  require(retain_prob > 0.0 && retain_prob < 1.0, "gen_tv_schedule: retain_prob must lie in (0, 1)");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> slot(0, count - 1);

  std::vector<std::vector<Edge>> subs(static_cast<std::size_t>(count));
  std::vector<bool> covered(g.edge_count(), false);
  for (auto& sub : subs) {
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      if (unif(rng) < retain_prob) {
        sub.push_back(g.edges()[e]);
        covered[e] = true;
      }
    }
  }
  // Union repair: an edge missing from every subgraph goes into one of them.
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    if (!covered[e]) subs[slot(rng)].push_back(g.edges()[e]);
  }
  for (auto& sub : subs) std::sort(sub.begin(), sub.end());
  return TvSchedule{g, std::move(subs)};
}

int validate_connectivity_window(const TvSchedule& s) {
  const int p = s.base.size();
  if (!s.base.connected())
    throw AssumptionViolation("schedule base graph is disconnected");
  const int period = s.period();
  require(period >= 1, "validate_connectivity_window: empty schedule");
  for (int w = 1; w <= period; ++w) {
    bool all = true;
    for (int start = 0; start < period && all; ++start) {
      std::set<Edge> uni;
      for (int i = 0; i < w; ++i) {
        const auto& sub = s.edges_at(start + i);
        uni.insert(sub.begin(), sub.end());
      }
      all = is_connected(p, std::vector<Edge>(uni.begin(), uni.end()));
    }
    if (all) return w;
  }
  throw AssumptionViolation("schedule union over a full period is disconnected");
}

int edge_recurrence_bound(const TvSchedule& s) {
  const int period = s.period();
  require(period >= 1, "edge_recurrence_bound: empty schedule");
  int worst = 1;
  for (const auto& e : s.base.edges()) {
    std::vector<int> at;
    for (int t = 0; t < period; ++t) {
      const auto& sub = s.subgraphs[t];
      if (std::binary_search(sub.begin(), sub.end(), e)) at.push_back(t);
    }
    if (at.empty())
      throw AssumptionViolation("base edge (" + std::to_string(e.first) + "," +
                                std::to_string(e.second) + ") never appears in the schedule");
    for (std::size_t i = 0; i < at.size(); ++i) {
      const int next = i + 1 < at.size() ? at[i + 1] : at.front() + period;
      worst = std::max(worst, next - at[i]);
    }
  }
  return worst;
}

const std::vector<GraphFamily>& all_graph_families() {
  static const std::vector<GraphFamily> families{
      GraphFamily::kBarabasiAlbert, GraphFamily::kErdosRenyi25, GraphFamily::kErdosRenyi75,
      GraphFamily::kGeometric05, GraphFamily::kGeometric075};
  return families;
}

std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::kBarabasiAlbert:
      return "ba";
    case GraphFamily::kErdosRenyi25:
      return "er25";
    case GraphFamily::kErdosRenyi75:
      return "er75";
    case GraphFamily::kGeometric05:
      return "geo05";
    case GraphFamily::kGeometric075:
      return "geo075";
  }
  return "ba";
}

GraphFamily graph_family_from_string(const std::string& s) {
  for (auto f : all_graph_families())
    if (to_string(f) == s) return f;
  throw InvalidArgument("unknown graph family '" + s + "' (expected ba, er25, er75, geo05, geo075)");
}

Graph make_family_graph(GraphFamily f, int p, std::uint64_t seed, int ba_attach) {
  switch (f) {
    case GraphFamily::kBarabasiAlbert:
      return gen_barabasi_albert(p, std::min(ba_attach, p - 1), seed);
    case GraphFamily::kErdosRenyi25:
      return gen_erdos_renyi(p, 0.25, seed);
    case GraphFamily::kErdosRenyi75:
      return gen_erdos_renyi(p, 0.75, seed);
    case GraphFamily::kGeometric05:
      return gen_geometric(p, 0.5, seed);
    case GraphFamily::kGeometric075:
      return gen_geometric(p, 0.75, seed);
  }
  throw InvalidArgument("make_family_graph: unknown family");
}

}  // namespace dsr
