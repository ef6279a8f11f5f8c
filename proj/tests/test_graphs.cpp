#include "dsr/graphs.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace dsr;

namespace {

std::vector<Edge> complete_edges(int p) {
  std::vector<Edge> e;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) e.emplace_back(i, j);
  return e;
}

// Smallest W with every cyclic window of W subgraphs connected, by brute force.
int window_oracle(const TvSchedule& s) {
  const int t = s.period();
  for (int w = 1; w <= t; ++w) {
    bool all = true;
    for (int start = 0; start < t && all; ++start) {
      std::vector<Edge> uni;
      for (int i = 0; i < w; ++i)
        for (const auto& e : s.subgraphs[(start + i) % t]) uni.push_back(e);
      all = oracle::connected(s.base.size(), uni);
    }
    if (all) return w;
  }
  return -1;
}

// Smallest C with every base edge present in every cyclic window of C steps.
int recurrence_oracle(const TvSchedule& s) {
  const int t = s.period();
  for (int c = 1; c <= t; ++c) {
    bool ok = true;
    for (const auto& e : s.base.edges()) {
      for (int start = 0; start < t && ok; ++start) {
        bool seen = false;
        for (int i = 0; i < c && !seen; ++i) {
          const auto& sub = s.subgraphs[(start + i) % t];
          seen = std::find(sub.begin(), sub.end(), e) != sub.end();
        }
        ok = seen;
      }
    }
    if (ok) return c;
  }
  return -1;
}

}  // namespace

TEST_SUITE("graphs") {
  TEST_CASE("graph construction normalizes and validates") {
    const Graph g(4, {{2, 1}, {0, 3}, {1, 0}});
    CHECK(g.edges() == std::vector<Edge>{{0, 1}, {0, 3}, {1, 2}});
    CHECK(g.has_edge(2, 1));
    CHECK(g.degree(0) == 2);
    CHECK(g.max_degree() == 2);
    CHECK(g.connected());
    CHECK(g.diameter() == 3);
    CHECK_THROWS_AS(Graph(3, {{1, 1}}), InvalidArgument);
    CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), InvalidArgument);
    CHECK_THROWS_AS(Graph(3, {{0, 5}}), InvalidArgument);
    CHECK_THROWS_AS(Graph(3, {{0, 1}}).diameter(), ProtocolError);
  }

  TEST_CASE("generators are deterministic and connected") {
    for (GraphFamily f : all_graph_families()) {
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Graph g = make_family_graph(f, 25, seed);
        CHECK(g.size() == 25);
        CHECK(oracle::connected(25, g.edges()));
        CHECK(make_family_graph(f, 25, seed).edges() == g.edges());
      }
      CHECK(graph_family_from_string(to_string(f)) == f);
    }
    CHECK_THROWS_AS(graph_family_from_string("ring"), InvalidArgument);
  }

  TEST_CASE("barabasi-albert sizes") {
    const Graph tree = gen_barabasi_albert(3, 1, 1);
    CHECK(tree.edge_count() == 2);
    CHECK(tree.connected());

    const int m50 = calibrate_ba_attach(50, 128);
    CHECK(m50 == 3);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto e = gen_barabasi_albert(50, m50, seed).edge_count();
      CHECK(e >= 100);
      CHECK(e <= 160);
    }
    double mean64 = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      mean64 += static_cast<double>(gen_barabasi_albert(64, calibrate_ba_attach(64, 171), seed).edge_count()) / 20;
    CHECK(mean64 >= 171 * 0.75);
    CHECK(mean64 <= 171 * 1.25);
  }

  TEST_CASE("erdos-renyi sizes") {
    CHECK(gen_erdos_renyi(7, 1.0, 3).edge_count() == 21u);
    CHECK(gen_erdos_renyi(2, 0.5, 3).edges() == std::vector<Edge>{{0, 1}});
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
      mean += static_cast<double>(gen_erdos_renyi(50, 0.75, seed).edge_count()) / 30;
    CHECK(mean >= 875);
    CHECK(mean <= 1010);
  }

  TEST_CASE("geometric sizes") {
    CHECK(gen_geometric(6, std::sqrt(2.0), 4).edge_count() == 15u);
    CHECK(gen_geometric(2, 0.1, 4).edge_count() == 1u);
    // Band frozen from a 2000-seed Monte Carlo run of the generator
    // (d = 0.5, p = 50): mean 593, 0.5% and 99.5% quantiles 483 and 731.
    int in_band = 0;
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto e = gen_geometric(50, 0.5, seed).edge_count();
      if (e >= 470 && e <= 740) ++in_band;
      mean += static_cast<double>(e) / 100;
    }
    CHECK(in_band >= 95);
    // Two uniform points in the unit square lie within r with probability
    // pi r^2 - 8 r^3 / 3 + r^4 / 2.
    const double r = 0.5;
    const double q = M_PI * r * r - 8 * r * r * r / 3 + r * r * r * r / 2;
    CHECK(std::abs(mean - 1225 * q) <= 20.0);
  }

  TEST_CASE("bfs spanning tree") {
    const auto path = bfs_spanning_tree(Graph(3, {{0, 1}, {1, 2}}));
    CHECK(path.parent == std::vector<int>{-1, 0, 1});
    CHECK(path.height() == 2);
    CHECK(path.construction_messages == 2 * 2 - 2);

    const auto star = bfs_spanning_tree(Graph(4, complete_edges(4)));
    CHECK(star.depth == std::vector<int>{0, 1, 1, 1});
    CHECK(star.children[0] == std::vector<int>{1, 2, 3});
    CHECK(star.construction_messages == 2 * 6 - 3);

    CHECK_THROWS_AS(bfs_spanning_tree(Graph(3, {{0, 1}})), ProtocolError);
  }

  TEST_CASE("spanning trees of generated graphs") {
    for (GraphFamily f : all_graph_families()) {
      const Graph g = make_family_graph(f, 30, 7);
      const auto tree = bfs_spanning_tree(g);
      const auto te = tree.edges();
      REQUIRE(te.size() == 29u);
      CHECK(tree.construction_messages == 2 * static_cast<long>(g.edge_count()) - 29);
      CHECK(oracle::connected(30, te));
      // BFS depths equal hop distances.
      CHECK(tree.depth == oracle::hops(30, g.edges(), 0));
      for (std::size_t drop = 0; drop < te.size(); ++drop) {
        auto rest = te;
        rest.erase(rest.begin() + static_cast<long>(drop));
        CHECK_FALSE(oracle::connected(30, rest));
        CHECK(g.has_edge(te[drop].first, te[drop].second));
      }
    }
  }

  TEST_CASE("time-varying schedules") {
    const Graph base = make_family_graph(GraphFamily::kErdosRenyi25, 15, 3);
    const TvSchedule one = gen_tv_schedule(base, 1, 5);
    CHECK(one.subgraphs.front() == base.edges());
    CHECK(validate_connectivity_window(one) == 1);

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const TvSchedule s = gen_tv_schedule(base, 10, seed);
      std::set<Edge> uni;
      for (const auto& sub : s.subgraphs)
        for (const auto& e : sub) {
          CHECK(base.has_edge(e.first, e.second));
          uni.insert(e);
        }
      CHECK(std::vector<Edge>(uni.begin(), uni.end()) == base.edges());
      for (long t = 0; t < 25; ++t) CHECK(s.edges_at(t) == s.edges_at(t + s.period()));
      CHECK(validate_connectivity_window(s) == window_oracle(s));
      CHECK(edge_recurrence_bound(s) == recurrence_oracle(s));
      CHECK(validate_connectivity_window(s) <= 10);
    }
  }

  TEST_CASE("subgraph density tracks the retention probability") {
    const Graph k4(4, complete_edges(4));
    double kept = 0.0;
    int slots = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const TvSchedule s = gen_tv_schedule(k4, 10, seed);
      std::set<Edge> uni;
      for (const auto& sub : s.subgraphs) {
        kept += static_cast<double>(sub.size()) / 6.0;
        ++slots;
        uni.insert(sub.begin(), sub.end());
      }
      CHECK(uni.size() == 6u);
    }
    CHECK(kept / slots == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("window of connected subgraphs is one") {
    TvSchedule s;
    s.base = Graph(3, {{0, 1}, {0, 2}, {1, 2}});
    s.subgraphs = {{{0, 1}, {1, 2}}, {{0, 2}, {1, 2}}};
    CHECK(validate_connectivity_window(s) == 1);
    CHECK(edge_recurrence_bound(s) == 2);

    s.subgraphs = {{{0, 1}}, {{1, 2}}, {{0, 2}}};
    CHECK(validate_connectivity_window(s) == 2);
    CHECK(edge_recurrence_bound(s) == 3);

    TvSchedule broken;
    broken.base = Graph(3, {{0, 1}});
    broken.subgraphs = {{{0, 1}}};
    CHECK_THROWS_AS(validate_connectivity_window(broken), AssumptionViolation);
  }

  TEST_CASE("graph and schedule files") {
    const Graph g = make_family_graph(GraphFamily::kGeometric075, 9, 2);
    std::stringstream gs;
    write_graph(g, gs);
    const Graph back = read_graph(gs);
    CHECK(back.size() == 9);
    CHECK(back.edges() == g.edges());

    std::stringstream headerless("0 1\n1 2\n");
    CHECK(read_graph(headerless).size() == 3);

    const TvSchedule s = gen_tv_schedule(g, 4, 1);
    std::stringstream ss;
    write_schedule(s, ss);
    const TvSchedule sb = read_schedule(ss);
    CHECK(sb.subgraphs == s.subgraphs);
    CHECK(sb.base.edges() == s.base.edges());

    std::stringstream bad1("# p=3\n0 x\n");
    CHECK_THROWS_AS(read_graph(bad1), IoError);
    std::stringstream bad2("# p=3 period=2\n# t=1\n0 1\n# t=0\n1 2\n");
    CHECK_THROWS_AS(read_schedule(bad2), IoError);
  }
}
