#include "dsr/graphs.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <set>

namespace dsr {

namespace {

void write_edges(const std::vector<Edge>& edges, std::ostream& os) {
  for (const auto& [u, v] : edges) os << u << ' ' << v << '\n';
}

// "# key=value" headers; returns the value or nullopt if the line is a
// different header.
std::optional<long long> header_value(const std::string& line, const std::string& key) {
  const auto toks = detail::split_ws(line.substr(1));
  if (toks.empty()) return std::nullopt;
  for (const auto& tok : toks) {
    if (tok.rfind(key + "=", 0) == 0) return detail::parse_int(tok.substr(key.size() + 1));
  }
  return std::nullopt;
}

Edge parse_edge(const std::string& line) {
  const auto toks = detail::split_ws(line);
  if (toks.size() != 2) throw IoError("edge line must hold two vertices: '" + line + "'");
  return {static_cast<int>(detail::parse_int(toks[0])), static_cast<int>(detail::parse_int(toks[1]))};
}

Graph make_graph(int p, std::vector<Edge> edges) {
  try {
    return Graph(p, std::move(edges));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid edge list: ") + e.what());
  }
}

}  // namespace

void write_graph(const Graph& g, std::ostream& os) {
  os << "# p=" << g.size() << '\n';
  write_edges(g.edges(), os);
  if (!os) throw IoError("write_graph: stream failure");
}

Graph read_graph(std::istream& is) {
  std::optional<long long> p;
  std::vector<Edge> edges;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      if (!p) p = header_value(line, "p");
      continue;
    }
    edges.push_back(parse_edge(line));
  }
  if (!p) {
    // Without a header the vertex count is inferred from the largest label.
    long long max_v = -1;
    for (const auto& [u, v] : edges) max_v = std::max<long long>(max_v, std::max(u, v));
    if (max_v < 0) throw IoError("read_graph: empty edge list without '# p=' header");
    p = max_v + 1;
  }
  return make_graph(static_cast<int>(*p), std::move(edges));
}

void write_schedule(const TvSchedule& s, std::ostream& os) {
  os << "# p=" << s.base.size() << " period=" << s.period() << '\n';
  for (int t = 0; t < s.period(); ++t) {
    os << "# t=" << t << '\n';
    write_edges(s.subgraphs[t], os);
  }
  if (!os) throw IoError("write_schedule: stream failure");
}

TvSchedule read_schedule(std::istream& is) {
  std::optional<long long> p;
  std::vector<std::vector<Edge>> subs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      if (auto t = header_value(line, "t")) {
        if (*t != static_cast<long long>(subs.size()))
          throw IoError("read_schedule: blocks must appear in order t=0,1,...");
        subs.emplace_back();
      } else if (!p) {
        p = header_value(line, "p");
      }
      continue;
    }
    if (subs.empty()) throw IoError("read_schedule: edge before the first '# t=' header");
    Edge e = parse_edge(line);
    if (e.first > e.second) std::swap(e.first, e.second);
    subs.back().push_back(e);
  }
  if (!p) throw IoError("read_schedule: missing '# p=' header");
  if (subs.empty()) throw IoError("read_schedule: no subgraph blocks");
  std::set<Edge> uni;
  for (auto& sub : subs) {
    std::sort(sub.begin(), sub.end());
    uni.insert(sub.begin(), sub.end());
  }
  for (const auto& sub : subs) make_graph(static_cast<int>(*p), sub);  // validates each block
  return TvSchedule{make_graph(static_cast<int>(*p), {uni.begin(), uni.end()}), std::move(subs)};
}

}  // namespace dsr
