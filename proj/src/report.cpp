#include "dsr/experiment.hpp"
#include "text_util.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace dsr {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string num_or_blank(double v) { return std::isnan(v) ? "" : detail::fmt_double(v); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& os) {
  os << "run_id,problem_seed,graph,graph_seed,schedule_seed,algorithm,status,step_constant,"
        "graph_edges,iterations,values,messages,broadcasts,time_steps,setup_messages\n";
  for (const auto& r : runs) {
    os << r.run_id << ',' << r.problem_seed << ',' << to_string(r.family) << ',' << r.graph_seed << ','
       << r.schedule_seed << ',' << to_string(r.algorithm) << ',' << r.status << ','
       << detail::fmt_double(r.step_constant) << ',' << r.graph_edges << ',' << r.iterations << ','
       << r.total.values << ',' << r.total.messages << ',' << r.total.broadcasts << ','
       << r.total.time_steps << ',' << r.total.setup_messages << '\n';
  }
}

void write_crossings_csv(const std::vector<RunRecord>& runs, std::ostream& os) {
  os << "run_id,accuracy,converged,iter,values,messages,broadcasts,time_steps\n";
  for (const auto& r : runs) {
    for (const auto& c : r.crossings) {
      // Unconverged cells report the budget spent, a lower bound.
      const Metrics& m = c.iter ? c.at : r.total;
      os << r.run_id << ',' << detail::fmt_double(c.accuracy) << ',' << (c.iter ? 1 : 0) << ','
         << (c.iter ? *c.iter : r.iterations) << ',' << m.values << ',' << m.messages << ','
         << m.broadcasts << ',' << m.time_steps << '\n';
    }
  }
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& os) {
  os << "graph,algorithm,accuracy,values,time_steps,converged_fraction\n";
  for (const auto& r : rows) {
    os << r.graph << ',' << r.algorithm << ',' << detail::fmt_double(r.accuracy) << ','
       << num_or_blank(r.values) << ',' << num_or_blank(r.time_steps) << ','
       << detail::fmt_double(r.converged_fraction) << '\n';
  }
}

void write_curves_csv(const std::vector<RunRecord>& runs, std::ostream& os) {
  os << "run_id,iter,err,values_cum,time_steps_cum\n";
  for (const auto& r : runs)
    for (const auto& row : r.rows)
      os << r.run_id << ',' << row.iter << ',' << detail::fmt_double(row.err) << ',' << row.cum.values << ','
         << row.cum.time_steps << '\n';
}

void write_report(const Report& report, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "runs", ec);
  if (ec) throw IoError("cannot create output directory '" + (root / "runs").string() + "': " + ec.message());

  const auto emit = [&](const fs::path& path, auto&& body) {
    auto os = open_out(path);
    body(os);
    finish(os, path);
  };
  emit(root / "runs.csv", [&](std::ostream& os) { write_runs_csv(report.runs, os); });
  emit(root / "crossings.csv", [&](std::ostream& os) { write_crossings_csv(report.runs, os); });
  emit(root / "aggregate.csv", [&](std::ostream& os) { write_aggregate_csv(report.aggregates, os); });
  emit(root / "curves.csv", [&](std::ostream& os) { write_curves_csv(report.runs, os); });
  emit(root / "config.ini", [&](std::ostream& os) { os << write_config(report.config); });
  emit(root / "provenance.txt", [&](std::ostream& os) {
    const auto& c = report.config;
    os << "config_hash " << report.config_hash << '\n' << "name " << c.name << '\n' << "problem_seeds";
    for (auto s : c.problem_seeds) os << ' ' << s;
    os << "\ngraph_seeds";
    for (int i = 0; i < c.graph_instances; ++i) os << ' ' << c.graph_seed + static_cast<std::uint64_t>(i);
    os << "\nschedule_seeds";
    if (c.time_varying)
      for (int i = 0; i < c.graph_instances; ++i) os << ' ' << c.schedule_seed + static_cast<std::uint64_t>(i);
    os << "\nba_attach " << c.ba_attach << '\n'
       << "subgraph_retain_prob " << detail::fmt_double(c.retain_prob) << '\n'
       << "ensemble " << to_string(c.problem.ensemble) << '\n';
  });
  for (const auto& r : report.runs) {
    emit(root / "runs" / (r.run_id + ".csv"),
         [&](std::ostream& os) { write_metrics_csv(r.rows, os, r.extended_rows); });
  }
}

std::vector<RunRecord> read_runs_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("runs.csv: missing header");
  const auto header = split_csv(line);
  if (header.size() != 15 || header[0] != "run_id") throw IoError("runs.csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw IoError("runs.csv: wrong field count in '" + line + "'");
    RunRecord r;
    r.run_id = f[0];
    r.problem_seed = static_cast<std::uint64_t>(detail::parse_int(f[1]));
    r.family = graph_family_from_string(f[2]);
    r.graph_seed = static_cast<std::uint64_t>(detail::parse_int(f[3]));
    r.schedule_seed = static_cast<std::uint64_t>(detail::parse_int(f[4]));
    r.algorithm = algorithm_from_string(f[5]);
    r.status = f[6];
    r.step_constant = detail::parse_double(f[7]);
    r.graph_edges = detail::parse_int(f[8]);
    r.iterations = detail::parse_int(f[9]);
    r.total.values = detail::parse_int(f[10]);
    r.total.messages = detail::parse_int(f[11]);
    r.total.broadcasts = detail::parse_int(f[12]);
    r.total.time_steps = detail::parse_int(f[13]);
    r.total.setup_messages = detail::parse_int(f[14]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::pair<std::string, Crossing>> read_crossings_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("crossings.csv: missing header");
  std::vector<std::pair<std::string, Crossing>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw IoError("crossings.csv: wrong field count in '" + line + "'");
    Crossing c;
    c.accuracy = detail::parse_double(f[1]);
    if (f[2] == "1") c.iter = detail::parse_int(f[3]);
    c.at.values = detail::parse_int(f[4]);
    c.at.messages = detail::parse_int(f[5]);
    c.at.broadcasts = detail::parse_int(f[6]);
    c.at.time_steps = detail::parse_int(f[7]);
    out.emplace_back(f[0], c);
  }
  return out;
}

}  // namespace dsr
