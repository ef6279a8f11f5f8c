#pragma once

#include "dsr/config.hpp"
#include "dsr/metrics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dsr {

struct RunRecord {
  std::string run_id;
  std::uint64_t problem_seed = 0;
  GraphFamily family = GraphFamily::kErdosRenyi75;
  std::uint64_t graph_seed = 0;
  std::uint64_t schedule_seed = 0;  // 0 when the run used the static graph
  Algorithm algorithm = Algorithm::kIht;
  std::string status = "ok";        // otherwise "error: <message>"
  long iterations = 0;
  Metrics total;
  std::vector<Crossing> crossings;  // one per configured accuracy, descending
  std::vector<MetricsRow> rows;
  bool extended_rows = false;
  double step_constant = 0.0;       // L, L_TV or a, as used
  long graph_edges = 0;

  bool ok() const { return status == "ok"; }
};

struct AggregateRow {
  std::string graph;
  std::string algorithm;
  double accuracy = 0.0;
  double values = 0.0;      // mean over successful runs; budget spent when not converged
  double time_steps = 0.0;
  double converged_fraction = 0.0;
  int runs = 0;
};

struct Report {
  ExperimentConfig config;
  std::string config_hash;
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregates;
};

/// Executes problem seeds x graph families x graph instances x algorithms.
/// A failing cell is recorded with its error; the experiment continues.
Report run_experiment(const ExperimentConfig& config);

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs,
                                         const std::vector<double>& accuracies);

/// Writes runs.csv, crossings.csv, aggregate.csv, curves.csv, config.ini,
/// provenance.txt and runs/<run_id>.csv under `dir`.
void write_report(const Report& report, const std::string& dir);

void write_runs_csv(const std::vector<RunRecord>& runs, std::ostream& os);
void write_crossings_csv(const std::vector<RunRecord>& runs, std::ostream& os);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& os);
void write_curves_csv(const std::vector<RunRecord>& runs, std::ostream& os);

/// Parses runs.csv back; totals and identifiers only (no rows or crossings).
std::vector<RunRecord> read_runs_csv(std::istream& is);
/// Parses crossings.csv into (run_id, crossing) pairs.
std::vector<std::pair<std::string, Crossing>> read_crossings_csv(std::istream& is);

}  // namespace dsr
