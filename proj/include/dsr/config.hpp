#pragma once

#include "dsr/cbdiht.hpp"
#include "dsr/diht.hpp"
#include "dsr/graphs.hpp"
#include "dsr/model.hpp"
#include "dsr/subgradient.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsr {

enum class Algorithm { kIht, kDiht, kCbDiht, kSubgrad };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct ExperimentConfig {
  int version = 1;
  std::string name = "experiment";
  std::string output = "out";
  std::vector<double> accuracies{1e-2, 1e-5};

  ProblemSpec problem{100, 50, 5, 10, 0.0, 0.99, 1, Ensemble::kOrthonormalRows};
  std::vector<std::uint64_t> problem_seeds{1};

  std::vector<GraphFamily> families{GraphFamily::kErdosRenyi75};
  int graph_instances = 1;
  std::uint64_t graph_seed = 100;
  int ba_attach = 3;

  bool time_varying = true;
  int subgraphs = 10;
  double retain_prob = 0.5;
  std::uint64_t schedule_seed = 200;

  std::vector<Algorithm> algorithms{Algorithm::kCbDiht};

  std::optional<double> iht_l;   // default 1.005 * L_f
  std::optional<double> diht_l;  // default 1.005 * L_f
  int max_iters = 200000;
  int delay_min = 1;
  int delay_max = 1;

  std::optional<double> l_tv;
  LtvSource l_tv_source = LtvSource::kGlobal;  // 1.005 L_f / P, like iht_l and diht_l
  int cbdiht_max_outer_iters = 100000;
  long max_time_steps = 200000;

  double subgrad_a = 0.7;
  long subgrad_record_stride = 100;
};

/// INI-style text: [section] headers, key = value lines, '#' or ';'
/// comments. Unknown sections or keys are rejected.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
/// Canonical text form; parse_config(write_config(c)) reproduces c.
std::string write_config(const ExperimentConfig& c);

/// FNV-1a hash of the canonical text form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace dsr
