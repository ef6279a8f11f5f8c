#include "dsr/config.hpp"
#include "text_util.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dsr {

namespace pt = boost::property_tree;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kIht:
      return "iht";
    case Algorithm::kDiht:
      return "diht";
    case Algorithm::kCbDiht:
      return "cbdiht";
    case Algorithm::kSubgrad:
      return "subgrad";
  }
  return "iht";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::kIht, Algorithm::kDiht, Algorithm::kCbDiht, Algorithm::kSubgrad})
    if (to_string(a) == s) return a;
  throw InvalidArgument("unknown algorithm '" + s + "' (expected iht, diht, cbdiht, subgrad)");
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"version", "name", "output", "accuracies"}},
      {"problem", {"n", "m", "k", "p", "noise_std", "spectral_cap", "ensemble", "seeds"}},
      {"graph", {"families", "instances", "seed", "ba_attach"}},
      {"schedule", {"time_varying", "subgraphs", "retain_prob", "seed"}},
      {"algorithms", {"run"}},
      {"iht", {"l"}},
      {"diht", {"l", "max_iters", "delay_min", "delay_max"}},
      {"cbdiht", {"l_tv", "l_tv_source", "max_outer_iters", "max_time_steps"}},
      {"subgrad", {"a", "record_stride"}},
  };
  return keys;
}

struct Reader {
  const pt::ptree& tree;

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    auto sec = tree.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }

  template <typename T>
  void num(const std::string& section, const std::string& key, T& out) const {
    if (auto v = raw(section, key)) {
      try {
        if constexpr (std::is_floating_point_v<T>) {
          out = static_cast<T>(detail::parse_double(*v));
        } else {
          out = static_cast<T>(detail::parse_int(*v));
        }
      } catch (const IoError&) {
        throw IoError("config: [" + section + "] " + key + " has malformed value '" + *v + "'");
      }
    }
  }

  void opt_double(const std::string& section, const std::string& key, std::optional<double>& out) const {
    if (auto v = raw(section, key)) {
      if (*v == "auto") {
        out.reset();
      } else {
        double d = 0.0;
        num(section, key, d);
        out = d;
      }
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& out) const {
    if (auto v = raw(section, key)) {
      if (*v == "true" || *v == "1") {
        out = true;
      } else if (*v == "false" || *v == "0") {
        out = false;
      } else {
        throw IoError("config: [" + section + "] " + key + " must be true or false");
      }
    }
  }

  std::optional<std::vector<std::string>> list(const std::string& section, const std::string& key) const {
    if (auto v = raw(section, key)) return detail::split_ws(*v);
    return std::nullopt;
  }
};

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += f(xs[i]);
  }
  return out;
}

std::string opt_text(const std::optional<double>& v) { return v ? detail::fmt_double(*v) : "auto"; }

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw IoError("config: key '" + section + "' appears outside any section");
    auto it = schema().find(section);
    if (it == schema().end()) throw IoError("config: unknown section [" + section + "]");
    for (const auto& kv : body)
      if (!it->second.count(kv.first))
        throw IoError("config: unknown key '" + kv.first + "' in [" + section + "]");
  }

  ExperimentConfig c;
  const Reader r{tree};
  try {
    r.num("experiment", "version", c.version);
    if (c.version != 1) throw IoError("config: unsupported version " + std::to_string(c.version));
    if (auto v = r.raw("experiment", "name")) c.name = *v;
    if (auto v = r.raw("experiment", "output")) c.output = *v;
    if (auto v = r.list("experiment", "accuracies")) {
      c.accuracies.clear();
      for (const auto& s : *v) c.accuracies.push_back(detail::parse_double(s));
    }

    r.num("problem", "n", c.problem.n);
    r.num("problem", "m", c.problem.m);
    r.num("problem", "k", c.problem.k);
    r.num("problem", "p", c.problem.p);
    r.num("problem", "noise_std", c.problem.noise_std);
    r.num("problem", "spectral_cap", c.problem.spectral_cap);
    if (auto v = r.raw("problem", "ensemble")) c.problem.ensemble = ensemble_from_string(*v);
    if (auto v = r.list("problem", "seeds")) {
      c.problem_seeds.clear();
      for (const auto& s : *v) c.problem_seeds.push_back(static_cast<std::uint64_t>(detail::parse_int(s)));
    }

    if (auto v = r.list("graph", "families")) {
      c.families.clear();
      for (const auto& s : *v) c.families.push_back(graph_family_from_string(s));
    }
    r.num("graph", "instances", c.graph_instances);
    r.num("graph", "seed", c.graph_seed);
    r.num("graph", "ba_attach", c.ba_attach);

    r.boolean("schedule", "time_varying", c.time_varying);
    r.num("schedule", "subgraphs", c.subgraphs);
    r.num("schedule", "retain_prob", c.retain_prob);
    r.num("schedule", "seed", c.schedule_seed);

    if (auto v = r.list("algorithms", "run")) {
      c.algorithms.clear();
      for (const auto& s : *v) c.algorithms.push_back(algorithm_from_string(s));
    }

    r.opt_double("iht", "l", c.iht_l);
    r.opt_double("diht", "l", c.diht_l);
    r.num("diht", "max_iters", c.max_iters);
    r.num("diht", "delay_min", c.delay_min);
    r.num("diht", "delay_max", c.delay_max);

    r.opt_double("cbdiht", "l_tv", c.l_tv);
    if (auto v = r.raw("cbdiht", "l_tv_source")) c.l_tv_source = ltv_source_from_string(*v);
    r.num("cbdiht", "max_outer_iters", c.cbdiht_max_outer_iters);
    r.num("cbdiht", "max_time_steps", c.max_time_steps);

    r.num("subgrad", "a", c.subgrad_a);
    r.num("subgrad", "record_stride", c.subgrad_record_stride);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("config: ") + e.what());
  }

  if (c.problem_seeds.empty()) throw IoError("config: [problem] seeds must list at least one seed");
  if (c.families.empty()) throw IoError("config: [graph] families must list at least one family");
  if (c.algorithms.empty()) throw IoError("config: [algorithms] run must list at least one algorithm");
  if (c.graph_instances < 1) throw IoError("config: [graph] instances must be at least 1");
  if (c.accuracies.empty()) throw IoError("config: [experiment] accuracies must not be empty");
  for (double a : c.accuracies)
    if (!(a > 0.0)) throw IoError("config: accuracies must be positive");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string write_config(const ExperimentConfig& c) {
  const auto fd = [](double v) { return detail::fmt_double(v); };
  std::ostringstream os;
  os << "[experiment]\n"
     << "version = " << c.version << '\n'
     << "name = " << c.name << '\n'
     << "output = " << c.output << '\n'
     << "accuracies = " << join(c.accuracies, fd) << "\n\n";
  os << "[problem]\n"
     << "n = " << c.problem.n << '\n'
     << "m = " << c.problem.m << '\n'
     << "k = " << c.problem.k << '\n'
     << "p = " << c.problem.p << '\n'
     << "noise_std = " << fd(c.problem.noise_std) << '\n'
     << "spectral_cap = " << fd(c.problem.spectral_cap) << '\n'
     << "ensemble = " << to_string(c.problem.ensemble) << '\n'
     << "seeds = " << join(c.problem_seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n\n";
  os << "[graph]\n"
     << "families = " << join(c.families, [](GraphFamily f) { return to_string(f); }) << '\n'
     << "instances = " << c.graph_instances << '\n'
     << "seed = " << c.graph_seed << '\n'
     << "ba_attach = " << c.ba_attach << "\n\n";
  os << "[schedule]\n"
     << "time_varying = " << (c.time_varying ? "true" : "false") << '\n'
     << "subgraphs = " << c.subgraphs << '\n'
     << "retain_prob = " << fd(c.retain_prob) << '\n'
     << "seed = " << c.schedule_seed << "\n\n";
  os << "[algorithms]\n"
     << "run = " << join(c.algorithms, [](Algorithm a) { return to_string(a); }) << "\n\n";
  os << "[iht]\n"
     << "l = " << opt_text(c.iht_l) << "\n\n";
  os << "[diht]\n"
     << "l = " << opt_text(c.diht_l) << '\n'
     << "max_iters = " << c.max_iters << '\n'
     << "delay_min = " << c.delay_min << '\n'
     << "delay_max = " << c.delay_max << "\n\n";
  os << "[cbdiht]\n"
     << "l_tv = " << opt_text(c.l_tv) << '\n'
     << "l_tv_source = " << to_string(c.l_tv_source) << '\n'
     << "max_outer_iters = " << c.cbdiht_max_outer_iters << '\n'
     << "max_time_steps = " << c.max_time_steps << "\n\n";
  os << "[subgrad]\n"
     << "a = " << fd(c.subgrad_a) << '\n'
     << "record_stride = " << c.subgrad_record_stride << '\n';
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : write_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dsr
