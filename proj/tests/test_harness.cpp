#include "dsr/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace dsr;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dsr_test_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.name = "tiny";
  c.problem.n = 30;
  c.problem.m = 15;
  c.problem.k = 2;
  c.problem.p = 5;
  c.families = {GraphFamily::kErdosRenyi75};
  c.algorithms = {Algorithm::kDiht};
  c.max_iters = 2000;
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config parsing") {
    const auto c = parse(
        "; comment\n# another\n[experiment]\nversion = 1\nname = t\naccuracies = 1e-2 1e-4\n"
        "[problem]\nn = 40\nseeds = 3 4\nensemble = gaussian\n"
        "[graph]\nfamilies = ba geo05\n[algorithms]\nrun = diht subgrad\n"
        "[diht]\nl = 2.5\n[cbdiht]\nl_tv = auto\nl_tv_source = max\n");
    CHECK(c.name == "t");
    CHECK(c.accuracies == std::vector<double>{1e-2, 1e-4});
    CHECK(c.problem.n == 40);
    CHECK(c.problem.m == 50);  // default kept
    CHECK(c.problem.ensemble == Ensemble::kGaussian);
    CHECK(c.problem_seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(c.families == std::vector<GraphFamily>{GraphFamily::kBarabasiAlbert, GraphFamily::kGeometric05});
    CHECK(c.algorithms == std::vector<Algorithm>{Algorithm::kDiht, Algorithm::kSubgrad});
    CHECK(c.diht_l == 2.5);
    CHECK_FALSE(c.l_tv);
    CHECK(c.l_tv_source == LtvSource::kMaxConsensus);
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse("[bogus]\nx = 1\n"), IoError);
    CHECK_THROWS_AS(parse("[problem]\ncolour = red\n"), IoError);
    CHECK_THROWS_AS(parse("[problem]\nn = ten\n"), IoError);
    CHECK_THROWS_AS(parse("[experiment]\nversion = 2\n"), IoError);
    CHECK_THROWS_AS(parse("[graph]\nfamilies = torus\n"), IoError);
    CHECK_THROWS_AS(parse("[algorithms]\nrun = admm\n"), IoError);
    CHECK_THROWS_AS(parse("[experiment]\naccuracies = 0\n"), IoError);
    CHECK_THROWS_AS(parse("stray = 1\n"), IoError);
    CHECK_THROWS_AS(load_config("/nonexistent/dsr.ini"), IoError);
  }

  TEST_CASE("canonical config round trip and hash") {
    ExperimentConfig c = tiny();
    c.l_tv = 0.25;
    const std::string text = write_config(c);
    CHECK(write_config(parse(text)) == text);
    CHECK(config_hash(parse(text)) == config_hash(c));
    ExperimentConfig d = c;
    d.graph_seed += 1;
    CHECK(config_hash(d) != config_hash(c));
    CHECK(config_hash(c).size() == 16u);
  }

  TEST_CASE("shipped configs parse") {
    for (const char* name : {"desk_tv.ini", "static_table1.ini"}) {
      const fs::path p = fs::path(DSR_SOURCE_DIR) / "configs" / name;
      CHECK_NOTHROW(load_config(p.string()));
    }
  }

  TEST_CASE("minimal experiment yields a single cell") {
    const Report rep = run_experiment(tiny());
    REQUIRE(rep.runs.size() == 1u);
    const auto& r = rep.runs[0];
    CHECK(r.ok());
    CHECK(r.run_id == "diht-er75-g100-s1");
    CHECK(r.crossings.size() == 2u);
    CHECK(r.total.values == r.iterations * 4LL * (2 * 2 + 30));
    CHECK(rep.aggregates.size() == 2u);
  }

  TEST_CASE("diht cost per iteration is topology independent") {
    ExperimentConfig c = tiny();
    c.families = all_graph_families();
    const Report rep = run_experiment(c);
    REQUIRE(rep.runs.size() == 5u);
    for (const auto& r : rep.runs) {
      CHECK(r.ok());
      CHECK(r.iterations == rep.runs[0].iterations);
      CHECK(r.total.values == rep.runs[0].total.values);
    }
  }

  TEST_CASE("cell errors are captured") {
    ExperimentConfig c = tiny();
    c.problem.p = 40;  // more agents than measurements
    c.algorithms = {Algorithm::kDiht, Algorithm::kCbDiht};
    const Report rep = run_experiment(c);
    REQUIRE(rep.runs.size() == 2u);
    for (const auto& r : rep.runs) {
      CHECK_FALSE(r.ok());
      CHECK(r.status.rfind("error: ", 0) == 0);
      CHECK(r.status.find(',') == std::string::npos);
    }
  }

  TEST_CASE("unconverged cells report the budget spent") {
    ExperimentConfig c = tiny();
    c.algorithms = {Algorithm::kSubgrad};
    c.max_iters = 50;
    const Report rep = run_experiment(c);
    const auto& r = rep.runs.at(0);
    REQUIRE_FALSE(r.crossings.at(0).iter);
    std::ostringstream os;
    write_crossings_csv(rep.runs, os);
    std::istringstream is(os.str());
    for (const auto& [id, x] : read_crossings_csv(is)) {
      CHECK_FALSE(x.iter);
      CHECK(x.at.values == r.total.values);
      CHECK(x.at.time_steps == 50);
    }
    for (const auto& a : rep.aggregates) {
      CHECK(a.values == static_cast<double>(r.total.values));
      CHECK(a.converged_fraction == 0.0);
    }
  }

  TEST_CASE("report files") {
    const fs::path dir = fresh_dir("report");
    ExperimentConfig c = tiny();
    c.problem_seeds = {1, 2, 3, 4, 5};
    c.algorithms = {Algorithm::kDiht, Algorithm::kCbDiht};
    const Report rep = run_experiment(c);
    write_report(rep, dir.string());
    for (const char* f : {"runs.csv", "crossings.csv", "aggregate.csv", "curves.csv", "config.ini", "provenance.txt"})
      CHECK(fs::exists(dir / f));
    for (const auto& r : rep.runs) CHECK(fs::exists(dir / "runs" / (r.run_id + ".csv")));
    CHECK(slurp(dir / "provenance.txt").find(config_hash(c)) != std::string::npos);

    // Aggregate means recomputed from crossings.csv.
    const auto cross = read_csv(dir / "crossings.csv");
    const auto runs = read_csv(dir / "runs.csv");
    std::map<std::string, std::string> alg_of;
    for (std::size_t i = 1; i < runs.size(); ++i) alg_of[runs[i][0]] = runs[i][5];
    const auto agg = read_csv(dir / "aggregate.csv");
    REQUIRE(agg.size() == 1 + 2 * 2);
    CHECK(agg[0] == std::vector<std::string>{"graph", "algorithm", "accuracy", "values", "time_steps",
                                             "converged_fraction"});
    for (std::size_t i = 1; i < agg.size(); ++i) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t j = 1; j < cross.size(); ++j) {
        if (alg_of[cross[j][0]] != agg[i][1] || std::stod(cross[j][1]) != std::stod(agg[i][2])) continue;
        sum += std::stod(cross[j][4]);
        ++n;
      }
      CHECK(n == 5);
      CHECK(std::stod(agg[i][3]) == doctest::Approx(sum / n).epsilon(1e-12));
    }

    // Per-run file layout.
    const auto per = read_csv(dir / "runs" / (rep.runs[0].run_id + ".csv"));
    CHECK(per[0] == std::vector<std::string>{"iter", "err", "values_cum", "messages_cum", "broadcasts_cum",
                                             "time_steps_cum"});
    const auto ext = read_csv(dir / "runs" / (rep.runs[1].run_id + ".csv"));
    CHECK(ext[0].size() == 10u);
    fs::remove_all(dir);
  }

  TEST_CASE("runs csv round trip") {
    const Report rep = run_experiment(tiny());
    std::ostringstream os;
    write_runs_csv(rep.runs, os);
    std::istringstream is(os.str());
    const auto back = read_runs_csv(is);
    REQUIRE(back.size() == 1u);
    CHECK(back[0].run_id == rep.runs[0].run_id);
    CHECK(back[0].total.values == rep.runs[0].total.values);
    CHECK(back[0].total.setup_messages == rep.runs[0].total.setup_messages);
    CHECK(back[0].step_constant == rep.runs[0].step_constant);
    std::ostringstream again;
    write_runs_csv(back, again);
    CHECK(again.str() == os.str());
  }

  TEST_CASE("empty report gives header-only files") {
    const fs::path dir = fresh_dir("empty");
    Report rep;
    rep.config = tiny();
    write_report(rep, dir.string());
    for (const char* f : {"runs.csv", "crossings.csv", "aggregate.csv", "curves.csv"}) {
      const std::string s = slurp(dir / f);
      CHECK(std::count(s.begin(), s.end(), '\n') == 1);
    }
    fs::remove_all(dir);
  }

  TEST_CASE("unwritable output is an explicit error") {
    Report rep;
    CHECK_THROWS_AS(write_report(rep, "/proc/dsr_cannot_write_here"), IoError);
  }

  TEST_CASE("replay is byte-identical") {
    const fs::path a = fresh_dir("replay_a");
    const fs::path b = fresh_dir("replay_b");
    ExperimentConfig c = tiny();
    c.algorithms = {Algorithm::kDiht, Algorithm::kCbDiht, Algorithm::kSubgrad};
    c.max_time_steps = 5000;
    write_report(run_experiment(c), a.string());
    write_report(run_experiment(c), b.string());
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), a);
      CHECK(slurp(e.path()) == slurp(b / rel));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}
