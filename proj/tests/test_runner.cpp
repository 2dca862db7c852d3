#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "dagcd/runner.hpp"
#include "support.hpp"

using namespace dagcd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DAGCD_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.out_dir = out;
  cfg.graph.family = GraphFamily::scalefree;
  cfg.graph.p = 12;
  cfg.sample.n_per_block = 15;
  cfg.path.grid_size = 10;
  cfg.seed = 5;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("simulate, fit and evaluate on a small problem") {
  auto dir = testing::scratch_dir("runner_pipeline");
  auto cfg = small_config(dir / "sim");
  REQUIRE(run_simulate(cfg) == kExitOk);
  for (auto name : {"data.csv", "interventions.csv", "truth.edges", "truth.dot", "manifest.json"})
    CHECK(fs::exists(dir / "sim" / name));

  auto fit = small_config(dir / "fit");
  fit.data = dir / "sim" / "data.csv";
  fit.interventions = dir / "sim" / "interventions.csv";
  const int rc = run_fit(fit);
  CHECK((rc == kExitOk || rc == kExitStalled));
  for (auto name : {"path.csv", "pilot_path.csv", "selected.edges", "selected.dot", "manifest.json"})
    CHECK(fs::exists(dir / "fit" / name));
  CHECK(slurp(dir / "fit" / "entries" / "entry_01.edges").empty());
  CHECK(fs::exists(dir / "fit" / "entries" / "entry_10.edges"));

  auto path_rows = lines(slurp(dir / "fit" / "path.csv"));
  REQUIRE(path_rows.size() == 11);
  CHECK(path_rows[0] == "m,lambda,edges,penalized_objective,refit_loglik,dr,selected_flag");
  int flagged = 0;
  for (std::size_t k = 1; k < path_rows.size(); ++k) flagged += path_rows[k].back() == '1';
  CHECK(flagged == 1);

  auto ev = small_config(dir / "eval");
  ev.truth = dir / "sim" / "truth.edges";
  ev.estimate = dir / "fit" / "selected.edges";
  CHECK(run_evaluate(ev) == kExitOk);
  auto rows = lines(slurp(dir / "eval" / "evaluation.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].find(",dag,") != std::string::npos);
  CHECK(rows[2].find(",skeleton,") != std::string::npos);

  // The pipeline's first replicate is the bench replicate 1.
  auto rep = run_replicate(small_config(dir / "unused"), GraphFamily::scalefree, 0);
  REQUIRE(rep.ok);
  auto truth = read_edge_list(dir / "sim" / "truth.edges", 12);
  auto est = read_edge_list(dir / "fit" / "selected.edges", 12);
  CHECK(score_dag(truth, est).E == rep.dag.E);
  CHECK(score_dag(truth, est).P == rep.dag.P);
}

TEST_CASE("outputs are byte-identical across runs") {
  auto dir = testing::scratch_dir("runner_repeat");
  for (auto run : {"a", "b"}) {
    auto cfg = small_config(dir / run / "sim");
    run_simulate(cfg);
    auto fit = small_config(dir / run / "fit");
    fit.data = dir / run / "sim" / "data.csv";
    fit.interventions = dir / run / "sim" / "interventions.csv";
    fit.trace = true;
    run_fit(fit);
  }
  for (auto name : {"sim/data.csv", "sim/interventions.csv", "sim/truth.edges", "fit/path.csv", "fit/pilot_path.csv",
                    "fit/selected.edges", "fit/trace.csv"})
    CHECK_MESSAGE(slurp(dir / "a" / name) == slurp(dir / "b" / name), name);
  // Manifests differ only in the recorded paths.
  auto a = nlohmann::json::parse(slurp(dir / "a" / "fit" / "manifest.json"));
  auto b = nlohmann::json::parse(slurp(dir / "b" / "fit" / "manifest.json"));
  CHECK(a["selected_m"] == b["selected_m"]);
  CHECK(a["lambda_1"] == b["lambda_1"]);
}

TEST_CASE("select re-runs the rule on a fit directory") {
  auto dir = testing::scratch_dir("runner_select");
  auto cfg = small_config(dir / "sim");
  run_simulate(cfg);
  auto fit = small_config(dir / "fit");
  fit.data = dir / "sim" / "data.csv";
  fit.interventions = dir / "sim" / "interventions.csv";
  run_fit(fit);

  auto sel = small_config(dir / "sel");
  sel.fit_dir = dir / "fit";
  CHECK(run_select(sel) == kExitOk);
  CHECK(slurp(dir / "sel" / "selected.edges") == slurp(dir / "fit" / "selected.edges"));

  sel.out_dir = dir / "sel0";
  sel.match_edges = 0;
  CHECK(run_select(sel) == kExitOk);
  CHECK(slurp(dir / "sel0" / "selected.edges").empty());
  auto j = nlohmann::json::parse(slurp(dir / "sel0" / "selection.json"));
  CHECK(j.contains("selected_m"));
}

TEST_CASE("JSON configuration and flag precedence") {
  RunConfig cfg;
  nlohmann::json j = {{"p", 30}, {"grid_size", 12}, {"family", "small-world"}, {"shuffle_labels", false},
                      {"seed", 9}};
  apply_json_config(cfg, j, {"grid_size"});
  CHECK(cfg.graph.p == 30);
  CHECK(cfg.path.grid_size == 30);
  CHECK(cfg.graph.family == GraphFamily::smallworld);
  CHECK_FALSE(cfg.graph.shuffle_labels);
  CHECK(cfg.seed == 9);
  auto round = to_json(cfg);
  RunConfig back;
  apply_json_config(back, round, {});
  CHECK(to_json(back) == round);
  CHECK_THROWS(apply_json_config(cfg, nlohmann::json::array(), {}));
}

TEST_CASE("command-line front end") {
  auto dir = testing::scratch_dir("runner_cli");
  const std::string sim = (dir / "sim").string();
  CHECK(cli("simulate --family polytree --p 10 --n-per-block 10 --seed 3 --out " + sim) == 0);
  auto truth = read_edge_list(dir / "sim" / "truth.edges", 10);
  CHECK(truth.edge_count() == 9);

  // Config file values apply unless a flag overrides them.
  {
    std::ofstream(dir / "cfg.json") << R"({"p": 15, "family": "bipartite", "n_per_block": 4})";
  }
  const std::string sim2 = (dir / "sim2").string();
  CHECK(cli("--config " + (dir / "cfg.json").string() + " simulate --p 20 --out " + sim2) == 0);
  auto m = nlohmann::json::parse(slurp(dir / "sim2" / "manifest.json"));
  CHECK(m["config"]["p"] == 20);
  CHECK(m["config"]["family"] == "bipartite");
  CHECK(m["n"] == 80);

  const std::string fit = (dir / "fit").string();
  const int rc = cli("fit --data " + sim + "/data.csv --interventions " + sim + "/interventions.csv --grid-size 8 --out " +
                     fit);
  CHECK((rc == 0 || rc == 2));
  CHECK(cli("evaluate --truth " + sim + "/truth.edges --estimate " + fit + "/selected.edges --p 10 --out " + fit) == 0);
  CHECK(fs::exists(dir / "fit" / "evaluation.csv"));

  // Errors: missing input, unknown family, bad grid.
  CHECK(cli("fit --data " + (dir / "nope.csv").string() + " --out " + fit) != 0);
  CHECK(cli("simulate --family lattice --p 10 --n-per-block 2 --out " + sim) == 1);
  CHECK(cli("fit --data " + sim + "/data.csv --grid-ratio 2 --out " + fit) == 1);
  CHECK(cli("") != 0);
}

TEST_CASE("bench with one replicate") {
  auto dir = testing::scratch_dir("runner_bench");
  auto cfg = small_config(dir);
  cfg.families = {GraphFamily::scalefree, GraphFamily::polytree};
  cfg.graph.p = 10;
  cfg.replicates = 1;
  cfg.threads = 2;
  const int rc = run_bench(cfg);
  CHECK((rc == kExitOk || rc == kExitStalled));
  auto summary = lines(slurp(dir / "bench_summary.csv"));
  REQUIRE(summary.size() == 5);
  for (std::size_t k = 1; k < summary.size(); ++k) CHECK(summary[k].find("(0)") != std::string::npos);
  auto manifest = nlohmann::json::parse(slurp(dir / "bench_manifest.json"));
  CHECK(manifest["cells"].size() == 2);
  CHECK(lines(slurp(dir / "bench_replicates.csv")).size() == 5);

  // Thread count does not change results.
  auto one = cfg;
  one.out_dir = dir / "single";
  one.threads = 1;
  run_bench(one);
  CHECK(slurp(dir / "single" / "bench_replicates.csv") == slurp(dir / "bench_replicates.csv"));
}

TEST_CASE("thread count default") {
  ::setenv("DAGCD_THREADS", "3", 1);
  CHECK(default_thread_count() == 3);
  ::setenv("DAGCD_THREADS", "zero", 1);
  CHECK(default_thread_count() == 1);
  ::unsetenv("DAGCD_THREADS");
  CHECK(default_thread_count() == 1);
}
