#include "dagcd/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dagcd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

void write_json(const json& j, const fs::path& file) { open_out(file) << j.dump(2) << '\n'; }

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return json::parse(in);
}

std::string entry_name(std::size_t m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "entry_%02zu.edges", m + 1);
  return buf;
}

std::size_t chosen_index(const RunConfig& cfg, const SolutionPath& path, const Selection& sel) {
  return cfg.match_edges ? match_edge_count(path, *cfg.match_edges) : sel.index;
}

struct PathSummaryRow {
  double lambda = 0.0;
  std::size_t edges = 0;
  double refit_loglik = 0.0;
};

std::vector<PathSummaryRow> read_path_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  std::vector<PathSummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 5) throw std::runtime_error("malformed path summary row: " + line);
    rows.push_back({std::stod(f[1]), static_cast<std::size_t>(std::stoul(f[2])), std::stod(f[4])});
  }
  return rows;
}

template <class T>
void take(const json& j, const std::set<std::string>& skip, const char* key, T& field) {
  if (j.contains(key) && !skip.count(key)) field = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  path.validate();
  solver.validate();
  sample.validate();
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

int default_thread_count() {
  if (const char* env = std::getenv("DAGCD_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

void apply_json_config(RunConfig& cfg, const json& j, const std::set<std::string>& skip) {
  if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  std::string family;
  take(j, skip, "family", family);
  if (!family.empty()) cfg.graph.family = parse_family(family);
  if (j.contains("families") && !skip.count("families")) {
    cfg.families.clear();
    for (const auto& f : j.at("families")) cfg.families.push_back(parse_family(f.get<std::string>()));
  }
  take(j, skip, "p", cfg.graph.p);
  take(j, skip, "rewire_prob", cfg.graph.rewire_prob);
  take(j, skip, "shuffle_labels", cfg.graph.shuffle_labels);
  take(j, skip, "n_per_block", cfg.sample.n_per_block);
  take(j, skip, "n_obs", cfg.sample.n_obs);
  take(j, skip, "effect_size", cfg.sample.effect_size);
  take(j, skip, "grid_size", cfg.path.grid_size);
  take(j, skip, "grid_ratio", cfg.path.ratio);
  take(j, skip, "gamma", cfg.path.gamma);
  take(j, skip, "alpha_select", cfg.path.alpha_select);
  take(j, skip, "inner_tol", cfg.solver.inner_tol);
  take(j, skip, "max_inner", cfg.solver.max_inner);
  take(j, skip, "max_outer", cfg.solver.max_outer);
  take(j, skip, "hessian_floor", cfg.solver.b);
  take(j, skip, "random_order", cfg.solver.random_pair_order);
  take(j, skip, "seed", cfg.seed);
  take(j, skip, "replicates", cfg.replicates);
  take(j, skip, "threads", cfg.threads);
  take(j, skip, "trace", cfg.trace);
  if (j.contains("match_edges") && !skip.count("match_edges")) cfg.match_edges = j.at("match_edges").get<std::size_t>();
  std::string path;
  take(j, skip, "out", path);
  if (!path.empty()) cfg.out_dir = path;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["family"] = to_string(cfg.graph.family);
  if (!cfg.families.empty()) {
    j["families"] = json::array();
    for (auto f : cfg.families) j["families"].push_back(to_string(f));
  }
  j["p"] = cfg.graph.p;
  j["rewire_prob"] = cfg.graph.rewire_prob;
  j["shuffle_labels"] = cfg.graph.shuffle_labels;
  j["n_per_block"] = cfg.sample.n_per_block;
  j["n_obs"] = cfg.sample.n_obs;
  j["effect_size"] = cfg.sample.effect_size;
  j["grid_size"] = cfg.path.grid_size;
  j["grid_ratio"] = cfg.path.ratio;
  j["gamma"] = cfg.path.gamma;
  j["alpha_select"] = cfg.path.alpha_select;
  j["inner_tol"] = cfg.solver.inner_tol;
  j["max_inner"] = cfg.solver.max_inner;
  j["max_outer"] = cfg.solver.max_outer;
  j["hessian_floor"] = cfg.solver.b;
  j["random_order"] = cfg.solver.random_pair_order;
  j["seed"] = cfg.seed;
  j["replicates"] = cfg.replicates;
  j["trace"] = cfg.trace;
  if (cfg.match_edges) j["match_edges"] = *cfg.match_edges;
  return j;
}

void write_path_csv(const SolutionPath& path, const Selection& selection, std::size_t chosen, const fs::path& file) {
  auto out = open_out(file);
  out << "m,lambda,edges,penalized_objective,refit_loglik,dr,selected_flag\n";
  for (std::size_t m = 0; m < path.entries.size(); ++m) {
    const auto& e = path.entries[m];
    out << m + 1 << ',' << fmt(e.lambda) << ',' << e.edges << ',' << fmt(e.penalized_objective) << ','
        << fmt(e.refit_loglik) << ',';
    // dr column holds dr_(m-1, m); undefined ratios are left empty.
    if (m > 0 && m - 1 < selection.dr.size() && std::isfinite(selection.dr[m - 1])) out << fmt(selection.dr[m - 1]);
    out << ',' << (m == chosen ? 1 : 0) << '\n';
  }
}

void write_trace_csv(const std::vector<TraceRow>& trace, const fs::path& file) {
  auto out = open_out(file);
  out << "lambda_index,sweep,iteration,objective,max_change,active_edges\n";
  for (const auto& t : trace)
    out << t.lambda_index + 1 << ',' << t.sweep << ',' << t.iteration << ',' << fmt(t.objective) << ','
        << fmt(t.max_change) << ',' << t.active_edges << '\n';
}

int run_simulate(const RunConfig& cfg) {
  cfg.validate();
  GraphSpec gspec = cfg.graph;
  gspec.seed = derive_seed(cfg.seed, 0, 0);
  SampleSpec sspec = cfg.sample;
  sspec.seed = derive_seed(cfg.seed, 0, 1);
  if (!sspec.interventional() && sspec.n_obs == 0) throw std::invalid_argument("simulate needs --n-per-block or --n-obs");
  const auto g = generate_graph(gspec);
  const auto ds = sample_data(g, sspec);

  fs::create_directories(cfg.out_dir);
  write_csv(ds, cfg.out_dir / "data.csv");
  if (ds.has_interventions()) write_interventions_csv(ds, cfg.out_dir / "interventions.csv");
  write_edge_list(g, cfg.out_dir / "truth.edges");
  write_dot(g, cfg.out_dir / "truth.dot", "truth");

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = to_json(cfg);
  manifest["s0"] = g.edge_count();
  manifest["n"] = ds.n();
  manifest["graph_seed"] = gspec.seed;
  manifest["sample_seed"] = sspec.seed;
  manifest["files"] = {{"data", "data.csv"}, {"truth", "truth.edges"}};
  if (ds.has_interventions()) manifest["files"]["interventions"] = "interventions.csv";
  write_json(manifest, cfg.out_dir / "manifest.json");
  std::cout << "simulated " << to_string(gspec.family) << " graph with " << g.edge_count() << " edges, n = " << ds.n()
            << " -> " << cfg.out_dir.string() << '\n';
  return kExitOk;
}

int run_fit(const RunConfig& cfg) {
  cfg.validate();
  const auto ds = load_csv(cfg.data, cfg.interventions);
  PathOptions options;
  options.trace = cfg.trace;
  const auto fit = fit_adaptive(ds, cfg.path, cfg.solver, options);
  const std::size_t chosen = chosen_index(cfg, fit.path, fit.selection);
  const std::size_t pilot_chosen = fit.pilot_selection.index;

  fs::create_directories(cfg.out_dir / "entries");
  write_path_csv(fit.pilot, fit.pilot_selection, pilot_chosen, cfg.out_dir / "pilot_path.csv");
  write_path_csv(fit.path, fit.selection, chosen, cfg.out_dir / "path.csv");
  for (std::size_t m = 0; m < fit.path.entries.size(); ++m)
    write_edge_list(fit.path.entries[m].graph, cfg.out_dir / "entries" / entry_name(m));
  const auto& selected = fit.path.entries[chosen];
  write_edge_list(selected.graph, cfg.out_dir / "selected.edges");
  write_dot(selected.graph, cfg.out_dir / "selected.dot", "selected");
  if (cfg.trace) {
    write_trace_csv(fit.pilot.trace, cfg.out_dir / "pilot_trace.csv");
    write_trace_csv(fit.path.trace, cfg.out_dir / "trace.csv");
  }

  const bool stalled = fit.pilot.any_stalled() || fit.path.any_stalled();
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = to_json(cfg);
  manifest["data"] = cfg.data.string();
  if (cfg.interventions) manifest["interventions"] = cfg.interventions->string();
  manifest["n"] = ds.n();
  manifest["p"] = ds.p();
  manifest["levels"] = ds.levels();
  manifest["lambda_1"] = fit.path.entries.front().lambda;
  manifest["pilot_lambda_1"] = fit.pilot.entries.front().lambda;
  manifest["pilot_selected_m"] = pilot_chosen + 1;
  manifest["selected_m"] = chosen + 1;
  manifest["selected_edges"] = selected.edges;
  manifest["selection_rule"] = cfg.match_edges ? "match_edges" : "difference_ratio";
  manifest["degenerate_path"] = fit.selection.degenerate;
  manifest["stalled"] = stalled;
  json entries = json::array();
  for (const auto& e : fit.path.entries)
    entries.push_back({{"sweeps", e.status.sweeps},
                       {"stable", e.status.stable},
                       {"inner_capped", e.status.inner_capped},
                       {"line_search_stalls", e.status.line_search_stalls},
                       {"refit_converged", e.refit_converged}});
  manifest["solver_status"] = entries;
  write_json(manifest, cfg.out_dir / "manifest.json");

  std::cout << "selected m = " << chosen + 1 << " of " << fit.path.entries.size() << " with " << selected.edges
            << " edges -> " << cfg.out_dir.string() << '\n';
  if (stalled) std::cerr << "warning: solver stall flags raised; see manifest.json\n";
  return stalled ? kExitStalled : kExitOk;
}

int run_select(const RunConfig& cfg) {
  cfg.path.validate();
  const json fit_manifest = read_json(cfg.fit_dir / "manifest.json");
  const int p = fit_manifest.at("p").get<int>();
  const auto rows = read_path_csv(cfg.fit_dir / "path.csv");
  std::vector<std::size_t> edges;
  std::vector<double> ll;
  for (const auto& r : rows) {
    edges.push_back(r.edges);
    ll.push_back(r.refit_loglik);
  }
  const Selection sel = select_model(edges, ll, cfg.path.alpha_select);
  const std::size_t chosen = cfg.match_edges ? match_edge_count(edges, *cfg.match_edges) : sel.index;
  const auto g = read_edge_list(cfg.fit_dir / "entries" / entry_name(chosen), p);

  fs::create_directories(cfg.out_dir);
  write_edge_list(g, cfg.out_dir / "selected.edges");
  write_dot(g, cfg.out_dir / "selected.dot", "selected");
  json out;
  out["format_version"] = kFormatVersion;
  out["fit_dir"] = cfg.fit_dir.string();
  out["selection_rule"] = cfg.match_edges ? "match_edges" : "difference_ratio";
  out["alpha_select"] = cfg.path.alpha_select;
  if (cfg.match_edges) out["match_edges"] = *cfg.match_edges;
  out["selected_m"] = chosen + 1;
  out["selected_edges"] = g.edge_count();
  out["lambda"] = rows[chosen].lambda;
  out["degenerate_path"] = sel.degenerate;
  write_json(out, cfg.out_dir / "selection.json");
  std::cout << "selected m = " << chosen + 1 << " with " << g.edge_count() << " edges\n";
  return kExitOk;
}

int run_evaluate(const RunConfig& cfg) {
  const int p = cfg.graph.p;
  const auto truth = read_edge_list(cfg.truth, p);
  const auto est = read_edge_list(cfg.estimate, p);
  const auto dag = score_dag(truth, est);
  const auto skel = score_skeleton(truth, est);
  std::ostringstream table;
  write_report_header(table);
  write_report_row(table, cfg.estimate.filename().string(), dag);
  write_report_row(table, cfg.estimate.filename().string(), skel);
  fs::create_directories(cfg.out_dir);
  open_out(cfg.out_dir / "evaluation.csv") << table.str();
  std::cout << table.str();
  return kExitOk;
}

ReplicateResult run_replicate(const RunConfig& cfg, GraphFamily family, int replicate) {
  ReplicateResult r;
  r.replicate = replicate;
  const auto start = std::chrono::steady_clock::now();
  try {
    GraphSpec gspec = cfg.graph;
    gspec.family = family;
    gspec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate), 0);
    SampleSpec sspec = cfg.sample;
    sspec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate), 1);
    const auto truth = generate_graph(gspec);
    const auto ds = sample_data(truth, sspec);
    const auto fit = fit_adaptive(ds, cfg.path, cfg.solver);
    r.selected_index = chosen_index(cfg, fit.path, fit.selection);
    const auto& est = fit.path.entries[r.selected_index].graph;
    r.dag = score_dag(truth, est);
    r.skeleton = score_skeleton(truth, est);
    r.stalled = fit.pilot.any_stalled() || fit.path.any_stalled();
    for (const auto* path : {&fit.pilot, &fit.path})
      for (const auto& e : path->entries) {
        r.max_sweeps = std::max(r.max_sweeps, e.status.sweeps);
        r.all_stable = r.all_stable && e.status.stable;
      }
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

int run_bench(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.sample.interventional() && cfg.sample.n_obs == 0) throw std::invalid_argument("bench needs --n-per-block or --n-obs");
  const std::vector<GraphFamily> families = cfg.families.empty() ? std::vector<GraphFamily>{cfg.graph.family} : cfg.families;

  struct Task {
    std::size_t cell;
    int replicate;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < families.size(); ++c)
    for (int k = 0; k < cfg.replicates; ++k) tasks.push_back({c, k});
  std::vector<ReplicateResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      results[t] = run_replicate(cfg, families[tasks[t].cell], tasks[t].replicate);
      std::lock_guard<std::mutex> lock(log_mutex);
      const auto& r = results[t];
      std::cerr << to_string(families[tasks[t].cell]) << " replicate " << r.replicate + 1 << ": "
                << (r.ok ? "TPR " + fmt(r.dag.TPR) + " FDR " + fmt(r.dag.FDR) : "failed: " + r.error) << '\n';
    }
  };
  const int nthreads = std::min<int>(cfg.threads, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < nthreads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  fs::create_directories(cfg.out_dir);
  auto reps = open_out(cfg.out_dir / "bench_replicates.csv");
  auto summary = open_out(cfg.out_dir / "bench_summary.csv");
  auto timing = open_out(cfg.out_dir / "bench_timing.csv");
  write_report_header(reps);
  write_report_header(summary);
  timing << "family,replicate,seconds\n";
  json cells = json::array();
  bool all_ok = true, any_stall = false;
  const int n = cfg.sample.interventional() ? cfg.graph.p * cfg.sample.n_per_block : cfg.sample.n_obs;
  for (std::size_t c = 0; c < families.size(); ++c) {
    const std::string fam = to_string(families[c]);
    const std::string cell = fam + "(" + std::to_string(n) + " " + std::to_string(cfg.graph.p) + ")";
    std::vector<EvalReport> dags, skels;
    int failures = 0, stalls = 0, stable_runs = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].cell != c) continue;
      const auto& r = results[t];
      timing << fam << ',' << r.replicate + 1 << ',' << fmt(r.seconds) << '\n';
      if (!r.ok) {
        ++failures;
        continue;
      }
      const std::string label = cell + " rep " + std::to_string(r.replicate + 1);
      write_report_row(reps, label, r.dag);
      write_report_row(reps, label, r.skeleton);
      dags.push_back(r.dag);
      skels.push_back(r.skeleton);
      stalls += r.stalled ? 1 : 0;
      stable_runs += r.all_stable && r.max_sweeps <= cfg.solver.max_outer ? 1 : 0;
    }
    json cj{{"family", fam}, {"n", n}, {"p", cfg.graph.p}, {"replicates", cfg.replicates},
            {"failures", failures}, {"stalled", stalls}, {"stable_within_cap", stable_runs},
            {"complete", failures == 0}};
    if (!dags.empty()) {
      const auto ad = aggregate(dags);
      const auto as = aggregate(skels);
      write_aggregate_row(summary, cell, ad);
      write_aggregate_row(summary, cell, as);
      cj["dag"] = {{"TPR", ad.TPR.mean}, {"TPR_sd", ad.TPR.sd}, {"FDR", ad.FDR.mean}, {"FDR_sd", ad.FDR.sd}, {"P", ad.P.mean}};
      cj["skeleton"] = {{"TPR", as.TPR.mean}, {"TPR_sd", as.TPR.sd}, {"FDR", as.FDR.mean}, {"FDR_sd", as.FDR.sd}};
      std::cout << cell << ": P " << fmt(ad.P.mean) << "  TPR " << fmt(ad.TPR.mean) << " (" << fmt(ad.TPR.sd)
                << ")  FDR " << fmt(ad.FDR.mean) << " (" << fmt(ad.FDR.sd) << ")  skeleton TPR " << fmt(as.TPR.mean)
                << " FDR " << fmt(as.FDR.mean) << '\n';
    }
    all_ok = all_ok && failures == 0;
    any_stall = any_stall || stalls > 0;
    cells.push_back(cj);
  }
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = to_json(cfg);
  manifest["cells"] = cells;
  write_json(manifest, cfg.out_dir / "bench_manifest.json");
  if (!all_ok) return kExitFailure;
  return any_stall ? kExitStalled : kExitOk;
}

}  // namespace dagcd
