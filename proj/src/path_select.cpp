#include "dagcd/path_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace dagcd {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void PathConfig::validate() const {
  if (grid_size < 2) throw std::invalid_argument("grid size must be at least 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("grid ratio must lie in (0, 1)");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(alpha_select > 0.0 && alpha_select <= 1.0)) throw std::invalid_argument("alpha_select must lie in (0, 1]");
}

bool SolutionPath::any_stalled() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const PathEntry& e) { return e.status.stalled() || !e.refit_converged; });
}

ParamVector empty_model(const CategoricalDataset& ds) {
  ParamVector beta(ds.levels());
  for (int j = 0; j < ds.p(); ++j) {
    const auto& rows = ds.observational_rows(j);
    if (rows.empty()) continue;
    const int r = ds.levels(j);
    std::vector<double> freq(r, 0.0);
    for (int h : rows) freq[ds.value(h, j) - 1] += 1.0;
    const double n = static_cast<double>(rows.size());
    const double floor = 1.0 / (2.0 * n);
    auto b0 = beta.intercepts(j);
    const double base = std::max(freq[0] / n, floor);
    for (int l = 0; l < r; ++l) b0[l] = std::log(std::max(freq[l] / n, floor) / base);
  }
  return beta;
}

double lambda_max(const CategoricalDataset& ds, const PenaltyConfig& weights) {
  if (weights.p != ds.p()) throw std::invalid_argument("weight matrix does not match dataset");
  const ParamVector beta = empty_model(ds);
  double best = 0.0;
  std::vector<double> grad;
  for (int j = 0; j < ds.p(); ++j) {
    // A node constant over O_j has nothing to explain; the frequency floor would otherwise leave a spurious gradient.
    const auto& rows = ds.observational_rows(j);
    if (std::all_of(rows.begin(), rows.end(), [&](int h) { return ds.value(h, j) == ds.value(rows.front(), j); })) continue;
    NodeLikelihood model(ds, beta, j);
    for (int i = 0; i < ds.p(); ++i) {
      if (i == j) continue;
      grad.assign(beta.group(j, i).size(), 0.0);
      model.gradient(i, grad);
      const double g = norm2(grad);
      if (g == 0.0) continue;
      const double w = weights.weight(j, i);
      if (!(w > 0.0)) throw std::invalid_argument("lambda_max needs positive weights");
      best = std::max(best, g / w);
    }
  }
  return best * (1.0 + 1e-9);
}

std::vector<double> lambda_grid(double lambda1, const PathConfig& cfg) {
  cfg.validate();
  if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda_1 must be positive");
  std::vector<double> grid(cfg.grid_size);
  const double step = std::log(cfg.ratio) / (cfg.grid_size - 1);
  for (int m = 0; m < cfg.grid_size; ++m) grid[m] = lambda1 * std::exp(step * m);
  grid.front() = lambda1;
  grid.back() = lambda1 * cfg.ratio;
  return grid;
}

const Refitter::NodeFit& Refitter::fit_node(int node, const std::vector<int>& parents) {
  auto key = std::make_pair(node, parents);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  const auto& ds = *ds_;
  const auto& rows = ds.observational_rows(node);
  const int r = ds.levels(node);
  const int m = static_cast<int>(rows.size());
  std::vector<int> col_offset(parents.size());
  int q = 1;
  for (std::size_t a = 0; a < parents.size(); ++a) {
    col_offset[a] = q;
    q += ds.levels(parents[a]) - 1;
  }

  // Sparse design: each row has the intercept plus one column per parent not at level 1.
  std::vector<int> start(m + 1, 0);
  std::vector<int> cols;
  std::vector<int> y(m);
  for (int k = 0; k < m; ++k) {
    const int h = rows[k];
    cols.push_back(0);
    for (std::size_t a = 0; a < parents.size(); ++a) {
      int v = ds.value(h, parents[a]);
      if (v >= 2) cols.push_back(col_offset[a] + v - 2);
    }
    start[k + 1] = static_cast<int>(cols.size());
    y[k] = ds.value(h, node) - 1;
  }

  // Baseline coding: theta(l - 1, c) for levels l = 2..r, level 1 fixed at zero.
  const int dim = (r - 1) * q;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  std::vector<double> eta(r), prob(r);

  auto evaluate = [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    double ll = 0.0;
    if (grad) grad->setZero(dim);
    if (hess) hess->setZero(dim, dim);
    for (int k = 0; k < m; ++k) {
      eta[0] = 0.0;
      for (int l = 1; l < r; ++l) {
        double s = 0.0;
        for (int e = start[k]; e < start[k + 1]; ++e) s += t[(l - 1) * q + cols[e]];
        eta[l] = s;
      }
      const double top = *std::max_element(eta.begin(), eta.end());
      double total = 0.0;
      for (int l = 0; l < r; ++l) total += (prob[l] = std::exp(eta[l] - top));
      for (double& v : prob) v /= total;
      ll += eta[y[k]] - top - std::log(total);
      if (!grad) continue;
      for (int l = 1; l < r; ++l) {
        const double resid = (y[k] == l ? 1.0 : 0.0) - prob[l];
        for (int e = start[k]; e < start[k + 1]; ++e) (*grad)[(l - 1) * q + cols[e]] += resid;
      }
      for (int l = 1; l < r; ++l)
        for (int l2 = 1; l2 < r; ++l2) {
          const double w = (l == l2 ? prob[l] : 0.0) - prob[l] * prob[l2];
          for (int e = start[k]; e < start[k + 1]; ++e)
            for (int e2 = start[k]; e2 < start[k + 1]; ++e2)
              (*hess)((l - 1) * q + cols[e], (l2 - 1) * q + cols[e2]) += w;
        }
    }
    return ll;
  };
  auto penalized = [&](const Eigen::VectorXd& t, double ll) { return ll - 0.5 * ridge_ * t.squaredNorm(); };

  NodeFit fit;
  Eigen::VectorXd grad(dim);
  Eigen::MatrixXd info(dim, dim);
  double ll = evaluate(theta, &grad, &info);
  double obj = penalized(theta, ll);
  fit.converged = false;
  for (int iter = 0; iter < 200 && m > 0; ++iter) {
    grad -= ridge_ * theta;
    info.diagonal().array() += ridge_;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    for (int halving = 0; halving < 40; ++halving) {
      trial = theta + scale * step;
      trial_ll = evaluate(trial, nullptr, nullptr);
      if (penalized(trial, trial_ll) >= obj - 1e-12 * (1.0 + std::abs(obj))) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    const double change = (scale * step).cwiseAbs().maxCoeff();
    theta = trial;
    ll = evaluate(theta, &grad, &info);
    obj = penalized(theta, ll);
    if (change < 1e-10) {
      fit.converged = true;
      break;
    }
  }
  if (m == 0) fit.converged = true;
  if (!fit.converged && m > 0) {
    Eigen::VectorXd g = grad - ridge_ * theta;
    fit.converged = g.cwiseAbs().maxCoeff() < 1e-8 * (1.0 + m);
  }
  fit.loglik = m > 0 ? ll : 0.0;

  // Symmetric form: intercepts keep beta_{j10} = 0, groups are centred over levels.
  fit.blocks.assign(r, 0.0);
  for (int l = 1; l < r; ++l) fit.blocks[l] = theta[(l - 1) * q];
  for (std::size_t a = 0; a < parents.size(); ++a) {
    const int d = ds.levels(parents[a]) - 1;
    for (int l = 0; l < r; ++l)
      for (int kk = 0; kk < d; ++kk) fit.blocks.push_back(l == 0 ? 0.0 : theta[(l - 1) * q + col_offset[a] + kk]);
    const std::size_t base = fit.blocks.size() - static_cast<std::size_t>(d) * r;
    for (int kk = 0; kk < d; ++kk) {
      double mean = 0.0;
      for (int l = 0; l < r; ++l) mean += fit.blocks[base + l * d + kk];
      mean /= r;
      for (int l = 0; l < r; ++l) fit.blocks[base + l * d + kk] -= mean;
    }
  }
  return cache_.emplace(std::move(key), std::move(fit)).first->second;
}

RefitResult Refitter::operator()(const DagStructure& g) {
  const auto& ds = *ds_;
  if (g.p() != ds.p()) throw std::invalid_argument("graph does not match dataset");
  RefitResult out{ParamVector(ds.levels()), 0.0, true};
  for (int j = 0; j < ds.p(); ++j) {
    std::vector<int> parents = g.parents(j);
    std::sort(parents.begin(), parents.end());
    const NodeFit& fit = fit_node(j, parents);
    out.loglik += fit.loglik;
    out.converged = out.converged && fit.converged;
    auto b0 = out.beta.intercepts(j);
    std::size_t pos = 0;
    for (double& v : b0) v = fit.blocks[pos++];
    for (int i : parents)
      for (double& v : out.beta.group(j, i)) v = fit.blocks[pos++];
  }
  return out;
}

RefitResult refit_mle(const CategoricalDataset& ds, const DagStructure& g, double ridge) {
  if (!is_acyclic(g)) throw std::invalid_argument("refit needs an acyclic graph");
  Refitter refit(ds, ridge);
  return refit(g);
}

Selection select_model(std::span<const std::size_t> edges, std::span<const double> refit_loglik, double alpha) {
  if (edges.size() != refit_loglik.size()) throw std::invalid_argument("edge and log-likelihood series differ in length");
  if (edges.size() < 2) throw std::invalid_argument("selection needs at least two path entries");
  const std::size_t J = edges.size();
  constexpr double kUndefined = -std::numeric_limits<double>::infinity();
  Selection sel;
  sel.dr.assign(J - 1, kUndefined);
  // dr_(m, m+1) falls back to dr_(m-1, m+1), recursively, until the edge count grows by at least one.
  for (std::size_t m = 0; m + 1 < J; ++m) {
    const auto e_next = static_cast<long>(edges[m + 1]);
    for (std::size_t k = m + 1; k-- > 0;) {
      const long de = e_next - static_cast<long>(edges[k]);
      if (de >= 1) {
        sel.dr[m] = (refit_loglik[m + 1] - refit_loglik[k]) / static_cast<double>(de);
        break;
      }
    }
  }
  const double top = *std::max_element(sel.dr.begin(), sel.dr.end());
  if (top == kUndefined) {
    sel.degenerate = true;
    sel.index = 0;
    return sel;
  }
  for (std::size_t m = J - 1; m >= 1; --m) {
    if (sel.dr[m - 1] != kUndefined && sel.dr[m - 1] >= alpha * top) {
      sel.index = m;
      break;
    }
  }
  return sel;
}

Selection select_model(const SolutionPath& path, double alpha) {
  std::vector<std::size_t> edges;
  std::vector<double> ll;
  for (const auto& e : path.entries) {
    edges.push_back(e.edges);
    ll.push_back(e.refit_loglik);
  }
  return select_model(edges, ll, alpha);
}

std::size_t match_edge_count(std::span<const std::size_t> edges, std::size_t target) {
  if (edges.empty()) throw std::invalid_argument("empty path");
  std::size_t best = 0;
  for (std::size_t m = 1; m < edges.size(); ++m) {
    const auto gap = [&](std::size_t e) { return e > target ? e - target : target - e; };
    const std::size_t gm = gap(edges[m]), gb = gap(edges[best]);
    if (gm < gb || (gm == gb && edges[m] < edges[best])) best = m;
  }
  return best;
}

std::size_t match_edge_count(const SolutionPath& path, std::size_t target) {
  std::vector<std::size_t> edges;
  for (const auto& e : path.entries) edges.push_back(e.edges);
  return match_edge_count(edges, target);
}

PenaltyConfig weights_from_pilot(const ParamVector& pilot, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  const int p = pilot.p();
  PenaltyConfig w = PenaltyConfig::unit(p);
  auto inverse = [&](double norm) { return norm > 0.0 ? std::min(std::pow(norm, -gamma), kMaxWeight) : kMaxWeight; };
  for (int j = 0; j < p; ++j)
    for (int i = j + 1; i < p; ++i) {
      const double v = std::min(inverse(pilot.group_norm(j, i)), inverse(pilot.group_norm(i, j)));
      w.weight(j, i) = v;
      w.weight(i, j) = v;
    }
  return w;
}

SolutionPath fit_path(const CategoricalDataset& ds, const PenaltyConfig& weights, const PathConfig& cfg,
                      const SolverConfig& solver_cfg, const PathOptions& options) {
  cfg.validate();
  weights.validate();
  // A data set without any marginal association gives lambda_1 = 0; every lambda then fits the empty graph.
  double lambda1 = lambda_max(ds, weights);
  if (!(lambda1 > 0.0)) lambda1 = 1.0;
  const auto grid = lambda_grid(lambda1, cfg);
  SolutionPath path;
  Refitter refit(ds);
  auto make_solver = [&] {
    CdSolver s(ds, empty_model(ds), solver_cfg);
    if (options.observer) s.set_sweep_observer(options.observer);
    s.enable_descent_audit(options.audit_descent);
    if (options.trace) s.set_trace(&path.trace);
    return s;
  };
  CdSolver solver = make_solver();

  PenaltyConfig pen = weights;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    pen.lambda = grid[m];
    if (m > 0) {
      path.worst_objective_increase = std::max(path.worst_objective_increase, solver.worst_objective_increase());
      if (cfg.warm_start)
        solver.refresh_hessian_bounds();
      else
        solver = make_solver();
    }
    const std::size_t trace_before = path.trace.size();
    PathEntry entry;
    entry.lambda = grid[m];
    entry.status = solver.solve(pen);
    for (std::size_t t = trace_before; t < path.trace.size(); ++t) path.trace[t].lambda_index = static_cast<int>(m);
    entry.beta = solver.beta();
    entry.graph = solver.graph();
    entry.edges = entry.graph.edge_count();
    entry.penalized_objective = solver.objective(pen);
    auto fit = refit(entry.graph);
    entry.refit_loglik = fit.loglik;
    entry.refit_converged = fit.converged;
    path.entries.push_back(std::move(entry));
  }
  path.worst_objective_increase = std::max(path.worst_objective_increase, solver.worst_objective_increase());
  return path;
}

AdaptiveFit fit_adaptive(const CategoricalDataset& ds, const PathConfig& cfg, const SolverConfig& solver,
                         const PathOptions& options) {
  AdaptiveFit out;
  out.pilot = fit_path(ds, PenaltyConfig::unit(ds.p()), cfg, solver, options);
  out.pilot_selection = select_model(out.pilot, cfg.alpha_select);
  out.weights = weights_from_pilot(out.pilot.entries[out.pilot_selection.index].beta, cfg.gamma);
  out.path = fit_path(ds, out.weights, cfg, solver, options);
  out.selection = select_model(out.path, cfg.alpha_select);
  out.worst_objective_increase = std::max(out.pilot.worst_objective_increase, out.path.worst_objective_increase);
  return out;
}

}  // namespace dagcd
