#include "dagcd/cd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dagcd {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void prox_into(std::span<const double> grad, std::span<const double> cur, double h, double lam_w, std::span<double> out) {
  const std::size_t m = grad.size();
  double dn = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    out[k] = grad[k] - h * cur[k];
    dn += out[k] * out[k];
  }
  dn = std::sqrt(dn);
  if (dn <= lam_w) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double scale = -(1.0 / h) * (1.0 - lam_w / dn);
  for (double& v : out) v *= scale;
}

struct SearchOutcome {
  bool moved = false;
  bool stalled = false;
  double alpha = 0.0;
  int backtracks = 0;
  double objective_change = 0.0;
};

// Armijo search on f_{lambda,j} restricted to one block. `step` receives alpha * s on success.
// `hint` is a guess for the accepted backtrack count; it changes the work done, not the result.
SearchOutcome line_search(const NodeLikelihood& model, int parent, std::span<const double> cur,
                          std::span<const double> grad, std::span<const double> proposal, double lam_w,
                          const SolverConfig& cfg, std::span<double> step, int hint = 0) {
  const std::size_t m = cur.size();
  thread_local std::vector<double> s, trial;
  s.resize(m);
  trial.resize(m);
  double slope = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    s[k] = proposal[k] - cur[k];
    slope -= s[k] * grad[k];
  }
  const double norm_cur = norm2(cur);
  const double predicted = slope + lam_w * (norm2(proposal) - norm_cur);
  SearchOutcome out;
  // A predicted decrease below the rounding level of l_j cannot be verified;
  // treat it as converged rather than as a failed search.
  const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(model.loglik()));
  if (!(predicted < -resolution)) return out;

  auto accepts = [&](int k, double& change) {
    const double alpha = cfg.alpha0 * std::pow(cfg.eta, k);
    for (std::size_t q = 0; q < m; ++q) {
      trial[q] = alpha * s[q];
      step[q] = cur[q] + trial[q];
    }
    change = -model.loglik_change(parent, trial) + lam_w * (norm2(step) - norm_cur);
    return change <= alpha * cfg.delta * predicted;
  };

  // f is convex along s, so the admissible k form a ray [k*, inf) and k* can be
  // located from any starting guess: walk down while accepted, or bracket upwards
  // and bisect.
  const int cap = cfg.max_backtracks;
  int k = std::clamp(hint, 0, cap);
  double change = 0.0;
  if (accepts(k, change)) {
    while (k > 0) {
      double c = 0.0;
      if (!accepts(k - 1, c)) break;
      --k;
      change = c;
    }
  } else {
    int lo = k, hi = k, width = 1;
    for (;;) {
      if (hi == cap) {
        // Failing on a decrease the smallest trial step could not resolve is convergence, not a stall.
        out.stalled = -predicted * cfg.delta * std::pow(cfg.eta, cap) > resolution;
        return out;
      }
      hi = std::min(lo + width, cap);
      if (accepts(hi, change)) break;
      lo = hi;
      width *= 2;
    }
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      double c = 0.0;
      if (accepts(mid, c)) {
        hi = mid;
        change = c;
      } else {
        lo = mid;
      }
    }
    k = hi;
  }
  out.alpha = cfg.alpha0 * std::pow(cfg.eta, k);
  for (std::size_t q = 0; q < m; ++q) step[q] = out.alpha * s[q];
  out.moved = true;
  out.backtracks = k;
  out.objective_change = change;
  return out;
}

// Intercept step of the surrogate with beta_{j10} fixed; halved while it would lower l_j.
bool intercept_step_into(const NodeLikelihood& model, std::span<const double> grad, double h, std::span<double> step) {
  step[0] = 0.0;
  for (std::size_t l = 1; l < step.size(); ++l) step[l] = -grad[l] / h;
  for (int halvings = 0; halvings <= 50; ++halvings) {
    if (model.loglik_change(kIntercept, step) >= 0.0) return max_abs(step) > 0.0;
    for (double& v : step) v *= 0.5;
  }
  return false;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(inner_tol > 0.0)) throw std::invalid_argument("inner_tol must be positive");
  if (max_inner < 1 || max_outer < 1 || max_backtracks < 1) throw std::invalid_argument("iteration caps must be >= 1");
}

std::vector<double> group_prox_update(std::span<const double> grad, std::span<const double> beta_cur, double h,
                                      double lam_w) {
  if (!(h < 0.0)) throw std::invalid_argument("surrogate curvature h must be negative");
  if (grad.size() != beta_cur.size()) throw std::invalid_argument("gradient and group sizes differ");
  std::vector<double> out(grad.size());
  prox_into(grad, beta_cur, h, lam_w, out);
  return out;
}

ArmijoResult armijo_step(ParamVector& beta, const CategoricalDataset& ds, const SolverConfig& cfg,
                         const PenaltyConfig& pen, int node, int parent, std::span<const double> proposal) {
  auto cur = beta.block(node, parent);
  if (proposal.size() != cur.size()) throw std::invalid_argument("proposal has the wrong size");
  if (std::equal(cur.begin(), cur.end(), proposal.begin()))
    throw std::invalid_argument("proposal equals the current group");
  NodeLikelihood model(ds, beta, node);
  std::vector<double> grad(cur.size()), step(cur.size());
  model.gradient(parent, grad);
  const double lam_w = parent == kIntercept ? 0.0 : pen.lambda * pen.weight(node, parent);
  auto outcome = line_search(model, parent, cur, grad, proposal, lam_w, cfg, step);
  ArmijoResult result;
  result.stalled = outcome.stalled || !outcome.moved;
  if (outcome.moved) {
    for (std::size_t k = 0; k < cur.size(); ++k) cur[k] += step[k];
    result.alpha = outcome.alpha;
    result.backtracks = outcome.backtracks;
    result.objective_change = outcome.objective_change;
  }
  return result;
}

void intercept_update(ParamVector& beta, const CategoricalDataset& ds, const SolverConfig& cfg, int node) {
  NodeLikelihood model(ds, beta, node);
  auto b0 = beta.intercepts(node);
  std::vector<double> grad(b0.size()), step(b0.size());
  model.gradient(kIntercept, grad);
  const double h = -std::max(model.hessian_diag_max(kIntercept), cfg.b);
  if (intercept_step_into(model, grad, h, step))
    for (std::size_t l = 0; l < b0.size(); ++l) b0[l] += step[l];
  const double shift = b0[0];
  for (double& v : b0) v -= shift;
}

CdSolver::CdSolver(const CategoricalDataset& ds, ParamVector beta, SolverConfig cfg)
    : ds_(&ds), p_(ds.p()), cfg_(cfg), beta_(std::move(beta)) {
  cfg_.validate();
  if (beta_.p() != p_ || beta_.levels() != ds.levels()) throw std::invalid_argument("parameter layout does not match dataset");
  graph_ = beta_.induced_graph();
  if (!is_acyclic(graph_)) throw std::invalid_argument("initial parameters induce a cyclic graph");
  nodes_.reserve(p_);
  for (int j = 0; j < p_; ++j) nodes_.emplace_back(ds, beta_, j);
  h_.assign(static_cast<std::size_t>(p_) * p_, -cfg_.b);
  h0_.assign(p_, -cfg_.b);
  backtrack_hint_.assign(static_cast<std::size_t>(p_) * p_, 0);
  refresh_hessian_bounds();
}

void CdSolver::refresh_hessian_bounds() {
  for (int j = 0; j < p_; ++j) {
    h0_[j] = -std::max(nodes_[j].hessian_diag_max(kIntercept), cfg_.b);
    for (int i = 0; i < p_; ++i)
      if (i != j) h_[static_cast<std::size_t>(j) * p_ + i] = -std::max(nodes_[j].hessian_diag_max(i), cfg_.b);
  }
}

double CdSolver::objective(const PenaltyConfig& pen) const {
  double total = 0.0;
  for (const auto& node : nodes_) total -= node.loglik();
  return total + penalty_term(beta_, pen);
}

CdSolver::StepResult CdSolver::group_step(int node, int parent, double lam_w) {
  auto cur = beta_.group(node, parent);
  const std::size_t m = cur.size();
  grad_buf_.resize(m);
  prop_buf_.resize(m);
  step_buf_.resize(m);
  auto& model = nodes_[node];
  model.gradient(parent, grad_buf_);
  prox_into(grad_buf_, cur, hessian(node, parent), lam_w, prop_buf_);
  StepResult result;
  if (std::equal(cur.begin(), cur.end(), prop_buf_.begin())) return result;

  int& hint = backtrack_hint_[static_cast<std::size_t>(node) * p_ + parent];
  auto outcome = line_search(model, parent, cur, grad_buf_, prop_buf_, lam_w, cfg_, step_buf_, hint);
  if (outcome.moved) hint = outcome.backtracks;
  if (outcome.stalled) {
    ++stalls_;
    result.stalled = true;
    return result;
  }
  if (!outcome.moved) return result;

  for (std::size_t k = 0; k < m; ++k) cur[k] += step_buf_[k];
  model.apply(parent, step_buf_);

  result.moved = true;
  result.change = max_abs(step_buf_);
  if (audit_ && audit_steps_ && current_pen_) audit_checkpoint(*current_pen_);
  return result;
}

CdSolver::StepResult CdSolver::intercept_step(int node) {
  auto b0 = beta_.intercepts(node);
  grad_buf_.resize(b0.size());
  step_buf_.resize(b0.size());
  auto& model = nodes_[node];
  model.gradient(kIntercept, grad_buf_);
  StepResult result;
  step_buf_[0] = 0.0;
  for (std::size_t l = 1; l < b0.size(); ++l) step_buf_[l] = -grad_buf_[l] / h0_[node];
  // Applied optimistically and reverted in the rare case the likelihood drops.
  const double before = model.loglik();
  for (int halvings = 0; halvings <= 50 && max_abs(step_buf_) > 0.0; ++halvings) {
    model.apply(kIntercept, step_buf_);
    if (model.loglik() >= before) {
      for (std::size_t l = 0; l < b0.size(); ++l) b0[l] += step_buf_[l];
      result.moved = true;
      result.change = max_abs(step_buf_);
      if (audit_ && audit_steps_ && current_pen_) audit_checkpoint(*current_pen_);
      return result;
    }
    for (double& v : step_buf_) v = -v;
    model.apply(kIntercept, step_buf_);
    for (double& v : step_buf_) v *= -0.5;
  }
  model.reset(beta_);
  return result;
}

void CdSolver::update_intercepts() {
  for (int j = 0; j < p_; ++j) intercept_step(j);
}

double CdSolver::minimize_group(int node, int parent, double lam_w) {
  for (int t = 0; t < cfg_.max_inner; ++t) {
    auto r = group_step(node, parent, lam_w);
    if (!r.moved || r.change < cfg_.inner_tol) break;
  }
  if (beta_.group_is_zero(node, parent)) return 0.0;
  auto cur = beta_.group(node, parent);
  std::vector<double> back(cur.size());
  for (std::size_t k = 0; k < cur.size(); ++k) back[k] = -cur[k];
  return -nodes_[node].loglik_change(parent, back) - lam_w * norm2(cur);
}

void CdSolver::set_group_zero(int node, int parent) {
  if (beta_.group_is_zero(node, parent)) return;
  auto cur = beta_.group(node, parent);
  std::vector<double> back(cur.size());
  for (std::size_t k = 0; k < cur.size(); ++k) back[k] = -cur[k];
  nodes_[node].apply(parent, back);
  std::fill(cur.begin(), cur.end(), 0.0);
  graph_.remove_edge(parent, node);
}

bool CdSolver::screened(int node, int parent, double lam_w) {
  const std::size_t m = beta_.group(node, parent).size();
  grad_buf_.resize(m);
  nodes_[node].gradient(parent, grad_buf_);
  return norm2(grad_buf_) <= lam_w;
}

void CdSolver::process_pair(int i, int j, const PenaltyConfig& pen) {
  // beta_{j.i} != 0 <=> i -> j;  beta_{i.j} != 0 <=> j -> i.
  const double lam_w = pen.lambda * pen.weight(j, i);
  const bool ij_zero = beta_.group_is_zero(j, i);
  const bool ji_zero = beta_.group_is_zero(i, j);
  if (ij_zero && ji_zero && screened(j, i, lam_w) && screened(i, j, lam_w)) return;

  graph_.remove_edge(i, j);
  graph_.remove_edge(j, i);
  const bool forbid_ij = induces_cycle(graph_, i, j);
  const bool forbid_ji = !forbid_ij && induces_cycle(graph_, j, i);

  if (forbid_ij) {
    set_group_zero(j, i);
    minimize_group(i, j, lam_w);
  } else if (forbid_ji) {
    set_group_zero(i, j);
    minimize_group(j, i, lam_w);
  } else {
    // S1 <= S2  <=>  gain from beta_{i.j} >= gain from beta_{j.i}.
    const double gain_ji = minimize_group(i, j, lam_w);
    const double gain_ij = minimize_group(j, i, lam_w);
    if (gain_ji >= gain_ij)
      set_group_zero(j, i);
    else
      set_group_zero(i, j);
  }
  if (!beta_.group_is_zero(j, i)) graph_.add_edge(i, j);
  if (!beta_.group_is_zero(i, j)) graph_.add_edge(j, i);
}

SweepStats CdSolver::inner_loop(const PenaltyConfig& pen) {
  current_pen_ = &pen;
  const auto active = graph_.edges();
  SweepStats stats;
  stats.sweep = sweep_count_;
  stats.inner_converged = false;
  const int stalls_before = stalls_;
  for (int t = 1; t <= cfg_.max_inner; ++t) {
    double max_change = 0.0;
    for (auto [from, to] : active) {
      auto r = group_step(to, from, pen.lambda * pen.weight(to, from));
      max_change = std::max(max_change, r.change);
      if (!r.moved) continue;
      if (beta_.group_is_zero(to, from))
        graph_.remove_edge(from, to);
      else
        graph_.add_edge(from, to);
    }
    for (int j = 0; j < p_; ++j) max_change = std::max(max_change, intercept_step(j).change);
    stats.inner_iterations = t;
    if (trace_) trace_->push_back({0, sweep_count_, t, objective(pen), max_change, graph_.edge_count()});
    if (max_change < cfg_.inner_tol) {
      stats.inner_converged = true;
      break;
    }
  }
  stats.line_search_stalls = stalls_ - stalls_before;
  stats.active_edges = graph_.edge_count();
  return stats;
}

SweepStats CdSolver::sweep(const PenaltyConfig& pen) {
  current_pen_ = &pen;
  ++sweep_count_;
  const auto before = graph_.edges();
  const int stalls_before = stalls_;
  if (audit_) audit_last_ = objective(pen);

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(p_) * (p_ - 1) / 2);
  for (int i = 0; i < p_; ++i)
    for (int j = i + 1; j < p_; ++j) pairs.emplace_back(i, j);
  if (cfg_.random_pair_order) {
    std::mt19937_64 rng(cfg_.order_seed + static_cast<std::uint64_t>(sweep_count_));
    std::shuffle(pairs.begin(), pairs.end(), rng);
  }
  // Within a pair both directions are fitted before one is dropped, so the
  // audit compares whole pair updates rather than single steps.
  audit_steps_ = false;
  for (auto [i, j] : pairs) {
    process_pair(i, j, pen);
    if (audit_) audit_checkpoint(pen);
  }
  audit_steps_ = true;
  if (trace_) trace_->push_back({0, sweep_count_, 0, objective(pen), 0.0, graph_.edge_count()});

  update_intercepts();
  auto stats = inner_loop(pen);
  stats.sweep = sweep_count_;
  stats.line_search_stalls = stalls_ - stalls_before;
  stats.active_set_changed = graph_.edges() != before;
  if (observer_) observer_(stats, *this);
  return stats;
}

SolveStatus CdSolver::solve(const PenaltyConfig& pen) {
  if (pen.p != p_) throw std::invalid_argument("penalty dimension does not match dataset");
  SolveStatus status;
  for (int s = 1; s <= cfg_.max_outer; ++s) {
    auto stats = sweep(pen);
    status.sweeps = s;
    status.line_search_stalls += stats.line_search_stalls;
    if (!stats.inner_converged) status.inner_capped = true;
    // The first sweep starts from parameters fitted at another lambda, so it
    // cannot confirm the active set; its inner loop moves the zero-group gradients.
    if (!stats.active_set_changed && s > 1) {
      status.stable = true;
      break;
    }
  }
  return status;
}

void CdSolver::audit_checkpoint(const PenaltyConfig& pen) {
  double now = objective(pen);
  worst_increase_ = std::max(worst_increase_, now - audit_last_);
  audit_last_ = now;
}

KktReport kkt_audit(const ParamVector& beta, const CategoricalDataset& ds, const PenaltyConfig& pen) {
  KktReport report;
  const int p = ds.p();
  const DagStructure g = beta.induced_graph();
  for (int j = 0; j < p; ++j) {
    NodeLikelihood model(ds, beta, j);
    std::vector<double> grad(beta.intercepts(j).size());
    model.gradient(kIntercept, grad);
    report.worst_intercept_residual = std::max(report.worst_intercept_residual, norm2(grad));
    for (int i = 0; i < p; ++i) {
      if (i == j) continue;
      auto group = beta.group(j, i);
      grad.assign(group.size(), 0.0);
      model.gradient(i, grad);
      const double lam_w = pen.lambda * pen.weight(j, i);
      if (beta.group_is_zero(j, i)) {
        if (!beta.group_is_zero(i, j) || induces_cycle(g, i, j)) continue;
        ++report.zero_groups_checked;
        report.worst_zero_excess = std::max(report.worst_zero_excess, norm2(grad) - lam_w - 1e-4 * (1.0 + lam_w));
      } else {
        ++report.active_groups_checked;
        const double n = norm2(group);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= lam_w * group[k] / n;
        report.worst_active_residual = std::max(report.worst_active_residual, norm2(grad));
      }
    }
  }
  return report;
}

}  // namespace dagcd
