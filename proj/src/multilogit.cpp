#include "dagcd/multilogit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dagcd {

namespace {

// Writes softmax(eta) into prob and returns log-sum-exp(eta).
double softmax(std::span<const double> eta, std::span<double> prob) {
  double top = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (std::size_t l = 0; l < eta.size(); ++l) {
    prob[l] = std::exp(eta[l] - top);
    total += prob[l];
  }
  for (double& v : prob) v /= total;
  return top + std::log(total);
}

double log_sum_exp(std::span<const double> eta) {
  double top = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (double e : eta) total += std::exp(e - top);
  return top + std::log(total);
}

}  // namespace

ParamVector::ParamVector(std::vector<int> levels) : levels_(std::move(levels)) {
  const int np = p();
  offsets_.resize(static_cast<std::size_t>(np) * np);
  intercept_offsets_.resize(np);
  std::size_t offset = 0;
  for (int j = 0; j < np; ++j) {
    intercept_offsets_[j] = offset;
    offset += levels_[j];
    for (int i = 0; i < np; ++i) {
      offsets_[static_cast<std::size_t>(j) * np + i] = offset;
      if (i != j) offset += static_cast<std::size_t>(levels_[i] - 1) * levels_[j];
    }
  }
  values_.assign(offset, 0.0);
}

std::span<double> ParamVector::group(int child, int parent) {
  std::size_t len = child == parent ? 0 : static_cast<std::size_t>(levels_[parent] - 1) * levels_[child];
  return std::span<double>(values_).subspan(group_offset(child, parent), len);
}

std::span<const double> ParamVector::group(int child, int parent) const {
  std::size_t len = child == parent ? 0 : static_cast<std::size_t>(levels_[parent] - 1) * levels_[child];
  return std::span<const double>(values_).subspan(group_offset(child, parent), len);
}

std::span<double> ParamVector::intercepts(int child) {
  return std::span<double>(values_).subspan(intercept_offsets_[child], levels_[child]);
}

std::span<const double> ParamVector::intercepts(int child) const {
  return std::span<const double>(values_).subspan(intercept_offsets_[child], levels_[child]);
}

double ParamVector::group_norm(int child, int parent) const {
  double s = 0.0;
  for (double v : group(child, parent)) s += v * v;
  return std::sqrt(s);
}

bool ParamVector::group_is_zero(int child, int parent) const {
  auto g = group(child, parent);
  return std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; });
}

DagStructure ParamVector::induced_graph() const {
  DagStructure g(p());
  for (int j = 0; j < p(); ++j)
    for (int i = 0; i < p(); ++i)
      if (i != j && !group_is_zero(j, i)) g.add_edge(i, j);
  return g;
}

std::size_t ParamVector::active_group_count() const {
  std::size_t count = 0;
  for (int j = 0; j < p(); ++j)
    for (int i = 0; i < p(); ++i)
      if (i != j && !group_is_zero(j, i)) ++count;
  return count;
}

double ParamVector::max_group_sum_violation() const {
  double worst = 0.0;
  for (int j = 0; j < p(); ++j) {
    for (int i = 0; i < p(); ++i) {
      if (i == j) continue;
      auto g = group(j, i);
      const int d = levels_[i] - 1;
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int l = 0; l < levels_[j]; ++l) s += g[l * d + k];
        worst = std::max(worst, std::abs(s));
      }
    }
  }
  return worst;
}

void ParamVector::normalize_intercepts() {
  for (int j = 0; j < p(); ++j) {
    auto b = intercepts(j);
    double shift = b[0];
    for (double& v : b) v -= shift;
  }
}

PenaltyConfig PenaltyConfig::unit(int p, double lambda) {
  PenaltyConfig cfg;
  cfg.lambda = lambda;
  cfg.p = p;
  cfg.weights.assign(static_cast<std::size_t>(p) * p, 1.0);
  for (int j = 0; j < p; ++j) cfg.weight(j, j) = 0.0;
  return cfg;
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (weights.size() != static_cast<std::size_t>(p) * p) throw std::invalid_argument("weight matrix must be p x p");
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i) {
      if (i == j) continue;
      if (!(weight(j, i) >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
      if (weight(j, i) != weight(i, j)) throw std::invalid_argument("weight matrix must be symmetric");
    }
}

std::vector<double> probabilities(const ParamVector& beta, const CategoricalDataset& ds, const DummyRow& x, int node) {
  const int r = ds.levels(node);
  std::vector<double> eta(r, 0.0);
  for (int l = 0; l < r; ++l) {
    double s = beta.intercepts(node)[l] * x.bits[0];
    for (int i = 0; i < ds.p(); ++i) {
      if (i == node) continue;
      auto seg = x.segment(ds, i);
      auto g = beta.group(node, i);
      const int d = ds.levels(i) - 1;
      for (int k = 0; k < d; ++k) s += g[l * d + k] * seg[k];
    }
    eta[l] = s;
  }
  std::vector<double> prob(r);
  softmax(eta, prob);
  return prob;
}

double block_loglik(const ParamVector& beta, const CategoricalDataset& ds, int node) {
  return NodeLikelihood(ds, beta, node).loglik();
}

double loglik(const ParamVector& beta, const CategoricalDataset& ds) {
  double total = 0.0;
  for (int j = 0; j < ds.p(); ++j) total += block_loglik(beta, ds, j);
  return total;
}

double penalty_term(const ParamVector& beta, const PenaltyConfig& pen) {
  double total = 0.0;
  for (int j = 0; j < beta.p(); ++j)
    for (int i = 0; i < beta.p(); ++i)
      if (i != j) total += pen.weight(j, i) * beta.group_norm(j, i);
  return pen.lambda * total;
}

double penalized_objective(const ParamVector& beta, const CategoricalDataset& ds, const PenaltyConfig& pen) {
  return -loglik(beta, ds) + penalty_term(beta, pen);
}

std::vector<double> block_gradient(const ParamVector& beta, const CategoricalDataset& ds, int node, int parent) {
  NodeLikelihood model(ds, beta, node);
  std::vector<double> out(beta.block(node, parent).size());
  model.gradient(parent, out);
  return out;
}

double hessian_bound(const ParamVector& beta, const CategoricalDataset& ds, int node, int parent, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("hessian lower bound b must be positive");
  return -std::max(NodeLikelihood(ds, beta, node).hessian_diag_max(parent), b);
}

NodeLikelihood::NodeLikelihood(const CategoricalDataset& ds, const ParamVector& beta, int node)
    : ds_(&ds), node_(node), r_(ds.levels(node)), rows_(ds.observational_rows(node)) {
  response_.resize(rows_.size());
  for (std::size_t k = 0; k < rows_.size(); ++k) response_[k] = static_cast<std::uint8_t>(ds.value(rows_[k], node) - 1);
  reset(beta);
}

void NodeLikelihood::reset(const ParamVector& beta) {
  const std::size_t m = rows_.size();
  eta_.assign(m * r_, 0.0);
  prob_.assign(m * r_, 0.0);
  row_loglik_.assign(m, 0.0);
  auto b0 = beta.intercepts(node_);
  for (std::size_t k = 0; k < m; ++k)
    for (int l = 0; l < r_; ++l) eta_[k * r_ + l] = b0[l];
  for (int i = 0; i < ds_->p(); ++i) {
    if (i == node_ || beta.group_is_zero(node_, i)) continue;
    auto g = beta.group(node_, i);
    const int d = block_width(i);
    for (std::size_t k = 0; k < m; ++k) {
      int s = slot(i, k);
      if (s < 0) continue;
      for (int l = 0; l < r_; ++l) eta_[k * r_ + l] += g[l * d + s];
    }
  }
  loglik_ = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    refresh_row(k);
    loglik_ += row_loglik_[k];
  }
}

void NodeLikelihood::refresh_row(std::size_t k) {
  if (r_ == 2) {
    const double z = eta_[2 * k + 1] - eta_[2 * k];
    const double e = std::exp(-std::abs(z));
    const double small = e / (1.0 + e);  // probability of the less likely level
    prob_[2 * k + 1] = z >= 0.0 ? 1.0 - small : small;
    prob_[2 * k] = 1.0 - prob_[2 * k + 1];
    const double signed_z = response_[k] ? z : -z;  // logit of the observed level
    row_loglik_[k] = std::min(signed_z, 0.0) - std::log1p(e);
    return;
  }
  std::span<const double> eta(eta_.data() + k * r_, r_);
  double lse = softmax(eta, std::span<double>(prob_.data() + k * r_, r_));
  row_loglik_[k] = eta[response_[k]] - lse;
}

void NodeLikelihood::gradient(int parent, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const int d = block_width(parent);
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    int s = slot(parent, k);
    if (s < 0) continue;
    const double* pr = prob_.data() + k * r_;
    for (int l = 0; l < r_; ++l) out[l * d + s] -= pr[l];
    out[response_[k] * d + s] += 1.0;
  }
}

double NodeLikelihood::hessian_diag_max(int parent) const {
  const int d = block_width(parent);
  std::vector<double> diag(static_cast<std::size_t>(d) * r_, 0.0);
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    int s = slot(parent, k);
    if (s < 0) continue;
    const double* pr = prob_.data() + k * r_;
    for (int l = 0; l < r_; ++l) diag[l * d + s] += pr[l] * (1.0 - pr[l]);
  }
  return diag.empty() ? 0.0 : *std::max_element(diag.begin(), diag.end());
}

double NodeLikelihood::loglik_change(int parent, std::span<const double> delta) const {
  const int d = block_width(parent);
  double change = 0.0;
  if (r_ == 2) {
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      int s = slot(parent, k);
      if (s < 0) continue;
      const double a = eta_[2 * k] + delta[s];
      const double b = eta_[2 * k + 1] + delta[d + s];
      const double lse = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
      change += (response_[k] ? b : a) - lse - row_loglik_[k];
    }
    return change;
  }
  double trial[256];
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    int s = slot(parent, k);
    if (s < 0) continue;
    const double* eta = eta_.data() + k * r_;
    for (int l = 0; l < r_; ++l) trial[l] = eta[l] + delta[l * d + s];
    double row = trial[response_[k]] - log_sum_exp(std::span<const double>(trial, r_));
    change += row - row_loglik_[k];
  }
  return change;
}

void NodeLikelihood::apply(int parent, std::span<const double> delta) {
  const int d = block_width(parent);
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    int s = slot(parent, k);
    if (s < 0) continue;
    double* eta = eta_.data() + k * r_;
    for (int l = 0; l < r_; ++l) eta[l] += delta[l * d + s];
    refresh_row(k);
  }
  loglik_ = 0.0;
  for (double v : row_loglik_) loglik_ += v;
}

}  // namespace dagcd
