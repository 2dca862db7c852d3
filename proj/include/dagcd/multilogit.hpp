#pragma once

#include <span>
#include <vector>

#include "dagcd/dataset.hpp"
#include "dagcd/graph.hpp"

namespace dagcd {

/// Parent index standing for the intercept group beta_{j.0}.
inline constexpr int kIntercept = -1;

/**
 * All coefficients of the multi-logit network model.
 *
 * group(j, i) is beta_{j.i}, the influence of node i on node j: r_j stacked
 * sub-blocks of length d_i = r_i - 1, sub-block l holding beta_{jli}.
 * intercepts(j) is beta_{j.0} of length r_j. group(j, j) is empty.
 */
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<int> levels);

  int p() const { return static_cast<int>(levels_.size()); }
  int levels(int node) const { return levels_[node]; }
  const std::vector<int>& levels() const { return levels_; }

  std::span<double> group(int child, int parent);
  std::span<const double> group(int child, int parent) const;
  std::span<double> intercepts(int child);
  std::span<const double> intercepts(int child) const;
  /// group() for parent >= 0, intercepts() for kIntercept.
  std::span<double> block(int child, int parent) { return parent == kIntercept ? intercepts(child) : group(child, parent); }
  std::span<const double> block(int child, int parent) const {
    return parent == kIntercept ? intercepts(child) : group(child, parent);
  }

  double group_norm(int child, int parent) const;
  bool group_is_zero(int child, int parent) const;

  /// Graph with i -> j whenever beta_{j.i} != 0. Not checked for acyclicity.
  DagStructure induced_graph() const;
  std::size_t active_group_count() const;

  /// Largest |sum_l beta_{jli}| over all groups and components.
  double max_group_sum_violation() const;

  /// Shifts every beta_{j.0} so that beta_{j10} = 0. Probabilities are unchanged.
  void normalize_intercepts();

  std::span<const double> raw() const { return values_; }
  std::span<double> raw() { return values_; }

 private:
  std::size_t group_offset(int child, int parent) const { return offsets_[static_cast<std::size_t>(child) * p() + parent]; }

  std::vector<int> levels_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> intercept_offsets_;
  std::vector<double> values_;
};

/// lambda and the symmetric weight matrix W of the adaptive group penalty.
struct PenaltyConfig {
  double lambda = 0.0;
  int p = 0;
  std::vector<double> weights;  ///< row-major p x p, weights[j * p + i] = w_ji

  static PenaltyConfig unit(int p, double lambda = 0.0);
  double weight(int child, int parent) const { return weights[static_cast<std::size_t>(child) * p + parent]; }
  double& weight(int child, int parent) { return weights[static_cast<std::size_t>(child) * p + parent]; }
  void validate() const;
};

/// Softmax of x^T beta_{jl.} over l, evaluated from an explicit dummy row.
std::vector<double> probabilities(const ParamVector& beta, const CategoricalDataset& ds, const DummyRow& x, int node);

/// l_j: log-likelihood of node j given the rest, summed over O_j.
double block_loglik(const ParamVector& beta, const CategoricalDataset& ds, int node);
/// l(beta) = sum_j l_j.
double loglik(const ParamVector& beta, const CategoricalDataset& ds);
/// -l(beta) + lambda * sum_{j,i} w_ji ||beta_{j.i}||_2.
double penalized_objective(const ParamVector& beta, const CategoricalDataset& ds, const PenaltyConfig& pen);
double penalty_term(const ParamVector& beta, const PenaltyConfig& pen);

/// Gradient of l_j with respect to beta_{j.i}; i may be kIntercept.
std::vector<double> block_gradient(const ParamVector& beta, const CategoricalDataset& ds, int node, int parent);

/// h_ji = -max{ max diag(-H_{l_j}(beta_{j.i})), b }.
double hessian_bound(const ParamVector& beta, const CategoricalDataset& ds, int node, int parent, double b);

/**
 * Likelihood of one node with cached linear predictors over its
 * observational rows. The owner keeps it in sync with the ParamVector by
 * calling apply() with every change made to beta_{j..}.
 */
class NodeLikelihood {
 public:
  NodeLikelihood(const CategoricalDataset& ds, const ParamVector& beta, int node);

  int node() const { return node_; }
  int levels() const { return r_; }
  std::size_t rows() const { return rows_.size(); }
  double loglik() const { return loglik_; }

  /// Softmax probabilities for the k-th observational row.
  std::span<const double> probabilities(std::size_t k) const {
    return std::span<const double>(prob_).subspan(k * r_, r_);
  }

  void gradient(int parent, std::span<double> out) const;
  double hessian_diag_max(int parent) const;

  /// l_j(beta + delta on block `parent`) - l_j(beta).
  double loglik_change(int parent, std::span<const double> delta) const;
  void apply(int parent, std::span<const double> delta);

  /// Recomputes every cached quantity from `beta`.
  void reset(const ParamVector& beta);

 private:
  /// Dummy-bit index of row k for `parent`, or -1 if the row does not touch it.
  int slot(int parent, std::size_t k) const {
    if (parent == kIntercept) return 0;
    int v = ds_->column(parent)[rows_[k]];
    return v >= 2 ? v - 2 : -1;
  }
  int block_width(int parent) const { return parent == kIntercept ? 1 : ds_->levels(parent) - 1; }
  void refresh_row(std::size_t k);

  const CategoricalDataset* ds_;
  int node_;
  int r_;
  std::vector<int> rows_;
  std::vector<std::uint8_t> response_;  // 0-based level of node_ per row
  std::vector<double> eta_;
  std::vector<double> prob_;
  std::vector<double> row_loglik_;
  double loglik_ = 0.0;
};

}  // namespace dagcd
