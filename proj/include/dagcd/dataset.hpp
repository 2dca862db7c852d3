#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagcd {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * n x p matrix of categorical observations plus intervention bookkeeping.
 *
 * Rows and nodes are 0-based throughout the C++ API. Level values are the
 * data themselves and stay 1-based: column j takes values in 1..levels[j].
 * Level 1 is the dummy-coding reference level.
 *
 * Each row is observational for every node except at most one, the node
 * that was experimentally fixed in that row.
 */
class CategoricalDataset {
 public:
  static constexpr int kNoIntervention = -1;

  CategoricalDataset() = default;

  /// `values` is row-major n x p. `intervened[h]` is the node fixed in row h
  /// or kNoIntervention; an empty vector means purely observational data.
  CategoricalDataset(int n, int p, std::vector<int> values, std::vector<int> levels,
                     std::vector<int> intervened = {});

  int n() const { return n_; }
  int p() const { return p_; }
  int levels(int node) const { return levels_[node]; }
  const std::vector<int>& levels() const { return levels_; }

  int value(int row, int node) const { return columns_[node][row]; }
  std::span<const std::uint8_t> column(int node) const { return columns_[node]; }

  /// Node fixed by intervention in `row`, or kNoIntervention.
  int intervened_node(int row) const { return intervened_[row]; }

  /// I_j: rows where node j was fixed, ascending.
  const std::vector<int>& intervention_rows(int node) const { return intervention_rows_[node]; }
  /// O_j: rows where node j is observational, ascending.
  const std::vector<int>& observational_rows(int node) const { return observational_rows_[node]; }

  bool has_interventions() const;

  /// Total dummy dimension d = 1 + sum_i (r_i - 1).
  int dummy_dimension() const;
  /// Offset of node i's dummy segment inside a DummyRow (the constant is at 0).
  int dummy_offset(int node) const { return dummy_offsets_[node]; }

 private:
  int n_ = 0;
  int p_ = 0;
  std::vector<int> levels_;
  std::vector<std::vector<std::uint8_t>> columns_;
  std::vector<int> intervened_;
  std::vector<std::vector<int>> intervention_rows_;
  std::vector<std::vector<int>> observational_rows_;
  std::vector<int> dummy_offsets_;
};

/// Reference-cell dummy coding of one data row, with the leading constant 1.
struct DummyRow {
  std::vector<std::uint8_t> bits;

  std::span<const std::uint8_t> segment(const CategoricalDataset& ds, int node) const {
    return std::span<const std::uint8_t>(bits).subspan(ds.dummy_offset(node), ds.levels(node) - 1);
  }
};

std::vector<DummyRow> encode(const CategoricalDataset& ds);

/// Inverse of the segment coding: all-zero segment is level 1, bit k set is level k + 2.
int decode_segment(std::span<const std::uint8_t> segment);

/// y_{hjl} = I(X_hj = l).
inline int indicator(const CategoricalDataset& ds, int row, int node, int level) {
  return ds.value(row, node) == level ? 1 : 0;
}

/**
 * Reads a comma-separated integer matrix. An optional first line
 * `#levels: r1,...,rp` declares level counts; otherwise they are the column
 * maxima (at least 2). The optional intervention file holds `row,node` pairs,
 * 1-based, one per line; an optional non-numeric header line is skipped.
 */
CategoricalDataset load_csv(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& intervention_spec = std::nullopt);

void write_csv(const CategoricalDataset& ds, const std::filesystem::path& path, bool declare_levels = true);
void write_interventions_csv(const CategoricalDataset& ds, const std::filesystem::path& path);

}  // namespace dagcd
