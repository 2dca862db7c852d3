#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dagcd {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Edge = std::pair<int, int>;           ///< (from, to), 0-based.
using UndirectedEdge = std::pair<int, int>;  ///< (min, max), 0-based.

/**
 * Directed graph over p nodes, edge (i, j) meaning i -> j (i is a parent of j).
 *
 * Adjacency is kept in both directions. Insertions do not check acyclicity on
 * their own; callers guard them with induces_cycle(). At most one of (i, j),
 * (j, i) may be present.
 */
class DagStructure {
 public:
  DagStructure() = default;
  explicit DagStructure(int p);
  DagStructure(int p, const std::vector<Edge>& edges);

  int p() const { return static_cast<int>(children_.size()); }
  std::size_t edge_count() const { return edge_count_; }

  bool has_edge(int from, int to) const;
  bool adjacent(int a, int b) const { return has_edge(a, b) || has_edge(b, a); }
  void add_edge(int from, int to);
  void remove_edge(int from, int to);

  const std::vector<int>& children(int node) const { return children_[node]; }
  const std::vector<int>& parents(int node) const { return parents_[node]; }

  /// Edges sorted by (from, to).
  std::vector<Edge> edges() const;

  bool operator==(const DagStructure& other) const;

 private:
  void check_node(int v) const;

  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> parents_;
  std::size_t edge_count_ = 0;
};

/// True iff adding from -> to to `g` closes a directed cycle, i.e. `from` is
/// reachable from `to`. Breadth-first search over children.
bool induces_cycle(const DagStructure& g, int from, int to);

/// Kahn's algorithm, lowest available index first. Throws GraphError on a cycle.
std::vector<int> topological_sort(const DagStructure& g);

bool is_acyclic(const DagStructure& g);

/// Unordered pairs {i, j} with i < j, sorted.
std::vector<UndirectedEdge> skeleton(const DagStructure& g);

/// "i j" per line, 1-based.
void write_edge_list(const DagStructure& g, std::ostream& out);
void write_edge_list(const DagStructure& g, const std::filesystem::path& path);
DagStructure read_edge_list(std::istream& in, int p);
DagStructure read_edge_list(const std::filesystem::path& path, int p);

void write_dot(const DagStructure& g, std::ostream& out, const std::string& name = "dag");
void write_dot(const DagStructure& g, const std::filesystem::path& path, const std::string& name = "dag");

}  // namespace dagcd
