#include "dagcd/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

namespace dagcd {

DagStructure::DagStructure(int p) : children_(p), parents_(p) {
  if (p < 0) throw GraphError("negative node count");
}

DagStructure::DagStructure(int p, const std::vector<Edge>& edges) : DagStructure(p) {
  for (auto [from, to] : edges) add_edge(from, to);
}

void DagStructure::check_node(int v) const {
  if (v < 0 || v >= p()) throw GraphError("node index " + std::to_string(v) + " out of range");
}

bool DagStructure::has_edge(int from, int to) const {
  const auto& c = children_[from];
  return std::find(c.begin(), c.end(), to) != c.end();
}

void DagStructure::add_edge(int from, int to) {
  check_node(from);
  check_node(to);
  if (from == to) throw GraphError("self-loop on node " + std::to_string(from));
  if (has_edge(from, to)) return;
  if (has_edge(to, from)) throw GraphError("edge already present in the opposite direction");
  children_[from].push_back(to);
  parents_[to].push_back(from);
  ++edge_count_;
}

void DagStructure::remove_edge(int from, int to) {
  auto& c = children_[from];
  auto it = std::find(c.begin(), c.end(), to);
  if (it == c.end()) return;
  c.erase(it);
  auto& par = parents_[to];
  par.erase(std::find(par.begin(), par.end(), from));
  --edge_count_;
}

std::vector<Edge> DagStructure::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (int i = 0; i < p(); ++i)
    for (int j : children_[i]) out.emplace_back(i, j);
  std::sort(out.begin(), out.end());
  return out;
}

bool DagStructure::operator==(const DagStructure& other) const {
  return p() == other.p() && edges() == other.edges();
}

bool induces_cycle(const DagStructure& g, int from, int to) {
  if (from == to) throw GraphError("candidate edge is a self-loop");
  std::vector<char> seen(g.p(), 0);
  std::queue<int> frontier;
  frontier.push(to);
  seen[to] = 1;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (int c : g.children(v)) {
      if (c == from) return true;
      if (!seen[c]) {
        seen[c] = 1;
        frontier.push(c);
      }
    }
  }
  return false;
}

std::vector<int> topological_sort(const DagStructure& g) {
  const int p = g.p();
  std::vector<int> indegree(p);
  for (int v = 0; v < p; ++v) indegree[v] = static_cast<int>(g.parents(v).size());
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < p; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(p);
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : g.children(v))
      if (--indegree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) != p) throw GraphError("graph contains a directed cycle");
  return order;
}

bool is_acyclic(const DagStructure& g) {
  try {
    topological_sort(g);
    return true;
  } catch (const GraphError&) {
    return false;
  }
}

std::vector<UndirectedEdge> skeleton(const DagStructure& g) {
  std::vector<UndirectedEdge> out;
  for (auto [a, b] : g.edges()) out.emplace_back(std::min(a, b), std::max(a, b));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void write_edge_list(const DagStructure& g, std::ostream& out) {
  for (auto [a, b] : g.edges()) out << a + 1 << ' ' << b + 1 << '\n';
}

void write_edge_list(const DagStructure& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write " + path.string());
  write_edge_list(g, out);
}

DagStructure read_edge_list(std::istream& in, int p) {
  DagStructure g(p);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream fields(line);
    int a = 0, b = 0;
    if (!(fields >> a >> b)) throw GraphError("malformed edge at line " + std::to_string(line_no));
    g.add_edge(a - 1, b - 1);
  }
  return g;
}

DagStructure read_edge_list(const std::filesystem::path& path, int p) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open " + path.string());
  return read_edge_list(in, p);
}

void write_dot(const DagStructure& g, std::ostream& out, const std::string& name) {
  out << "digraph " << name << " {\n";
  for (int v = 0; v < g.p(); ++v) out << "  X" << v + 1 << ";\n";
  for (auto [a, b] : g.edges()) out << "  X" << a + 1 << " -> X" << b + 1 << ";\n";
  out << "}\n";
}

void write_dot(const DagStructure& g, const std::filesystem::path& path, const std::string& name) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write " + path.string());
  write_dot(g, out, name);
}

}  // namespace dagcd
