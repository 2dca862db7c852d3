#include "dagcd/simgen.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dagcd {

namespace {

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = n - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(static_cast<std::uint64_t>(k) + 1)]);
  return perm;
}

std::vector<Edge> bipartite_edges(int p, Rng& rng) {
  const int top = p / 5;
  const int bottom = p - top;
  std::vector<int> cells(static_cast<std::size_t>(top) * bottom);
  std::iota(cells.begin(), cells.end(), 0);
  std::vector<Edge> edges;
  for (int k = 0; k < p; ++k) {
    std::size_t pick = k + rng.below(cells.size() - k);
    std::swap(cells[k], cells[pick]);
    edges.emplace_back(cells[k] / bottom, top + cells[k] % bottom);
  }
  return edges;
}

std::vector<Edge> polytree_edges(int p, Rng& rng) {
  const int size = p / 5;
  std::vector<Edge> edges;
  for (int t = 0; t < 5; ++t)
    for (int k = 1; k < size; ++k) edges.emplace_back(t * size + (k - 1) / 2, t * size + k);
  for (int t = 0; t < 4; ++t) {
    int a = t * size + static_cast<int>(rng.below(size));
    int b = (t + 1) * size + static_cast<int>(rng.below(size));
    if (rng.below(2)) std::swap(a, b);
    edges.emplace_back(a, b);
  }
  return edges;
}

std::vector<Edge> scalefree_edges(int p, Rng& rng) {
  std::vector<int> degree(p, 0);
  std::vector<Edge> edges;
  for (int t = 1; t < p; ++t) {
    // Attachment probability proportional to degree + 1.
    std::uint64_t total = 0;
    for (int v = 0; v < t; ++v) total += degree[v] + 1;
    std::uint64_t draw = rng.below(total);
    int target = 0;
    while (draw >= static_cast<std::uint64_t>(degree[target] + 1)) draw -= degree[target++] + 1;
    edges.emplace_back(target, t);
    ++degree[target];
    ++degree[t];
  }
  return edges;
}

std::vector<Edge> smallworld_edges(int p, double rewire, Rng& rng) {
  std::set<std::pair<int, int>> present;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  std::vector<std::pair<int, int>> ring;
  for (int k = 1; k <= 2; ++k)
    for (int u = 0; u < p; ++u) {
      ring.emplace_back(u, (u + k) % p);
      present.insert(key(u, (u + k) % p));
    }
  for (auto& [u, v] : ring) {
    if (rng.uniform() >= rewire) continue;
    std::vector<int> free;
    for (int w = 0; w < p; ++w)
      if (w != u && !present.count(key(u, w))) free.push_back(w);
    if (free.empty()) continue;
    int w = free[rng.below(free.size())];
    present.erase(key(u, v));
    present.insert(key(u, w));
    v = w;
  }
  // Orient along a uniformly random topological order.
  std::vector<int> order = random_permutation(p, rng);
  std::vector<int> rank(p);
  for (int k = 0; k < p; ++k) rank[order[k]] = k;
  std::vector<Edge> edges;
  for (auto [u, v] : ring) edges.push_back(rank[u] < rank[v] ? Edge{u, v} : Edge{v, u});
  return edges;
}

}  // namespace

std::string to_string(GraphFamily family) {
  switch (family) {
    case GraphFamily::bipartite: return "bipartite";
    case GraphFamily::polytree: return "polytree";
    case GraphFamily::scalefree: return "scalefree";
    case GraphFamily::smallworld: return "smallworld";
  }
  return "unknown";
}

GraphFamily parse_family(const std::string& name) {
  if (name == "bipartite") return GraphFamily::bipartite;
  if (name == "polytree") return GraphFamily::polytree;
  if (name == "scalefree" || name == "scale-free") return GraphFamily::scalefree;
  if (name == "smallworld" || name == "small-world") return GraphFamily::smallworld;
  throw std::invalid_argument("unknown graph family '" + name + "'");
}

void GraphSpec::validate() const {
  switch (family) {
    case GraphFamily::bipartite:
    case GraphFamily::polytree:
      if (p < 10 || p % 5 != 0) throw std::invalid_argument("bipartite and polytree graphs need p >= 10 divisible by 5");
      break;
    case GraphFamily::scalefree:
      if (p < 2) throw std::invalid_argument("scale-free graphs need p >= 2");
      break;
    case GraphFamily::smallworld:
      if (p < 5) throw std::invalid_argument("small-world graphs need p >= 5");
      break;
  }
  if (!(rewire_prob >= 0.0 && rewire_prob <= 1.0)) throw std::invalid_argument("rewiring probability must lie in [0, 1]");
}

std::size_t expected_edge_count(GraphFamily family, int p) {
  switch (family) {
    case GraphFamily::bipartite: return static_cast<std::size_t>(p);
    case GraphFamily::polytree:
    case GraphFamily::scalefree: return static_cast<std::size_t>(p - 1);
    case GraphFamily::smallworld: return static_cast<std::size_t>(2 * p);
  }
  return 0;
}

DagStructure generate_graph(const GraphSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Edge> edges;
  switch (spec.family) {
    case GraphFamily::bipartite: edges = bipartite_edges(spec.p, rng); break;
    case GraphFamily::polytree: edges = polytree_edges(spec.p, rng); break;
    case GraphFamily::scalefree: edges = scalefree_edges(spec.p, rng); break;
    case GraphFamily::smallworld: edges = smallworld_edges(spec.p, spec.rewire_prob, rng); break;
  }
  if (spec.shuffle_labels) {
    const auto label = random_permutation(spec.p, rng);
    for (auto& [a, b] : edges) {
      a = label[a];
      b = label[b];
    }
  }
  return DagStructure(spec.p, edges);
}

void SampleSpec::validate() const {
  if (n_per_block < 0 || n_obs < 0) throw std::invalid_argument("sample sizes must be nonnegative");
  if (n_per_block > 0 && n_obs > 0) throw std::invalid_argument("choose either interventional or observational sampling");
  if (!std::isfinite(effect_size)) throw std::invalid_argument("effect size must be finite");
}

std::vector<double> conditional_law(std::span<const int> parent_levels, int levels, double effect) {
  std::vector<double> law(levels, 0.0);
  for (int v : parent_levels)
    if (v >= 1 && v <= levels) law[v - 1] += effect;
  const double top = *std::max_element(law.begin(), law.end());
  double total = 0.0;
  for (double& v : law) total += (v = std::exp(v - top));
  for (double& v : law) v /= total;
  return law;
}

CategoricalDataset sample_data(const DagStructure& g, const SampleSpec& spec) {
  spec.validate();
  const int p = g.p();
  const int n = spec.interventional() ? p * spec.n_per_block : spec.n_obs;
  const auto order = topological_sort(g);
  Rng rng(spec.seed);
  std::vector<int> values(static_cast<std::size_t>(n) * p);
  std::vector<int> intervened(n, CategoricalDataset::kNoIntervention);
  std::vector<int> parent_levels;
  for (int h = 0; h < n; ++h) {
    if (spec.interventional()) intervened[h] = h / spec.n_per_block;
    int* row = values.data() + static_cast<std::size_t>(h) * p;
    for (int j : order) {
      if (j == intervened[h] || g.parents(j).empty()) {
        row[j] = 1 + static_cast<int>(rng.below(2));
        continue;
      }
      parent_levels.clear();
      for (int i : g.parents(j)) parent_levels.push_back(row[i]);
      const auto law = conditional_law(parent_levels, 2, spec.effect_size);
      row[j] = rng.uniform() < law[0] ? 1 : 2;
    }
  }
  return CategoricalDataset(n, p, std::move(values), std::vector<int>(p, 2),
                            spec.interventional() ? std::move(intervened) : std::vector<int>{});
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t replicate, std::uint64_t stream) {
  return mix64(mix64(mix64(root) ^ replicate) ^ (stream * 0xd1b54a32d192ed03ULL));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = engine_();
  while (x >= limit);
  return x % n;
}

}  // namespace dagcd
