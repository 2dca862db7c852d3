#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dagcd/dataset.hpp"
#include "dagcd/graph.hpp"

namespace dagcd {

enum class GraphFamily { bipartite, polytree, scalefree, smallworld };

std::string to_string(GraphFamily family);
/// Accepts the names produced by to_string, plus "scale-free" and "small-world".
GraphFamily parse_family(const std::string& name);

struct GraphSpec {
  GraphFamily family = GraphFamily::scalefree;
  int p = 50;
  std::uint64_t seed = 0;
  double rewire_prob = 0.1;  ///< small-world only
  /// Apply a uniformly random relabeling so node indices carry no ordering information.
  bool shuffle_labels = true;

  void validate() const;
};

/// s_0 for the family at size p.
std::size_t expected_edge_count(GraphFamily family, int p);

DagStructure generate_graph(const GraphSpec& spec);

struct SampleSpec {
  int n_per_block = 0;  ///< interventional rows per node; n = p * n_per_block
  int n_obs = 0;        ///< observational rows, used when n_per_block == 0
  double effect_size = 2.0;
  std::uint64_t seed = 0;

  bool interventional() const { return n_per_block > 0; }
  void validate() const;
};

/**
 * Law of a binary node given its parents' levels:
 * P(X_j = l) proportional to exp(effect * #{parents at level l}).
 */
std::vector<double> conditional_law(std::span<const int> parent_levels, int levels, double effect);

CategoricalDataset sample_data(const DagStructure& g, const SampleSpec& spec);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
/// Independent stream seed for (root, replicate, stream); stable under changes of the replicate count.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t replicate, std::uint64_t stream);

/// mt19937_64 with uniform draws that do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on {0, ..., n - 1}.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace dagcd
