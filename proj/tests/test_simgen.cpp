#include <doctest.h>

#include <numeric>
#include <set>

#include "dagcd/simgen.hpp"
#include "support.hpp"

using namespace dagcd;

namespace {

const GraphFamily kFamilies[] = {GraphFamily::bipartite, GraphFamily::polytree, GraphFamily::scalefree,
                                 GraphFamily::smallworld};

int find(std::vector<int>& parent, int v) {
  while (parent[v] != v) v = parent[v] = parent[parent[v]];
  return v;
}

// Pearson statistic of a 2x2 table.
double chi_square(const double t[2][2]) {
  const double n = t[0][0] + t[0][1] + t[1][0] + t[1][1];
  double stat = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double e = (t[a][0] + t[a][1]) * (t[0][b] + t[1][b]) / n;
      stat += (t[a][b] - e) * (t[a][b] - e) / e;
    }
  return stat;
}

}  // namespace

TEST_CASE("family names") {
  for (auto f : kFamilies) CHECK(parse_family(to_string(f)) == f);
  CHECK(parse_family("scale-free") == GraphFamily::scalefree);
  CHECK(parse_family("small-world") == GraphFamily::smallworld);
  CHECK_THROWS(parse_family("lattice"));
}

TEST_CASE("edge counts match the family formula and graphs are acyclic") {
  for (auto f : kFamilies)
    for (int p : {10, 15, 20, 50, 100, 200})
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        GraphSpec spec;
        spec.family = f;
        spec.p = p;
        spec.seed = seed;
        auto g = generate_graph(spec);
        CHECK(g.edge_count() == expected_edge_count(f, p));
        CHECK(is_acyclic(g));
      }
  CHECK(expected_edge_count(GraphFamily::bipartite, 50) == 50);
  CHECK(expected_edge_count(GraphFamily::scalefree, 50) == 49);
  CHECK(expected_edge_count(GraphFamily::polytree, 50) == 49);
  CHECK(expected_edge_count(GraphFamily::smallworld, 50) == 100);
}

TEST_CASE("scale-free and small-world accept sizes not divisible by five") {
  for (int p : {2, 7, 33}) {
    GraphSpec spec;
    spec.p = p;
    CHECK(generate_graph(spec).edge_count() == static_cast<std::size_t>(p - 1));
  }
  GraphSpec sw;
  sw.family = GraphFamily::smallworld;
  sw.p = 7;
  CHECK(generate_graph(sw).edge_count() == 14);
}

TEST_CASE("invalid graph specifications") {
  GraphSpec spec;
  spec.family = GraphFamily::bipartite;
  spec.p = 12;
  CHECK_THROWS(generate_graph(spec));
  spec.family = GraphFamily::polytree;
  spec.p = 5;
  CHECK_THROWS(generate_graph(spec));
  spec.family = GraphFamily::smallworld;
  spec.p = 4;
  CHECK_THROWS(generate_graph(spec));
  spec.p = 20;
  spec.rewire_prob = 1.5;
  CHECK_THROWS(generate_graph(spec));
}

TEST_CASE("polytree skeleton is a spanning tree") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GraphSpec spec;
    spec.family = GraphFamily::polytree;
    spec.p = 50;
    spec.seed = seed;
    auto g = generate_graph(spec);
    std::vector<int> parent(50);
    std::iota(parent.begin(), parent.end(), 0);
    int merges = 0;
    for (auto [a, b] : g.edges()) {
      int ra = find(parent, a), rb = find(parent, b);
      CHECK(ra != rb);  // no undirected cycle
      if (ra != rb) {
        parent[ra] = rb;
        ++merges;
      }
    }
    CHECK(merges == 49);
  }
}

TEST_CASE("bipartite sources and targets are disjoint") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GraphSpec spec;
    spec.family = GraphFamily::bipartite;
    spec.p = 50;
    spec.seed = seed;
    auto g = generate_graph(spec);
    std::set<int> sources, targets;
    for (auto [a, b] : g.edges()) {
      sources.insert(a);
      targets.insert(b);
    }
    CHECK(sources.size() <= 10);
    for (int s : sources) CHECK(targets.count(s) == 0);
  }
}

TEST_CASE("scale-free graphs have hubs") {
  GraphSpec spec;
  spec.p = 200;
  spec.seed = 9;
  auto g = generate_graph(spec);
  std::vector<int> degree(200, 0);
  for (auto [a, b] : g.edges()) {
    ++degree[a];
    ++degree[b];
  }
  CHECK(*std::max_element(degree.begin(), degree.end()) >= 8);
}

TEST_CASE("generation is reproducible and seed dependent") {
  for (auto f : kFamilies) {
    GraphSpec spec;
    spec.family = f;
    spec.p = 30;
    spec.seed = 77;
    CHECK(generate_graph(spec) == generate_graph(spec));
    auto other = spec;
    other.seed = 78;
    CHECK_FALSE(generate_graph(spec) == generate_graph(other));
  }
  GraphSpec spec;
  spec.p = 20;
  SampleSpec ss;
  ss.n_per_block = 5;
  ss.seed = 3;
  auto g = generate_graph(spec);
  auto a = sample_data(g, ss), b = sample_data(g, ss);
  for (int h = 0; h < a.n(); ++h)
    for (int j = 0; j < a.p(); ++j) CHECK(a.value(h, j) == b.value(h, j));
}

TEST_CASE("conditional law of a binary node") {
  const int one_parent[] = {2};
  auto law = conditional_law(one_parent, 2, 2.0);
  CHECK(law[1] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)).epsilon(1e-14));
  CHECK(law[1] == doctest::Approx(0.88080).epsilon(1e-5));
  CHECK(std::log(law[1] / law[0]) == doctest::Approx(2.0).epsilon(1e-14));

  // Two parents disagreeing cancel out; agreeing add up.
  const int split[] = {1, 2};
  law = conditional_law(split, 2, 2.0);
  CHECK(law[0] == doctest::Approx(0.5));
  const int agree[] = {1, 1};
  law = conditional_law(agree, 2, 2.0);
  CHECK(std::log(law[0] / law[1]) == doctest::Approx(4.0));
  CHECK(law[0] + law[1] == doctest::Approx(1.0));
}

TEST_CASE("sampled frequencies match the conditional law") {
  DagStructure g(2, {{0, 1}});
  SampleSpec ss;
  ss.n_obs = 5000;
  ss.seed = 61;
  auto ds = sample_data(g, ss);
  CHECK_FALSE(ds.has_interventions());
  int match = 0, ones = 0;
  for (int h = 0; h < ds.n(); ++h) {
    match += ds.value(h, 0) == ds.value(h, 1);
    ones += ds.value(h, 0) == 1;
  }
  const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
  const double sd = std::sqrt(5000 * p * (1 - p));
  CHECK(std::abs(match - 5000 * p) < 3 * sd);
  CHECK(std::abs(ones - 2500.0) < 3 * std::sqrt(5000 * 0.25));
}

TEST_CASE("intervened nodes ignore their parents") {
  DagStructure g(2, {{0, 1}});
  int significant = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SampleSpec ss;
    ss.n_per_block = 1000;
    ss.seed = seed;
    auto ds = sample_data(g, ss);
    REQUIRE(ds.n() == 2000);
    CHECK(ds.intervention_rows(1).size() == 1000);
    double table[2][2] = {{0, 0}, {0, 0}};
    for (int h : ds.intervention_rows(1)) table[ds.value(h, 0) - 1][ds.value(h, 1) - 1] += 1;
    // 6.635 is the 0.99 quantile of chi-square with one degree of freedom.
    if (chi_square(table) > 6.635) ++significant;
    // The observational block still shows the dependence.
    double obs[2][2] = {{0, 0}, {0, 0}};
    for (int h : ds.intervention_rows(0)) obs[ds.value(h, 0) - 1][ds.value(h, 1) - 1] += 1;
    CHECK(chi_square(obs) > 6.635);
  }
  CHECK(significant <= 2);
}

TEST_CASE("interventional design has one block per node") {
  GraphSpec spec;
  spec.p = 10;
  spec.seed = 4;
  SampleSpec ss;
  ss.n_per_block = 3;
  auto ds = sample_data(generate_graph(spec), ss);
  CHECK(ds.n() == 30);
  for (int h = 0; h < 30; ++h) CHECK(ds.intervened_node(h) == h / 3);
  SampleSpec both;
  both.n_per_block = 1;
  both.n_obs = 1;
  CHECK_THROWS(sample_data(generate_graph(spec), both));
}

TEST_CASE("seed derivation") {
  // First output of the reference SplitMix64 generator seeded with 0.
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
  CHECK(derive_seed(1, 5, 1) == derive_seed(1, 5, 1));
  Rng rng(5);
  std::vector<int> counts(3, 0);
  for (int k = 0; k < 30000; ++k) ++counts[rng.below(3)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(30000 * (1.0 / 3) * (2.0 / 3)));
  for (int k = 0; k < 1000; ++k) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK_THROWS(rng.below(0));
}
