#include <doctest.h>

#include <random>
#include <sstream>

#include "dagcd/evalmetrics.hpp"
#include "support.hpp"

using namespace dagcd;

namespace {

DagStructure random_dag(std::mt19937_64& rng, int p, double prob) {
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DagStructure g(p);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (u(rng) < prob) g.add_edge(order[a], order[b]);
  return g;
}

DagStructure relabel(const DagStructure& g, const std::vector<int>& label) {
  DagStructure out(g.p());
  for (auto [a, b] : g.edges()) out.add_edge(label[a], label[b]);
  return out;
}

}  // namespace

TEST_CASE("DAG scoring worked example") {
  // Nodes 1..4 written 0-based.
  DagStructure truth(4, {{0, 1}, {1, 2}});
  DagStructure est(4, {{0, 1}, {2, 1}, {0, 3}});
  auto r = score_dag(truth, est);
  CHECK(r.T == 2);
  CHECK(r.P == 3);
  CHECK(r.E == 1);
  CHECK(r.R == 1);
  CHECK(r.FP == 1);
  CHECK(r.M == 0);
  CHECK(r.TPR == doctest::Approx(0.5));
  CHECK(r.FDR == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("identity and empty estimates") {
  DagStructure truth(4, {{0, 1}, {1, 2}, {3, 2}});
  auto r = score_dag(truth, truth);
  CHECK(r.TPR == 1.0);
  CHECK(r.FDR == 0.0);
  r = score_dag(truth, DagStructure(4));
  CHECK(r.P == 0);
  CHECK(r.TPR == 0.0);
  CHECK(r.FDR == 0.0);
  CHECK(r.M == 3);
  CHECK_THROWS(score_dag(truth, DagStructure(5)));
  CHECK_THROWS(score_skeleton(truth, DagStructure(3)));
}

TEST_CASE("skeleton scoring ignores direction") {
  DagStructure truth(2, {{0, 1}});
  auto r = score_skeleton(truth, DagStructure(2, {{1, 0}}));
  CHECK(r.E == 1);
  CHECK(r.R == 0);
  CHECK(r.TPR == 1.0);
  CHECK(r.FDR == 0.0);

  DagStructure t3(3, {{0, 1}});
  r = score_skeleton(t3, DagStructure(3, {{1, 2}}));
  CHECK(r.E == 0);
  CHECK(r.FDR == 1.0);
  CHECK(score_skeleton(t3, t3).TPR == 1.0);
}

TEST_CASE("count identities and skeleton dominance on random pairs") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    const int p = 2 + static_cast<int>(rng() % 9);
    auto truth = random_dag(rng, p, 0.3);
    auto est = random_dag(rng, p, 0.3);
    auto d = score_dag(truth, est);
    auto s = score_skeleton(truth, est);
    CHECK(d.P == d.E + d.R + d.FP);
    CHECK(d.M + d.E + d.R == d.T);
    CHECK(s.P == s.E + s.FP);
    CHECK(s.M + s.E == s.T);
    CHECK(s.TPR >= d.TPR);
    if (d.T > 0) CHECK(d.TPR == doctest::Approx(static_cast<double>(d.E) / d.T));
    if (d.P > 0) CHECK(d.FDR == doctest::Approx(static_cast<double>(d.R + d.FP) / d.P));
    CHECK(d.TPR >= 0.0);
    CHECK(d.TPR <= 1.0);
    CHECK(d.FDR >= 0.0);
    CHECK(d.FDR <= 1.0);

    // Consistent relabeling leaves every count unchanged.
    std::vector<int> label(p);
    std::iota(label.begin(), label.end(), 0);
    std::shuffle(label.begin(), label.end(), rng);
    auto d2 = score_dag(relabel(truth, label), relabel(est, label));
    CHECK(d2.E == d.E);
    CHECK(d2.R == d.R);
    CHECK(d2.FP == d.FP);
    CHECK(d2.M == d.M);
  }
}

TEST_CASE("aggregation") {
  EvalReport a, b;
  a.TPR = 0.4;
  b.TPR = 0.6;
  a.T = b.T = 10;
  std::vector<EvalReport> two{a, b};
  auto s = aggregate(two);
  CHECK(s.count == 2);
  CHECK(s.TPR.mean == doctest::Approx(0.5));
  CHECK(s.TPR.sd == doctest::Approx(std::sqrt(0.02)));
  CHECK(s.T.mean == 10.0);
  CHECK(s.T.sd == 0.0);

  std::vector<EvalReport> one{a};
  CHECK(aggregate(one).TPR.sd == 0.0);
  CHECK(aggregate(one).TPR.mean == 0.4);

  std::vector<EvalReport> same(20, b);
  auto z = aggregate(same);
  CHECK(z.TPR.sd == 0.0);
  CHECK(z.FDR.sd == 0.0);

  CHECK_THROWS(aggregate(std::vector<EvalReport>{}));
  EvalReport sk;
  sk.mode = EvalMode::skeleton;
  CHECK_THROWS(aggregate(std::vector<EvalReport>{a, sk}));
}

TEST_CASE("report rows") {
  DagStructure truth(4, {{0, 1}, {1, 2}});
  DagStructure est(4, {{0, 1}, {2, 1}, {0, 3}});
  std::ostringstream out;
  write_report_header(out);
  write_report_row(out, "x", score_dag(truth, est));
  const std::string text = out.str();
  CHECK(text.rfind("label,mode,T,P,E,R,M,FP,TPR,FDR\n", 0) == 0);
  CHECK(text.find("x,dag,2,3,1,1,0,1,0.5,") != std::string::npos);
}
