#include <doctest.h>

#include <fstream>

#include "dagcd/dataset.hpp"
#include "support.hpp"

using namespace dagcd;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
  auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("dummy coding of a three-level value") {
  CategoricalDataset ds(3, 2, {1, 1, 2, 1, 3, 2}, {3, 2});
  auto rows = encode(ds);
  CHECK(ds.dummy_dimension() == 1 + 2 + 1);
  CHECK(rows[0].segment(ds, 0)[0] == 0);
  CHECK(rows[0].segment(ds, 0)[1] == 0);
  CHECK(rows[1].segment(ds, 0)[0] == 1);
  CHECK(rows[2].segment(ds, 0)[1] == 1);
  for (const auto& x : rows) CHECK(x.bits[0] == 1);
}

TEST_CASE("encoding round-trips every level") {
  std::mt19937_64 rng(3);
  auto ds = testing::random_dataset(rng, 40, 4, 5);
  auto rows = encode(ds);
  for (int h = 0; h < ds.n(); ++h)
    for (int j = 0; j < ds.p(); ++j) {
      auto seg = rows[h].segment(ds, j);
      CHECK(decode_segment(seg) == ds.value(h, j));
      int ones = 0;
      for (auto b : seg) ones += b;
      CHECK(ones <= 1);
    }
}

TEST_CASE("observational and intervention rows partition the data per node") {
  CategoricalDataset ds(4, 2, {1, 2, 2, 1, 1, 1, 2, 2}, {2, 2},
                        {CategoricalDataset::kNoIntervention, 0, 1, CategoricalDataset::kNoIntervention});
  CHECK(ds.intervention_rows(0) == std::vector<int>{1});
  CHECK(ds.observational_rows(0) == std::vector<int>{0, 2, 3});
  CHECK(ds.intervention_rows(1) == std::vector<int>{2});
  CHECK(ds.observational_rows(1) == std::vector<int>{0, 1, 3});
  CHECK(ds.has_interventions());
  CHECK(indicator(ds, 0, 1, 2) == 1);
}

TEST_CASE("constructor rejects out-of-range levels") {
  CHECK_THROWS_AS(CategoricalDataset(1, 2, {1, 3}, {2, 2}), DataError);
  CHECK_THROWS_AS(CategoricalDataset(1, 2, {0, 1}, {2, 2}), DataError);
  CHECK_THROWS_AS(CategoricalDataset(1, 2, {1, 1}, {1, 2}), DataError);
}

TEST_CASE("CSV round trip with declared levels and interventions") {
  auto dir = testing::scratch_dir("dataset_roundtrip");
  std::mt19937_64 rng(5);
  auto ds = testing::random_dataset(rng, 30, 5, 4, true);
  write_csv(ds, dir / "d.csv");
  write_interventions_csv(ds, dir / "i.csv");
  auto back = load_csv(dir / "d.csv", dir / "i.csv");
  REQUIRE(back.n() == ds.n());
  REQUIRE(back.p() == ds.p());
  CHECK(back.levels() == ds.levels());
  for (int h = 0; h < ds.n(); ++h) {
    CHECK(back.intervened_node(h) == ds.intervened_node(h));
    for (int j = 0; j < ds.p(); ++j) CHECK(back.value(h, j) == ds.value(h, j));
  }
}

TEST_CASE("levels default to column maxima, at least two") {
  auto dir = testing::scratch_dir("dataset_levels");
  auto ds = load_csv(write_file(dir, "d.csv", "1,3\n1,1\n"));
  CHECK(ds.levels(0) == 2);
  CHECK(ds.levels(1) == 3);
}

TEST_CASE("loader errors") {
  auto dir = testing::scratch_dir("dataset_errors");
  CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "a.csv", "1,x\n")), doctest::Contains("non-integer"), DataError);
  CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "b.csv", "#levels: 2,2\n1,3\n")), doctest::Contains("level out of range"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "c.csv", "1,2\n1\n")), doctest::Contains("ragged"), DataError);
  auto data = write_file(dir, "d.csv", "1,2\n2,1\n");
  CHECK_THROWS_WITH_AS(load_csv(data, write_file(dir, "i.csv", "row_index,node_index\n1,1\n1,2\n")),
                       doctest::Contains("overlapping"), DataError);
  CHECK_THROWS_AS(load_csv(data, write_file(dir, "j.csv", "3,1\n")), DataError);
  CHECK_THROWS_AS(load_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("repeated identical intervention lines are accepted") {
  auto dir = testing::scratch_dir("dataset_repeat");
  auto data = write_file(dir, "d.csv", "1,2\n2,1\n");
  auto ds = load_csv(data, write_file(dir, "i.csv", "1,2\n1,2\n"));
  CHECK(ds.intervened_node(0) == 1);
  CHECK(ds.intervened_node(1) == CategoricalDataset::kNoIntervention);
}
