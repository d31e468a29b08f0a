#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "lassoflex/data.hpp"
#include "lassoflex/errors.hpp"

using namespace lfn;
using namespace lfn::data;

namespace {

TabularDataset from_text(const std::string& text, const std::string& target, CsvOptions opt = {}) {
  return dataset_from_table(parse_csv(text), target, opt);
}

TabularDataset numeric_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0, 1);
  TabularDataset ds;
  for (std::size_t j = 0; j < d; ++j) {
    Column c;
    c.name = "x" + std::to_string(j);
    c.numeric.resize(n);
    for (auto& v : c.numeric) v = n01(rng);
    ds.columns.push_back(c);
  }
  ds.target.resize(n);
  for (auto& v : ds.target) v = n01(rng);
  return ds;
}

}  // namespace

TEST_CASE("csv typing") {
  auto ds = from_text("a,colour,y\n1.5,red,0.1\n2,blue,0.2\n-3e2,red,0.35\n", "y");
  REQUIRE(ds.features() == 2);
  CHECK(ds.columns[0].kind == ColumnKind::Numeric);
  CHECK(ds.columns[0].numeric == std::vector<double>{1.5, 2, -300});
  CHECK(ds.columns[1].kind == ColumnKind::Categorical);
  CHECK(ds.task == Task::Regression);
  CHECK(ds.rows() == 3);

  auto cls = from_text("a,label\n1,yes\n2,no\n3,yes\n", "label");
  CHECK(cls.task == Task::Classification);
  CHECK(cls.class_names == std::vector<std::string>{"no", "yes"});
  CHECK(cls.target == std::vector<double>{1, 0, 1});

  auto ints = from_text("a,k\n1,2\n2,10\n3,2\n", "k");
  CHECK(ints.task == Task::Classification);
  CHECK(ints.class_names == std::vector<std::string>{"2", "10"});
}

TEST_CASE("csv errors") {
  try {
    from_text("a,b\n1,2\n", "price");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("price") != std::string::npos);
  }
  try {
    from_text("a,y\n1,2\n3\n4,5,6\n", "y");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("3, 4") != std::string::npos);
  }
  CHECK_THROWS_AS(from_text("a,y\n1,\n2,3\n", "y"), DataError);
  CsvOptions drop;
  drop.drop_incomplete_rows = true;
  auto ds = from_text("a,y\n1,\n2,3.5\n", "y", drop);
  CHECK(ds.rows() == 1);
  CHECK(ds.dropped_rows == 1);
  CHECK_THROWS_AS(parse_csv("a,\"b\n"), DataError);
}

TEST_CASE("csv quoting") {
  auto rows = parse_csv("name,v\r\n\"Smith, J\",1\r\n\"say \"\"hi\"\"\",2\r\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "Smith, J");
  CHECK(rows[2][0] == "say \"hi\"");
}

TEST_CASE("csv round trip") {
  auto ds = from_text("a,colour,y\n1.5,\"r,ed\",0.1\n0.1,blue,0.2\n-3e2,\"r,ed\",1e-7\n", "y");
  auto back = from_text(to_csv(ds), "y");
  CHECK(back.columns[0].numeric == ds.columns[0].numeric);
  CHECK(back.columns[1].raw == ds.columns[1].raw);
  CHECK(back.target == ds.target);
  CHECK(to_csv(back) == to_csv(ds));

  const std::string path = "data_roundtrip.csv";
  write_csv(ds, path);
  auto disk = load_csv(path, "y");
  CHECK(to_csv(disk) == to_csv(ds));
  std::remove(path.c_str());
}

TEST_CASE("split sizes, determinism and temporal order") {
  auto ds = numeric_dataset(100, 2, 1);
  split(ds, {}, SplitMode::Random, 7);
  CHECK(ds.rows_in(SplitLabel::Train).size() == 65);
  CHECK(ds.rows_in(SplitLabel::Val).size() == 15);
  CHECK(ds.rows_in(SplitLabel::Test).size() == 20);
  auto again = numeric_dataset(100, 2, 1);
  split(again, {}, SplitMode::Random, 7);
  CHECK(again.split == ds.split);

  auto t = numeric_dataset(10, 1, 2);
  std::vector<double> stamps = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  split(t, {0.6, 0.2, 0.2}, SplitMode::Temporal, 0, stamps);
  for (std::size_t r = 0; r < 10; ++r) {
    if (stamps[r] <= 6) CHECK(t.split[r] == SplitLabel::Train);
    else if (stamps[r] <= 8) CHECK(t.split[r] == SplitLabel::Val);
    else CHECK(t.split[r] == SplitLabel::Test);
  }
  CHECK_THROWS_AS(split(t, {0.5, 0.2, 0.2}, SplitMode::Random, 0), ConfigError);
}

TEST_CASE("standardization uses training statistics only") {
  TabularDataset ds;
  Column c;
  c.name = "x";
  c.numeric = {2, 4, 100, -50};
  ds.columns.push_back(c);
  ds.target = {1, 3, 7, 9};
  ds.split = {SplitLabel::Train, SplitLabel::Train, SplitLabel::Val, SplitLabel::Test};
  const auto orig = ds;
  auto s = standardize_fit_apply(ds);
  CHECK(s.mean[0] == 3.0);
  CHECK(s.std[0] == 1.0);
  CHECK(ds.columns[0].numeric[0] == -1.0);
  CHECK(ds.columns[0].numeric[1] == 1.0);
  CHECK(ds.columns[0].numeric[2] == (100.0 - 3.0) / 1.0);
  CHECK(ds.target[2] == (7.0 - 2.0) / 1.0);
  s.invert(ds);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(std::abs(ds.columns[0].numeric[r] - orig.columns[0].numeric[r]) < 1e-12);
    CHECK(std::abs(ds.target[r] - orig.target[r]) < 1e-12);
  }
  // Mutating held-out rows leaves the statistics unchanged.
  auto mutated = orig;
  mutated.columns[0].numeric[2] = 1e6;
  mutated.target[3] = -1e6;
  auto s2 = standardize_fit_apply(mutated);
  CHECK(s2.mean == s.mean);
  CHECK(s2.std == s.std);
  CHECK(s2.target_mean == s.target_mean);
}

TEST_CASE("constant training column gets the floored std") {
  TabularDataset ds;
  Column c;
  c.name = "x";
  c.numeric = {5, 5, 6};
  ds.columns.push_back(c);
  ds.target = {0, 1, 2};
  ds.split = {SplitLabel::Train, SplitLabel::Train, SplitLabel::Test};
  auto s = standardize_fit_apply(ds);
  CHECK(s.std[0] == 1e-12);
  CHECK(ds.columns[0].numeric[0] == 0.0);
}

TEST_CASE("vocabulary comes from the training split") {
  auto ds = from_text("c,y\na,1.5\nb,2.5\nc,3.5\na,4.5\n", "y");
  ds.split = {SplitLabel::Train, SplitLabel::Train, SplitLabel::Test, SplitLabel::Val};
  build_vocabularies(ds);
  CHECK(ds.columns[0].vocab == std::vector<std::string>{"a", "b"});
  CHECK(ds.columns[0].ids == std::vector<int>{0, 1, -1, 0});
  auto x = expanded_matrix(ds, {0, 1, 2});
  CHECK(x.shape() == nd::Shape{3, 2});
  CHECK(x.at(2, 0) == 0.0);
  CHECK(x.at(2, 1) == 0.0);
  CHECK(feature_matrix(ds, {2}).at(0, 0) == -1.0);

  auto mutated = ds;
  mutated.columns[0].raw[2] = "zzz";
  build_vocabularies(mutated);
  CHECK(mutated.columns[0].vocab == ds.columns[0].vocab);
}

TEST_CASE("noise injection arithmetic and bookkeeping") {
  CHECK(noise_extras(8, 0.5) == 8);
  CHECK(noise_extras(4, 0.75) == 12);
  CHECK_THROWS_AS(noise_extras(4, 1.0), ConfigError);

  auto ds = numeric_dataset(10000, 4, 3);
  inject_noise_features(ds, 0.75, NoiseKind::Random, 11);
  CHECK(ds.features() == 16);
  for (std::size_t c = 4; c < 16; ++c) {
    CHECK(ds.columns[c].injected);
    double sxy = 0, sxx = 0, syy = 0, mx = 0, my = 0;
    const std::size_t n = ds.rows();
    for (std::size_t r = 0; r < n; ++r) {
      mx += ds.columns[c].numeric[r] / double(n);
      my += ds.target[r] / double(n);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const double a = ds.columns[c].numeric[r] - mx, b = ds.target[r] - my;
      sxy += a * b;
      sxx += a * a;
      syy += b * b;
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.1);
  }
  auto so = numeric_dataset(200, 3, 4);
  inject_noise_features(so, 0.5, NoiseKind::SecondOrder, 5);
  CHECK(so.features() == 6);
  double mu = 0;
  for (double v : so.columns[5].numeric) mu += v / 200.0;
  CHECK(std::abs(mu) < 1e-12);

  auto cat = from_text("c,y\na,1.5\nb,2.5\n", "y");
  CHECK_THROWS_AS(inject_noise_features(cat, 0.5, NoiseKind::SecondOrder, 1), ConfigError);
}

TEST_CASE("sidecar preserves flags, vocabularies and splits") {
  auto ds = numeric_dataset(20, 2, 6);
  ds.columns[0].relevant = true;
  inject_noise_features(ds, 0.5, NoiseKind::Random, 2);
  split(ds, {}, SplitMode::Random, 3);
  const auto j = nlohmann::ordered_json::parse(sidecar_json(ds).dump());
  auto back = dataset_from_table(parse_csv(to_csv(ds)), "target", CsvOptions{.kinds = sidecar_kinds(j)});
  apply_sidecar(back, j);
  CHECK(back.split == ds.split);
  CHECK(back.columns[0].relevant == std::optional<bool>(true));
  CHECK_FALSE(back.columns[1].relevant.has_value());
  CHECK(back.columns[2].injected);
  CHECK(back.columns[2].relevant == std::optional<bool>(false));
}
