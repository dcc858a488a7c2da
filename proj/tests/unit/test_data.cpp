#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "metaal/data.hpp"
#include "../support/oracles.hpp"

using namespace metaal;
using namespace metaal::data;

namespace {

const BaseDataset& letter() {
  static const BaseDataset ds = load_dataset(METAAL_SOURCE_DIR "/data/letter.csv", Format::csv);
  return ds;
}

std::set<ClassId> as_set(const std::vector<ClassId>& v) { return {v.begin(), v.end()}; }

bool disjoint(const std::vector<ClassId>& a, const std::vector<ClassId>& b) {
  for (ClassId x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return false;
  }
  return true;
}

void check_problem(const BaseDataset& ds, const Problem& p, const ProblemShape& shape) {
  CHECK(p.classes.size() == shape.classes_per_problem);
  CHECK(as_set(p.classes).size() == p.classes.size());
  CHECK(p.pool.size() == shape.pool_size);
  CHECK(p.eval.size() == shape.eval_size);
  std::set<std::size_t> pool(p.pool.begin(), p.pool.end());
  CHECK(pool.size() == p.pool.size());
  for (std::size_t r : p.eval) CHECK(pool.count(r) == 0);
  const auto cls = as_set(p.classes);
  for (std::size_t r : p.pool) CHECK(cls.count(ds.label(r)) == 1);
  for (std::size_t r : p.eval) CHECK(cls.count(ds.label(r)) == 1);
}

}  // namespace

TEST_CASE("csv parsing") {
  SUBCASE("three rows, two classes") {
    std::istringstream in("1,2,b\n3,4,a\n5,6,b\n");
    auto ds = parse_csv(in);
    CHECK(ds.rows() == 3);
    CHECK(ds.feature_dim() == 2);
    CHECK(ds.class_count() == 2);
    CHECK(ds.class_names() == std::vector<std::string>{"a", "b"});
    CHECK(ds.rows_of(1) == std::vector<std::size_t>{0, 2});
    CHECK(ds.rows_of(0) == std::vector<std::size_t>{1});
    CHECK(ds.row(2)[1] == 6.0);
  }
  SUBCASE("label column by header name") {
    std::istringstream in("y,f1,f2\nx,1,2\nz,3,4\n");
    CsvOptions opts;
    opts.header = true;
    opts.label_name = "y";
    auto ds = parse_csv(in, opts);
    CHECK(ds.feature_dim() == 2);
    CHECK(ds.class_name(ds.label(1)) == "z");
    CHECK(ds.row(1)[0] == 3.0);
  }
  SUBCASE("wrong arity names the line") {
    std::istringstream in("1,2,a\n3,4,b\n5,b\n");
    try {
      parse_csv(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("non-numeric feature names the line") {
    std::istringstream in("1,2,a\n3,x,b\n");
    try {
      parse_csv(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK_THROWS_AS(parse_csv(in), ParseError);
  }
}

TEST_CASE("libsvm parsing densifies to the largest index") {
  std::istringstream in("1 1:0.5 3:2\n2 2:1\n1 1:-1 4:7\n");
  auto ds = parse_libsvm(in);
  CHECK(ds.rows() == 3);
  CHECK(ds.feature_dim() == 4);
  CHECK(ds.class_count() == 2);
  CHECK(std::vector<double>(ds.row(0).begin(), ds.row(0).end()) == std::vector<double>{0.5, 0, 2, 0});
  CHECK(std::vector<double>(ds.row(2).begin(), ds.row(2).end()) == std::vector<double>{-1, 0, 0, 7});

  std::istringstream bad("1 1:0.5\n2 0:1\n");
  try {
    parse_libsvm(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream unordered("1 3:1 2:1\n");
  CHECK_THROWS_AS(parse_libsvm(unordered), ParseError);
}

TEST_CASE("load_dataset errors") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv", Format::csv), ParseError);
  CHECK(parse_format("libsvm") == Format::libsvm);
  CHECK_THROWS(parse_format("arff"));
}

TEST_CASE("letter has 26 classes and 16 features") {
  const auto& ds = letter();
  CHECK(ds.rows() == 20000);
  CHECK(ds.feature_dim() == 16);
  CHECK(ds.class_count() == 26);
  for (std::size_t c = 0; c < ds.class_count(); ++c) CHECK(!ds.rows_of(static_cast<ClassId>(c)).empty());
}

TEST_CASE("class partition") {
  const auto& ds = letter();
  auto p = partition_classes(ds, {10, 7, 9}, 3);
  CHECK(p.train.size() == 10);
  CHECK(p.validation.size() == 7);
  CHECK(p.test.size() == 9);
  CHECK(disjoint(p.train, p.validation));
  CHECK(disjoint(p.train, p.test));
  CHECK(disjoint(p.validation, p.test));

  auto again = partition_classes(ds, {10, 7, 9}, 3);
  CHECK(p.train == again.train);
  CHECK(p.validation == again.validation);
  CHECK(p.test == again.test);

  auto all = partition_classes(ds, {26, 0, 0}, 1);
  CHECK(as_set(all.train).size() == 26);
  CHECK(all.validation.empty());
  CHECK(all.test.empty());

  CHECK_THROWS_AS(partition_classes(ds, {20, 7, 0}, 1), SamplingError);

  auto back = partition_from_json(to_json(p));
  CHECK(back.test == p.test);
}

TEST_CASE("sample_problem") {
  const auto& ds = letter();
  auto part = partition_classes(ds, {10, 7, 9}, 0);
  ProblemShape shape{2, 25, 40, false};

  SUBCASE("letter shape invariants over many seeds") {
    for (std::uint64_t s = 0; s < 200; ++s) check_problem(ds, sample_problem(ds, part.train, shape, s), shape);
    shape.balanced = true;
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto p = sample_problem(ds, part.train, shape, s);
      check_problem(ds, p, shape);
      std::size_t first = 0;
      for (std::size_t r : p.pool) first += p.local_label(ds, r) == 0;
      CHECK((first == 12 || first == 13));
    }
  }
  SUBCASE("exhaustive split stays disjoint") {
    std::istringstream in("0,a\n1,a\n2,a\n3,b\n4,b\n5,c\n");
    auto tiny = parse_csv(in);
    std::vector<ClassId> classes{0, 1};
    ProblemShape s{2, 3, 2, false};
    auto p = sample_problem(tiny, classes, s, 9);
    check_problem(tiny, p, s);
    s.eval_size = 3;
    CHECK_THROWS_AS(sample_problem(tiny, classes, s, 9), SamplingError);
  }
  SUBCASE("too many classes requested") {
    ProblemShape s{11, 25, 40, false};
    CHECK_THROWS_AS(sample_problem(ds, part.train, s, 0), SamplingError);
  }
  SUBCASE("different seeds give different pools") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto a = sample_problem(ds, part.train, shape, 2 * s);
      auto b = sample_problem(ds, part.train, shape, 2 * s + 1);
      CHECK(a.pool != b.pool);
    }
  }
  SUBCASE("same seed gives the same problem") {
    auto a = sample_problem(ds, part.train, shape, 77);
    auto b = sample_problem(ds, part.train, shape, 77);
    CHECK(to_json(a) == to_json(b));
    CHECK(to_json(problem_from_json(to_json(a))) == to_json(a));
  }
}

TEST_CASE("problem suite") {
  const auto& ds = letter();
  auto part = partition_classes(ds, {10, 7, 9}, 0);
  ProblemShape shape{2, 25, 40, false};
  auto suite = make_problem_suite(ds, part, shape, {2000, 500, 500}, 11);
  CHECK(suite.train.size() == 2000);
  CHECK(suite.validation.size() == 500);
  CHECK(suite.test.size() == 500);

  auto scan = [&](const std::vector<Problem>& ps, const std::vector<ClassId>& allowed) {
    const auto ok = as_set(allowed);
    std::set<ClassId> seen;
    for (const auto& p : ps) {
      check_problem(ds, p, shape);
      for (std::size_t r : p.pool) seen.insert(ds.label(r));
      for (std::size_t r : p.eval) seen.insert(ds.label(r));
    }
    for (ClassId c : seen) CHECK(ok.count(c) == 1);
    return seen;
  };
  const auto tr = scan(suite.train, part.train);
  const auto va = scan(suite.validation, part.validation);
  const auto te = scan(suite.test, part.test);
  for (ClassId c : te) {
    CHECK(tr.count(c) == 0);
    CHECK(va.count(c) == 0);
  }
  for (ClassId c : va) CHECK(tr.count(c) == 0);

  auto again = make_problem_suite(ds, part, shape, {2000, 500, 500}, 11);
  CHECK(to_json(suite).dump() == to_json(again).dump());
  CHECK(to_json(suite_from_json(to_json(suite))).dump() == to_json(suite).dump());

  auto singles = make_problem_suite(ds, part, shape, {1, 1, 1}, 4);
  CHECK(singles.train.size() == 1);
  CHECK(singles.validation.size() == 1);
  CHECK(singles.test.size() == 1);
}

TEST_CASE("oracle") {
  const auto& ds = letter();
  auto part = partition_classes(ds, {10, 7, 9}, 0);
  auto p = sample_problem(ds, part.test, {3, 25, 40, false}, 5);
  Oracle o(ds, p);
  std::vector<std::size_t> all(p.pool.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto labels = o.query(all);
  REQUIRE(labels.size() == p.pool.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(labels[i] == p.local_label(ds, p.pool[i]));
  const std::vector<std::size_t> twice{4, 4};
  auto t = o.query(twice);
  CHECK(t[0] == t[1]);
  CHECK(o.query(std::vector<std::size_t>{}).empty());
  CHECK_THROWS_AS(o.query(std::vector<std::size_t>{25}), std::out_of_range);
}

TEST_CASE("standardization uses the fit classes only") {
  auto ds = testing::blob_dataset(4, 30, 3, 0.5, 2);
  const std::vector<ClassId> fit{0, 1};
  auto z = ds.standardized(fit);
  for (std::size_t d = 0; d < 3; ++d) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (ClassId c : fit) {
      for (std::size_t r : z.rows_of(c)) {
        sum += z.row(r)[d];
        sq += z.row(r)[d] * z.row(r)[d];
        ++n;
      }
    }
    CHECK(std::abs(sum / n) < 1e-12);
    CHECK(std::abs(sq / n - 1.0) < 1e-9);
  }
  CHECK(z.labels() == ds.labels());
}

TEST_CASE("file fingerprint tracks content") {
  const auto dir = testing::temp_dir("fingerprint");
  std::ofstream(dir / "a.csv") << "1,a\n";
  std::ofstream(dir / "b.csv") << "1,a\n";
  std::ofstream(dir / "c.csv") << "2,a\n";
  CHECK(file_fingerprint(dir / "a.csv") == file_fingerprint(dir / "b.csv"));
  CHECK(file_fingerprint(dir / "a.csv") != file_fingerprint(dir / "c.csv"));
}
