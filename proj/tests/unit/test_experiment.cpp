#include <doctest.h>

#include <fstream>
#include <sstream>

#include "metaal/experiment.hpp"
#include "../support/oracles.hpp"

using namespace metaal;
using namespace metaal::experiment;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
  for (const auto& e : errs) {
    if (e.find(needle) != std::string::npos) return true;
  }
  return false;
}

RunConfig tiny_run(const std::filesystem::path& dataset, const std::filesystem::path& out) {
  RunConfig c;
  c.dataset = dataset.string();
  c.partition = {6, 3, 3};
  c.shape = {2, 8, 10, false};
  c.problems = {30, 10, 20};
  c.budgets = {2, 3};
  c.embed_dim = 3;
  c.hidden_dim = 4;
  c.train.episodes = 20;
  c.train.eval_interval = 10;
  c.train.mc_samples = 2;
  c.out = out;
  c.seed = 5;
  return c;
}

ResultRow row(std::string strategy, std::size_t budget, double acc) {
  return {"toy", 2, budget, std::move(strategy), "test", acc, 0.1, 50, 0};
}

void write_rows(const std::filesystem::path& p, const std::vector<ResultRow>& rows) {
  std::ofstream f(p);
  f << results_header() << '\n';
  for (const auto& r : rows) f << format_row(r) << '\n';
}

const std::filesystem::path& synthetic_csv() {
  static const auto path = [] {
    const auto dir = testing::temp_dir("experiment-data");
    SyntheticSpec spec;
    spec.classes = 12;
    spec.per_class = 30;
    spec.features = 4;
    spec.seed = 1;
    gen_synthetic(spec, dir / "synth.csv");
    return dir / "synth.csv";
  }();
  return path;
}

}  // namespace

TEST_CASE("config validation lists every problem") {
  RunConfig c;
  c.dataset = "x.csv";
  c.out = "out";
  c.budgets = {0, 30, 30};
  c.train.learning_rate = -1.0;
  c.train.temperature = 0.0;
  c.train.mc_samples = 0;
  c.embed_activation = "swish";
  c.strategies = {selector::Strategy::random, selector::Strategy::random};
  const auto errs = c.check();
  CHECK(mentions(errs, "--budgets: budget must be >= 1"));
  CHECK(mentions(errs, "--budgets: budget 30 exceeds pool size 25"));
  CHECK(mentions(errs, "--budgets: duplicate budget 30"));
  CHECK(mentions(errs, "--lr"));
  CHECK(mentions(errs, "--temperature"));
  CHECK(mentions(errs, "--mc-samples"));
  CHECK(mentions(errs, "--embed-activation"));
  CHECK(mentions(errs, "--strategy: duplicate"));
  CHECK(errs.size() >= 8);

  RunConfig ok;
  ok.dataset = "x.csv";
  ok.out = "out";
  CHECK(ok.check().empty());
}

TEST_CASE("config validation against the data") {
  const auto ds = data::load_dataset(synthetic_csv(), data::Format::csv);
  RunConfig c = tiny_run(synthetic_csv(), "unused");
  CHECK(check_against(c, ds).empty());
  c.partition = {10, 3, 3};
  CHECK(mentions(check_against(c, ds), "--split"));
  c = tiny_run(synthetic_csv(), "unused");
  c.shape.pool_size = 50;
  c.shape.eval_size = 20;
  CHECK(!check_against(c, ds).empty());
}

TEST_CASE("run config json round trip") {
  RunConfig c = tiny_run("data.csv", "out/dir");
  c.standardize = true;
  c.embed_hidden = {5, 6};
  c.train.optimizer = trainer::OptimizerKind::adam;
  const auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("run, append and replay") {
  const auto dir = testing::temp_dir("experiment-run");
  const auto cfg = tiny_run(synthetic_csv(), dir / "a");
  const auto outputs = run_experiment(cfg);

  std::size_t test_rows = 0;
  for (const auto& r : outputs.rows) {
    CHECK(r.accuracy_mean >= 0.0);
    CHECK(r.accuracy_mean <= 1.0);
    CHECK(r.accuracy_std >= 0.0);
    test_rows += r.split == "test";
  }
  CHECK(test_rows == 6);
  for (const char* name : {"policy_k2.mpck", "policy_k3.mpck", "random_k2.mpck", "kmedoids_k3.mpck"}) {
    CHECK(std::filesystem::exists(dir / "a" / "checkpoints" / name));
  }
  CHECK(read_results(outputs.results_csv).size() == outputs.rows.size());
  CHECK(std::filesystem::exists(outputs.train_log));

  const auto manifest = nlohmann::json::parse(slurp(outputs.manifest));
  CHECK(manifest.at("schema_version") == 1);
  CHECK(manifest.at("suite").at("test").size() == 20);

  SUBCASE("replay reproduces results byte for byte") {
    replay(outputs.manifest, dir / "b");
    CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));
    CHECK(slurp(dir / "a" / "train_log.csv") == slurp(dir / "b" / "train_log.csv"));
  }
  SUBCASE("a second run appends rows") {
    run_experiment(cfg);
    CHECK(read_results(outputs.results_csv).size() == 2 * outputs.rows.size());
  }
  SUBCASE("a results file with another schema is refused") {
    std::ofstream(dir / "a" / "results.csv") << "dataset,accuracy\n";
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  }
  SUBCASE("replay refuses a changed dataset") {
    auto m = manifest;
    m["dataset"]["fingerprint"] = "0000000000000000";
    std::ofstream(dir / "edited.json") << m.dump();
    CHECK_THROWS(replay(dir / "edited.json", dir / "c"));
  }
}

TEST_CASE("missing dataset is a configuration error") {
  auto cfg = tiny_run("/nonexistent/data.csv", testing::temp_dir("experiment-missing"));
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("compare") {
  const auto dir = testing::temp_dir("compare");

  SUBCASE("single file is an identity pivot") {
    write_rows(dir / "a.csv", {row("random", 2, 0.6), row("policy", 2, 0.7), row("random", 4, 0.8)});
    const auto t = compare({dir / "a.csv"});
    CHECK(t.columns == std::vector<std::string>{"random", "policy"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].budget == 2);
    CHECK(*t.rows[0].values[0] == 0.6);
    CHECK(*t.rows[0].values[1] == 0.7);
    CHECK(*t.rows[1].values[0] == 0.8);
    CHECK(!t.rows[1].values[1].has_value());
    const auto j = to_json(t);
    CHECK(j["rows"][0]["deltas"]["policy-random"].get<double>() == doctest::Approx(0.1));
    CHECK(j["rows"][1]["deltas"]["policy-random"].is_null());
  }
  SUBCASE("two files with different strategies fill the delta column") {
    write_rows(dir / "r.csv", {row("random", 2, 0.6)});
    write_rows(dir / "k.csv", {row("kmedoids", 2, 0.65)});
    const auto t = compare({dir / "r.csv", dir / "k.csv"});
    CHECK(t.columns == std::vector<std::string>{"random", "kmedoids"});
    REQUIRE(t.deltas.size() == 1);
    const auto table = format_table(t);
    CHECK(table.find("kmedoids-random") != std::string::npos);
    CHECK(table.find("+0.0500") != std::string::npos);
  }
  SUBCASE("same strategy in two files gets a column per file") {
    write_rows(dir / "x.csv", {row("policy", 2, 0.6)});
    write_rows(dir / "y.csv", {row("policy", 2, 0.7)});
    const auto t = compare({dir / "x.csv", dir / "y.csv"});
    CHECK(t.columns == std::vector<std::string>{"policy#1", "policy#2"});
  }
  SUBCASE("repeated cells are averaged") {
    write_rows(dir / "s.csv", {row("random", 2, 0.6), row("random", 2, 0.7)});
    CHECK(*compare({dir / "s.csv"}).rows[0].values[0] == doctest::Approx(0.65));
  }
  SUBCASE("empty file reports no rows") {
    std::ofstream(dir / "empty.csv").close();
    try {
      compare({dir / "empty.csv"});
      FAIL("expected CompareError");
    } catch (const CompareError& e) {
      CHECK(std::string(e.what()) == "no rows");
    }
  }
  SUBCASE("schema mismatch") {
    std::ofstream(dir / "bad.csv") << "dataset,budget\ntoy,2\n";
    CHECK_THROWS_AS(compare({dir / "bad.csv"}), CompareError);
    std::ofstream(dir / "v2.csv") << results_header() << "\n2,toy,2,2,random,test,0.5,0.1,50,0\n";
    CHECK_THROWS_AS(compare({dir / "v2.csv"}), CompareError);
  }
}

TEST_CASE("synthetic data") {
  const auto dir = testing::temp_dir("synthetic");

  SUBCASE("letter-sized output") {
    SyntheticSpec spec;
    gen_synthetic(spec, dir / "big.csv");
    const auto ds = data::load_dataset(dir / "big.csv", data::Format::csv);
    CHECK(ds.rows() == 4000);
    CHECK(ds.feature_dim() == 16);
    CHECK(ds.class_count() == 40);
    for (std::size_t c = 0; c < 40; ++c) CHECK(ds.rows_of(static_cast<data::ClassId>(c)).size() == 100);
  }

  SUBCASE("zero spread with one label per class is perfectly classified") {
    SyntheticSpec spec{2, 50, 3, 0.0, 4};
    gen_synthetic(spec, dir / "points.csv");
    const auto ds = data::load_dataset(dir / "points.csv", data::Format::csv);
    const data::ClassPartition part{{}, {}, {0, 1}};
    const auto suite = data::make_problem_suite(ds, part, {2, 10, 20, true}, {0, 0, 20}, 1);
    const std::vector<std::size_t> one_each{0, 1};
    for (const auto& p : suite.test) {
      std::vector<std::size_t> pick;
      for (std::size_t cls : one_each) {
        for (std::size_t i = 0; i < p.pool.size(); ++i) {
          if (p.local_label(ds, p.pool[i]) == cls) {
            pick.push_back(i);
            break;
          }
        }
      }
      selector::SelectionMask m;
      m.alpha.assign(p.pool.size(), 0);
      for (std::size_t i : pick) m.alpha[i] = 1;
      m.chosen = pick;
      auto model = trainer::Model::create(trainer::ModelSpec{{3, {}}, 2}, 0);
      trainer::TrainConfig cfg;
      cfg.temperature = 1e6;
      const auto loss = trainer::episode_loss(ds, p, m, model, cfg);
      CHECK(loss.prediction < 1e-9);
    }
  }

  SUBCASE("large spread pushes random accuracy toward 1/P") {
    auto random_accuracy = [&](double spread) {
      SyntheticSpec spec{6, 60, 4, spread, 2};
      gen_synthetic(spec, dir / "s.csv");
      const auto ds = data::load_dataset(dir / "s.csv", data::Format::csv);
      const data::ClassPartition part{{}, {}, {0, 1, 2, 3, 4, 5}};
      const auto suite = data::make_problem_suite(ds, part, {2, 25, 40, false}, {0, 0, 300}, 3);
      auto model = trainer::Model::create(trainer::ModelSpec{{4, {}}, 2}, 0);
      trainer::TrainConfig cfg;
      return trainer::evaluate(ds, suite.test, model, selector::Strategy::random, 4, cfg, 1).mean;
    };
    const double tight = random_accuracy(0.05);
    const double loose = random_accuracy(20.0);
    CHECK(tight > 0.85);
    CHECK(loose < tight);
    CHECK(std::abs(loose - 0.5) < 0.05);
  }

  SUBCASE("invalid sizes are rejected") {
    CHECK_THROWS(gen_synthetic({0, 10, 2, 0.5, 0}, dir / "bad.csv"));
    CHECK_THROWS(gen_synthetic({2, 10, 2, -1.0, 0}, dir / "bad.csv"));
  }
}
