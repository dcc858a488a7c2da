#include <algorithm>
#include <numeric>

#include "metaal/data.hpp"
#include "metaal/random.hpp"

namespace metaal::data {

namespace {

// Moves a uniformly chosen subset of size k to the front of v (partial Fisher-Yates).
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k && i + 1 < v.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
    std::swap(v[i], v[pick(rng)]);
  }
}

enum SplitTag : std::uint64_t { kTrainTag = 1, kValidationTag = 2, kTestTag = 3 };

}  // namespace

ClassPartition partition_classes(const BaseDataset& ds, PartitionCounts counts, std::uint64_t seed) {
  const std::size_t total = counts.train + counts.validation + counts.test;
  if (total > ds.class_count()) {
    throw SamplingError("partition asks for " + std::to_string(total) + " classes but the dataset has " +
                        std::to_string(ds.class_count()));
  }
  std::vector<ClassId> ids(ds.class_count());
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  partial_shuffle(ids, total, rng);

  ClassPartition p;
  auto take = [&](std::size_t from, std::size_t n) {
    std::vector<ClassId> out(ids.begin() + static_cast<std::ptrdiff_t>(from),
                             ids.begin() + static_cast<std::ptrdiff_t>(from + n));
    std::sort(out.begin(), out.end());
    return out;
  };
  p.train = take(0, counts.train);
  p.validation = take(counts.train, counts.validation);
  p.test = take(counts.train + counts.validation, counts.test);
  return p;
}

std::size_t Problem::local_label(const BaseDataset& ds, std::size_t row) const {
  const ClassId c = ds.label(row);
  auto it = std::find(classes.begin(), classes.end(), c);
  if (it == classes.end()) throw std::out_of_range("row " + std::to_string(row) + " is not in the problem's classes");
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<std::size_t> Problem::eval_labels(const BaseDataset& ds) const {
  std::vector<std::size_t> out;
  out.reserve(eval.size());
  for (std::size_t r : eval) out.push_back(local_label(ds, r));
  return out;
}

Problem sample_problem(const BaseDataset& ds, std::span<const ClassId> classes, const ProblemShape& shape,
                       std::uint64_t seed, std::size_t id) {
  const std::size_t P = shape.classes_per_problem, N = shape.pool_size, M = shape.eval_size;
  if (P == 0 || N == 0 || M == 0) throw SamplingError("P, N and M must all be positive");
  if (P > classes.size()) {
    throw SamplingError("P=" + std::to_string(P) + " exceeds the " + std::to_string(classes.size()) +
                        " available classes");
  }
  Rng rng(seed);
  std::vector<ClassId> pool_classes(classes.begin(), classes.end());
  partial_shuffle(pool_classes, P, rng);
  pool_classes.resize(P);

  Problem prob;
  prob.id = id;
  prob.seed = seed;
  prob.classes = pool_classes;

  if (!shape.balanced) {
    std::vector<std::size_t> rows;
    for (ClassId c : pool_classes) {
      const auto& r = ds.rows_of(c);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    std::sort(rows.begin(), rows.end());
    if (rows.size() < N + M) {
      throw SamplingError("classes hold " + std::to_string(rows.size()) + " rows, need N+M=" + std::to_string(N + M));
    }
    partial_shuffle(rows, N + M, rng);
    prob.pool.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(N));
    prob.eval.assign(rows.begin() + static_cast<std::ptrdiff_t>(N),
                     rows.begin() + static_cast<std::ptrdiff_t>(N + M));
    return prob;
  }

  // Stratified: each class gets floor(N/P) pool rows (+1 for the first N%P
  // classes), likewise for eval.
  for (std::size_t c = 0; c < P; ++c) {
    const std::size_t np = N / P + (c < N % P ? 1 : 0);
    const std::size_t ne = M / P + (c < M % P ? 1 : 0);
    std::vector<std::size_t> rows = ds.rows_of(pool_classes[c]);
    if (rows.size() < np + ne) {
      throw SamplingError("class " + ds.class_name(pool_classes[c]) + " has " + std::to_string(rows.size()) +
                          " rows, balanced sampling needs " + std::to_string(np + ne));
    }
    partial_shuffle(rows, np + ne, rng);
    prob.pool.insert(prob.pool.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(np));
    prob.eval.insert(prob.eval.end(), rows.begin() + static_cast<std::ptrdiff_t>(np),
                     rows.begin() + static_cast<std::ptrdiff_t>(np + ne));
  }
  partial_shuffle(prob.pool, prob.pool.size(), rng);
  partial_shuffle(prob.eval, prob.eval.size(), rng);
  return prob;
}

ProblemSuite make_problem_suite(const BaseDataset& ds, const ClassPartition& partition, const ProblemShape& shape,
                                SuiteCounts counts, std::uint64_t master_seed) {
  auto build = [&](const std::vector<ClassId>& classes, std::size_t n, std::uint64_t tag) {
    std::vector<Problem> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      out.push_back(sample_problem(ds, classes, shape, derive_seed(master_seed, tag, j), j));
    }
    return out;
  };
  ProblemSuite suite;
  suite.train = build(partition.train, counts.train, kTrainTag);
  suite.validation = build(partition.validation, counts.validation, kValidationTag);
  suite.test = build(partition.test, counts.test, kTestTag);
  return suite;
}

Oracle::Oracle(const BaseDataset& ds, const Problem& problem) {
  labels_.reserve(problem.pool.size());
  for (std::size_t r : problem.pool) labels_.push_back(problem.local_label(ds, r));
}

std::vector<std::size_t> Oracle::query(std::span<const std::size_t> pool_indices) const {
  std::vector<std::size_t> out;
  out.reserve(pool_indices.size());
  for (std::size_t i : pool_indices) {
    if (i >= labels_.size()) {
      throw std::out_of_range("oracle query index " + std::to_string(i) + " outside pool of size " +
                              std::to_string(labels_.size()));
    }
    out.push_back(labels_[i]);
  }
  return out;
}

nlohmann::json to_json(const ClassPartition& p) {
  return {{"train", p.train}, {"validation", p.validation}, {"test", p.test}};
}

ClassPartition partition_from_json(const nlohmann::json& j) {
  return {j.at("train").get<std::vector<ClassId>>(), j.at("validation").get<std::vector<ClassId>>(),
          j.at("test").get<std::vector<ClassId>>()};
}

nlohmann::json to_json(const Problem& p) {
  return {{"id", p.id}, {"seed", p.seed}, {"classes", p.classes}, {"pool", p.pool}, {"eval", p.eval}};
}

Problem problem_from_json(const nlohmann::json& j) {
  Problem p;
  p.id = j.at("id").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.classes = j.at("classes").get<std::vector<ClassId>>();
  p.pool = j.at("pool").get<std::vector<std::size_t>>();
  p.eval = j.at("eval").get<std::vector<std::size_t>>();
  return p;
}

nlohmann::json to_json(const ProblemSuite& s) {
  auto arr = [](const std::vector<Problem>& ps) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back(to_json(p));
    return a;
  };
  return {{"train", arr(s.train)}, {"validation", arr(s.validation)}, {"test", arr(s.test)}};
}

ProblemSuite suite_from_json(const nlohmann::json& j) {
  auto arr = [](const nlohmann::json& a) {
    std::vector<Problem> out;
    for (const auto& p : a) out.push_back(problem_from_json(p));
    return out;
  };
  return {arr(j.at("train")), arr(j.at("validation")), arr(j.at("test"))};
}

}  // namespace metaal::data
