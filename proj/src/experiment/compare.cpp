#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "metaal/experiment.hpp"

namespace metaal::experiment {

namespace {

using Key = std::tuple<std::string, std::size_t, std::string, std::size_t>;

std::string delta_label(const CompareTable& t, std::pair<std::size_t, std::size_t> d) {
  return t.columns[d.second] + "-" + t.columns[d.first];
}

std::optional<double> delta_value(const CompareTable::Row& r, std::pair<std::size_t, std::size_t> d) {
  if (!r.values[d.first] || !r.values[d.second]) return std::nullopt;
  return *r.values[d.second] - *r.values[d.first];
}

}  // namespace

CompareTable compare(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw CompareError("no results files given");

  std::vector<std::vector<ResultRow>> files;
  std::size_t total = 0;
  for (const auto& p : paths) {
    files.push_back(read_results(p));
    total += files.back().size();
  }
  if (total == 0) throw CompareError("no rows");

  // A strategy seen in more than one file gets one column per file.
  std::map<std::string, std::set<std::size_t>> owners;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto& r : files[f]) owners[r.strategy].insert(f);
  }

  CompareTable t;
  std::map<std::pair<std::size_t, std::string>, std::size_t> column_of;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto& r : files[f]) {
      const auto key = std::make_pair(f, r.strategy);
      if (column_of.count(key)) continue;
      column_of[key] = t.columns.size();
      t.columns.push_back(owners[r.strategy].size() > 1 ? fmt::format("{}#{}", r.strategy, f + 1) : r.strategy);
    }
  }

  // Rows repeated for the same cell (e.g. several master seeds appended to
  // one file) are averaged.
  std::map<Key, std::vector<std::pair<double, std::size_t>>> cells;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto& r : files[f]) {
      auto& v = cells[{r.dataset, r.classes_per_problem, r.split, r.budget}];
      v.resize(t.columns.size(), {0.0, 0});
      auto& c = v[column_of.at({f, r.strategy})];
      c.first += r.accuracy_mean;
      c.second += 1;
    }
  }
  for (auto& [key, v] : cells) {
    CompareTable::Row row;
    std::tie(row.dataset, row.classes_per_problem, row.split, row.budget) = key;
    v.resize(t.columns.size(), {0.0, 0});
    for (const auto& [sum, n] : v) {
      row.values.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
    }
    t.rows.push_back(std::move(row));
  }
  for (std::size_t a = 0; a < t.columns.size(); ++a) {
    for (std::size_t b = a + 1; b < t.columns.size(); ++b) t.deltas.emplace_back(a, b);
  }
  return t;
}

std::string format_table(const CompareTable& t) {
  std::string out = fmt::format("{:<12} {:>3} {:<10} {:>6}", "dataset", "P", "split", "budget");
  for (const auto& c : t.columns) out += fmt::format(" {:>12}", c);
  for (const auto& d : t.deltas) out += fmt::format(" {:>20}", delta_label(t, d));
  out += '\n';
  auto cell = [](std::optional<double> v, int width, bool sign) {
    if (!v) return fmt::format(" {:>{}}", "-", width);
    return sign ? fmt::format(" {:>+{}.4f}", *v, width) : fmt::format(" {:>{}.4f}", *v, width);
  };
  for (const auto& r : t.rows) {
    out += fmt::format("{:<12} {:>3} {:<10} {:>6}", r.dataset, r.classes_per_problem, r.split, r.budget);
    for (const auto& v : r.values) out += cell(v, 12, false);
    for (const auto& d : t.deltas) out += cell(delta_value(r, d), 20, true);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const CompareTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      values[t.columns[c]] = r.values[c] ? nlohmann::json(*r.values[c]) : nlohmann::json(nullptr);
    }
    nlohmann::json deltas = nlohmann::json::object();
    for (const auto& d : t.deltas) {
      const auto v = delta_value(r, d);
      deltas[delta_label(t, d)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    rows.push_back({{"dataset", r.dataset},
                    {"classes_per_problem", r.classes_per_problem},
                    {"split", r.split},
                    {"budget", r.budget},
                    {"accuracy", values},
                    {"deltas", deltas}});
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

}  // namespace metaal::experiment
