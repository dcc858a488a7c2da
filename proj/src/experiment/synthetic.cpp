#include <fstream>
#include <random>

#include <fmt/format.h>

#include "metaal/experiment.hpp"
#include "metaal/random.hpp"

namespace metaal::experiment {

void gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& path) {
  if (spec.classes == 0 || spec.per_class == 0 || spec.features == 0) {
    throw std::invalid_argument("gen-synthetic: classes, per-class and features must be positive");
  }
  if (!(spec.spread >= 0.0)) throw std::invalid_argument("gen-synthetic: spread must be >= 0");

  Rng rng(spec.seed);
  std::uniform_real_distribution<double> centre(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> means(spec.classes * spec.features);
  for (double& m : means) m = centre(rng);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string line;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      line.clear();
      for (std::size_t k = 0; k < spec.features; ++k) {
        line += fmt::format("{:.9g},", means[c * spec.features + k] + spec.spread * noise(rng));
      }
      line += fmt::format("c{}\n", c);
      out << line;
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace metaal::experiment
