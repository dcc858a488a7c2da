#include <stdexcept>

#include "metaal/trainer.hpp"

namespace metaal::trainer {

namespace {

std::string activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::linear:
      return "linear";
    case nn::Activation::tanh:
      return "tanh";
    case nn::Activation::sigmoid:
      return "sigmoid";
    case nn::Activation::relu:
      return "relu";
  }
  return "linear";
}

nn::Activation parse_activation(const std::string& s) {
  if (s == "linear") return nn::Activation::linear;
  if (s == "tanh") return nn::Activation::tanh;
  if (s == "sigmoid") return nn::Activation::sigmoid;
  if (s == "relu") return nn::Activation::relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

}  // namespace

nlohmann::json ModelSpec::to_json() const {
  return {{"input_dim", embedder.input_dim},
          {"embed_widths", embedder.widths},
          {"hidden_activation", activation_name(embedder.hidden_activation)},
          {"output_activation", activation_name(embedder.output_activation)},
          {"rnn_hidden", rnn_hidden}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.embedder.input_dim = j.at("input_dim").get<std::size_t>();
  s.embedder.widths = j.at("embed_widths").get<std::vector<std::size_t>>();
  s.embedder.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
  s.embedder.output_activation = parse_activation(j.at("output_activation").get<std::string>());
  s.rnn_hidden = j.at("rnn_hidden").get<std::size_t>();
  return s;
}

Model Model::create(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.embedder.input_dim == 0) throw std::invalid_argument("model input dimension must be positive");
  if (spec.rnn_hidden == 0) throw std::invalid_argument("RNN hidden dimension must be positive");
  Model m;
  m.spec_ = spec;
  spec.embedder.register_in(m.params_);
  m.policy_spec().register_in(m.params_);
  m.params_.init_uniform(seed);
  return m;
}

void Model::zero_policy_head() {
  const auto head = policy_spec().head();
  for (auto& v : params_.at(head.weight_name()).values) v = 0.0;
  for (auto& v : params_.at(head.bias_name()).values) v = 0.0;
}

selector::PolicySpec Model::policy_spec() const { return {latent_dim(), spec_.rnn_hidden, "policy"}; }

nn::Var Model::embed(nn::Graph& g, std::span<const double> x) {
  nn::Var in = g.constant(std::vector<double>(x.begin(), x.end()));
  if (spec_.embedder.widths.empty()) return in;
  return nn::mlp_embed(g, params_, spec_.embedder, in);
}

std::vector<std::vector<double>> Model::embed_rows(const data::BaseDataset& ds, std::span<const std::size_t> rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  nn::Graph g;
  for (std::size_t r : rows) {
    auto v = embed(g, ds.row(r)).value();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

}  // namespace metaal::trainer
