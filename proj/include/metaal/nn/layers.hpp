#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metaal/nn/graph.hpp"
#include "metaal/nn/param_store.hpp"

namespace metaal::nn {

/// Weight [out, in] and bias [out] registered under `<prefix>.weight` / `<prefix>.bias`.
struct LinearParams {
  std::string prefix;
  std::size_t in = 0;
  std::size_t out = 0;

  void register_in(ParamStore& store) const;
  std::string weight_name() const { return prefix + ".weight"; }
  std::string bias_name() const { return prefix + ".bias"; }
};

Var linear_forward(Graph& g, ParamStore& store, const LinearParams& p, Var x);

/// LSTM cell with the four gates stacked in the order input, forget, output,
/// candidate: w_x is [4H, in], w_h is [4H, H], b is [4H].
struct LstmCellParams {
  std::string prefix;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  void register_in(ParamStore& store) const;
  std::string w_x_name() const { return prefix + ".w_x"; }
  std::string w_h_name() const { return prefix + ".w_h"; }
  std::string bias_name() const { return prefix + ".b"; }
};

/// Cell parameters bound to one graph.
struct LstmCell {
  Var w_x;
  Var w_h;
  Var b;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static LstmCell bind(Graph& g, ParamStore& store, const LstmCellParams& p);
};

struct LstmState {
  Var h;
  Var c;
};

/// i,f,o = sigmoid, g = tanh; c = f*c_prev + i*g; h = o*tanh(c).
LstmState lstm_cell_step(const LstmCell& cell, Var x, Var h_prev, Var c_prev);

/// Output i is concat(forward hidden at i, backward hidden at i). Both
/// directions start from zero state.
std::vector<Var> bidirectional_scan(std::span<const Var> seq, const LstmCell& fwd, const LstmCell& bwd);

/// Feed-forward embedder R^K -> R^L. An empty layer list is the identity map.
struct EmbedderSpec {
  std::size_t input_dim = 0;
  /// Widths of every layer after the input; the last one is L.
  std::vector<std::size_t> widths;
  Activation hidden_activation = Activation::tanh;
  Activation output_activation = Activation::linear;

  std::size_t output_dim() const { return widths.empty() ? input_dim : widths.back(); }
  std::vector<LinearParams> layers(const std::string& prefix = "embed") const;
  void register_in(ParamStore& store, const std::string& prefix = "embed") const;
};

Var mlp_embed(Graph& g, ParamStore& store, const EmbedderSpec& spec, Var x, const std::string& prefix = "embed");

}  // namespace metaal::nn
