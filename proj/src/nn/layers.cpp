#include "metaal/nn/layers.hpp"

namespace metaal::nn {

void LinearParams::register_in(ParamStore& store) const {
  store.add(weight_name(), Shape{out, in});
  store.add(bias_name(), Shape{out}, in);
}

Var linear_forward(Graph& g, ParamStore& store, const LinearParams& p, Var x) {
  if (x.size() != p.in) {
    throw DimensionError(p.prefix + ": input length " + std::to_string(x.size()) + " != " + std::to_string(p.in));
  }
  return linear_forward(x, g.parameter(store, p.weight_name()), g.parameter(store, p.bias_name()));
}

void LstmCellParams::register_in(ParamStore& store) const {
  const std::size_t gates = 4 * hidden_dim;
  store.add(w_x_name(), Shape{gates, input_dim});
  store.add(w_h_name(), Shape{gates, hidden_dim});
  store.add(bias_name(), Shape{gates}, hidden_dim);
}

LstmCell LstmCell::bind(Graph& g, ParamStore& store, const LstmCellParams& p) {
  LstmCell cell{g.parameter(store, p.w_x_name()), g.parameter(store, p.w_h_name()), g.parameter(store, p.bias_name()),
                p.input_dim, p.hidden_dim};
  const std::size_t gates = 4 * p.hidden_dim;
  if (cell.w_x.shape() != Shape{gates, p.input_dim} || cell.w_h.shape() != Shape{gates, p.hidden_dim} ||
      cell.b.shape() != Shape{gates}) {
    throw DimensionError(p.prefix + ": stored LSTM weights do not match declared dimensions");
  }
  return cell;
}

LstmState lstm_cell_step(const LstmCell& cell, Var x, Var h_prev, Var c_prev) {
  const std::size_t H = cell.hidden_dim;
  if (x.size() != cell.input_dim) {
    throw DimensionError("lstm_cell_step: input length " + std::to_string(x.size()) + " != " +
                         std::to_string(cell.input_dim));
  }
  if (h_prev.size() != H || c_prev.size() != H) throw DimensionError("lstm_cell_step: state length mismatch");

  Var z = add(add(matvec(cell.w_x, x), matvec(cell.w_h, h_prev)), cell.b);
  Var i = sigmoid(slice(z, 0, H));
  Var f = sigmoid(slice(z, H, H));
  Var o = sigmoid(slice(z, 2 * H, H));
  Var cand = tanh(slice(z, 3 * H, H));
  Var c = add(mul(f, c_prev), mul(i, cand));
  Var h = mul(o, tanh(c));
  return {h, c};
}

std::vector<Var> bidirectional_scan(std::span<const Var> seq, const LstmCell& fwd, const LstmCell& bwd) {
  if (seq.empty()) throw std::invalid_argument("bidirectional_scan: empty sequence");
  const std::size_t dim = seq[0].size();
  for (const Var& x : seq) {
    if (x.size() != dim) throw DimensionError("bidirectional_scan: non-uniform element dimension");
  }
  Graph& g = *seq[0].graph;
  const std::size_t n = seq.size();

  std::vector<Var> forward(n), backward(n);
  LstmState s{g.constant(std::vector<double>(fwd.hidden_dim, 0.0)), g.constant(std::vector<double>(fwd.hidden_dim, 0.0))};
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_cell_step(fwd, seq[t], s.h, s.c);
    forward[t] = s.h;
  }
  s = {g.constant(std::vector<double>(bwd.hidden_dim, 0.0)), g.constant(std::vector<double>(bwd.hidden_dim, 0.0))};
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_cell_step(bwd, seq[t], s.h, s.c);
    backward[t] = s.h;
  }

  std::vector<Var> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(concat(forward[t], backward[t]));
  return out;
}

std::vector<LinearParams> EmbedderSpec::layers(const std::string& prefix) const {
  std::vector<LinearParams> out;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i), in, widths[i]});
    in = widths[i];
  }
  return out;
}

void EmbedderSpec::register_in(ParamStore& store, const std::string& prefix) const {
  for (const auto& l : layers(prefix)) l.register_in(store);
}

Var mlp_embed(Graph& g, ParamStore& store, const EmbedderSpec& spec, Var x, const std::string& prefix) {
  if (x.size() != spec.input_dim) {
    throw DimensionError("mlp_embed: input length " + std::to_string(x.size()) + " != " +
                         std::to_string(spec.input_dim));
  }
  const auto layers = spec.layers(prefix);
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = linear_forward(g, store, layers[i], h);
    h = activate(h, i + 1 == layers.size() ? spec.output_activation : spec.hidden_activation);
  }
  return h;
}

}  // namespace metaal::nn
