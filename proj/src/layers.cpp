#include "skiptag/layers.hpp"

#include <cmath>
#include <string>

namespace skiptag {

using namespace ad;

namespace {

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> d(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Value one_minus(const Value& x) { return shift(scale(x, -1.0), 1.0); }

}  // namespace

void FeatureConfig::validate() const {
  if (word_dim <= 0 || pos_dim <= 0 || pct_indicator_dim <= 0 || mask_dim <= 0 || hidden_dim <= 0)
    throw std::invalid_argument("feature dimensions must all be positive");
  if (mask_dim != 1) throw std::invalid_argument("the current-percentage mask is a single scalar");
}

Value embed(const EncodedInstance& inst, const EmbeddingTables& tables, const FeatureConfig& cfg) {
  const int n = inst.size();
  if (n == 0) throw std::invalid_argument("embed: empty instance");
  if (static_cast<int>(inst.pos_ids.size()) != n || static_cast<int>(inst.pct_indicator.size()) != n ||
      static_cast<int>(inst.mask.size()) != n)
    throw std::invalid_argument("embed: feature columns differ in length");
  if (tables.words == nullptr || tables.words->cols() != cfg.word_dim)
    throw std::invalid_argument("embed: word table does not match word_dim");

  Matrix words(n, cfg.word_dim);
  Matrix mask(n, 1);
  for (int t = 0; t < n; ++t) {
    const int w = inst.word_ids[static_cast<std::size_t>(t)];
    if (w < 0 || w >= tables.words->rows())
      throw std::out_of_range("embed: word id " + std::to_string(w) + " out of range");
    words.row(t) = tables.words->row(w);
    const int p = inst.pos_ids[static_cast<std::size_t>(t)];
    if (p < 0 || p >= tables.pos.rows())
      throw std::out_of_range("embed: unknown POS tag id " + std::to_string(p));
    const int b = inst.pct_indicator[static_cast<std::size_t>(t)];
    if (b != 0 && b != 1) throw std::out_of_range("embed: percentage indicator must be 0 or 1");
    mask(t, 0) = inst.mask[static_cast<std::size_t>(t)];
  }
  const Value parts[] = {Value::constant(std::move(words)), gather_rows(tables.pos, inst.pos_ids),
                         gather_rows(tables.pct_indicator, inst.pct_indicator),
                         Value::constant(std::move(mask))};
  return concat_cols(parts);
}

LstmParams LstmParams::init(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  LstmParams p;
  p.w_input = Value::parameter(glorot(input_dim, 4 * hidden_dim, rng));
  p.w_hidden = Value::parameter(glorot(hidden_dim, 4 * hidden_dim, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden_dim);
  b.middleCols(hidden_dim, hidden_dim).setOnes();  // forget gate
  p.bias = Value::parameter(std::move(b));
  return p;
}

LstmState LstmState::zeros(int hidden_dim) {
  return {Value::constant(Matrix::Zero(1, hidden_dim)), Value::constant(Matrix::Zero(1, hidden_dim))};
}

SkipGateParams SkipGateParams::init(int hidden_dim, std::mt19937_64& rng, double bias) {
  return {Value::parameter(glorot(hidden_dim, 1, rng)), Value::scalar(bias, true)};
}

LstmState lstm_step_projected(const LstmState& state, const Value& projected_t,
                              const LstmParams& params) {
  const int h = params.hidden_dim();
  if (projected_t.rows() != 1 || projected_t.cols() != 4 * h)
    throw ShapeError("lstm_step: projected input must be 1x" + std::to_string(4 * h));
  const Value gates = projected_t + matmul(state.h, params.w_hidden);
  const Value i = sigmoid(slice_cols(gates, 0, h));
  const Value f = sigmoid(slice_cols(gates, h, h));
  const Value g = ad::tanh(slice_cols(gates, 2 * h, h));
  const Value o = sigmoid(slice_cols(gates, 3 * h, h));
  const Value c = f * state.c + i * g;
  return {o * ad::tanh(c), c};
}

LstmState lstm_step(const LstmState& state, const Value& x_t, const LstmParams& params) {
  return lstm_step_projected(state, matmul(x_t, params.w_input) + params.bias, params);
}

SkipStep skip_lstm_step_projected(const LstmState& state, const Value& u_tilde,
                                  const Value& projected_t, const LstmParams& params,
                                  const SkipGateParams& gate, GateMode mode, const PinnedGate* pin) {
  const double ut = u_tilde.item();
  if (mode != GateMode::pinned && !(ut >= 0.0 && ut <= 1.0))
    throw std::domain_error("skip_lstm_step: update probability " + std::to_string(ut) +
                            " outside [0,1]");
  Value u;
  switch (mode) {
    case GateMode::learned: u = binarize(u_tilde); break;
    case GateMode::forced_update: u = Value::scalar(1.0); break;
    case GateMode::pinned:
      if (pin == nullptr || (pin->u != 0 && pin->u != 1))
        throw std::invalid_argument("skip_lstm_step: pinned gate must be 0 or 1");
      u = shift(u_tilde, static_cast<double>(pin->u) - pin->u_tilde);
      if (ut == pin->u_tilde) u.mutable_data()(0, 0) = pin->u;  // exact, free of rounding
      break;
  }
  const Value keep = one_minus(u);
  const LstmState updated = lstm_step_projected(state, projected_t, params);
  LstmState next{u * updated.h + keep * state.h, u * updated.c + keep * state.c};
  const Value delta = sigmoid(matmul(next.h, gate.weight) + gate.bias);
  Value u_tilde_next = u * delta + keep * min_with_const(u_tilde + delta, 1.0);
  return {std::move(next), u, std::move(u_tilde_next)};
}

SkipStep skip_lstm_step(const LstmState& state, const Value& u_tilde, const Value& x_t,
                        const LstmParams& params, const SkipGateParams& gate, GateMode mode,
                        const PinnedGate* pin) {
  return skip_lstm_step_projected(state, u_tilde, matmul(x_t, params.w_input) + params.bias,
                                  params, gate, mode, pin);
}

std::vector<int> GateTrace::remained_positions() const {
  std::vector<int> out;
  for (int t = 0; t < size(); ++t)
    if (remained(t)) out.push_back(t);
  return out;
}

const char* mode_name(EncoderMode mode) { return mode == EncoderMode::plain ? "plain" : "skip"; }

EncoderMode parse_mode(const std::string& name) {
  if (name == "plain") return EncoderMode::plain;
  if (name == "skip") return EncoderMode::skip;
  throw std::invalid_argument("unknown mode '" + name + "' (expected plain or skip)");
}

namespace {

struct DirectionResult {
  std::vector<Value> states;
  std::vector<Value> gates;
  std::vector<int> u;
  std::vector<double> u_tilde;
};

DirectionResult run_direction(const Value& projected, const LstmParams& lstm,
                              const SkipGateParams* gate, GateMode gate_mode, bool reverse,
                              const std::vector<int>* pattern,
                              const std::vector<double>* pattern_u_tilde) {
  const int n = static_cast<int>(projected.rows());
  DirectionResult r;
  r.states.resize(static_cast<std::size_t>(n));
  if (gate) {
    r.gates.resize(static_cast<std::size_t>(n));
    r.u.resize(static_cast<std::size_t>(n));
    r.u_tilde.resize(static_cast<std::size_t>(n));
  }
  LstmState state = LstmState::zeros(lstm.hidden_dim());
  Value u_tilde = Value::scalar(1.0);
  for (int k = 0; k < n; ++k) {
    const int t = reverse ? n - 1 - k : k;
    const auto at = static_cast<std::size_t>(t);
    const Value x = row_of(projected, t);
    if (gate) {
      r.u_tilde[at] = u_tilde.item();
      PinnedGate pin;
      if (pattern) pin = {(*pattern)[at], (*pattern_u_tilde)[at]};
      SkipStep step = skip_lstm_step_projected(state, u_tilde, x, lstm, *gate, gate_mode,
                                               pattern ? &pin : nullptr);
      r.u[at] = pattern ? pin.u : static_cast<int>(step.u.item());
      r.gates[at] = step.u;
      state = std::move(step.state);
      u_tilde = std::move(step.u_tilde_next);
    } else {
      state = lstm_step_projected(state, x, lstm);
    }
    r.states[at] = state.h;
  }
  return r;
}

}  // namespace

EncoderOutput bi_encode(const Value& features, const EncoderParams& params, EncoderMode mode,
                        GateMode gate_mode, const GateTrace* pattern) {
  if (features.rows() == 0) throw std::invalid_argument("bi_encode: empty sequence");
  const bool skip = mode == EncoderMode::skip;
  if (skip && gate_mode == GateMode::pinned &&
      (pattern == nullptr || pattern->size() != features.rows() ||
       pattern->u_bwd.size() != pattern->u_fwd.size() ||
       pattern->u_tilde_fwd.size() != pattern->u_fwd.size() ||
       pattern->u_tilde_bwd.size() != pattern->u_fwd.size()))
    throw std::invalid_argument("bi_encode: pinned mode needs a gate pattern of the sequence length");
  const bool pin = skip && gate_mode == GateMode::pinned;
  const Value proj_f = matmul(features, params.forward.w_input) + params.forward.bias;
  const Value proj_b = matmul(features, params.backward.w_input) + params.backward.bias;
  DirectionResult fwd = run_direction(proj_f, params.forward, skip ? &params.gate_forward : nullptr,
                                      gate_mode, false, pin ? &pattern->u_fwd : nullptr,
                                      pin ? &pattern->u_tilde_fwd : nullptr);
  DirectionResult bwd = run_direction(proj_b, params.backward,
                                      skip ? &params.gate_backward : nullptr, gate_mode, true,
                                      pin ? &pattern->u_bwd : nullptr,
                                      pin ? &pattern->u_tilde_bwd : nullptr);
  EncoderOutput out;
  const Value halves[] = {concat_rows(fwd.states), concat_rows(bwd.states)};
  out.states = concat_cols(halves);
  if (skip) {
    out.trace = GateTrace{std::move(fwd.u), std::move(bwd.u), std::move(fwd.u_tilde),
                          std::move(bwd.u_tilde)};
    out.gates_fwd = std::move(fwd.gates);
    out.gates_bwd = std::move(bwd.gates);
  }
  return out;
}

}  // namespace skiptag
