#pragma once

// Feature assembly, LSTM and Skip-LSTM cells, and the bidirectional encoder.

#include "skiptag/autodiff.hpp"

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace skiptag {

using ad::Matrix;
using ad::Value;

struct FeatureConfig {
  int word_dim = 50;
  int pos_dim = 25;
  int pct_indicator_dim = 5;
  int mask_dim = 1;
  int hidden_dim = 50;

  int input_dim() const { return word_dim + pos_dim + pct_indicator_dim + mask_dim; }
  void validate() const;
};

// An instance mapped to table indices.
struct EncodedInstance {
  std::vector<int> word_ids;
  std::vector<int> pos_ids;
  std::vector<int> pct_indicator;
  std::vector<int> mask;
  std::vector<int> gold;  // tag ids; empty when unlabeled

  int size() const { return static_cast<int>(word_ids.size()); }
};

struct EmbeddingTables {
  const Matrix* words = nullptr;  // frozen, row 0 = OOV
  Value pos;                      // learned, rows = POS vocabulary
  Value pct_indicator;            // learned, 2 rows
};

// T x input_dim rows of [word ; pos ; pct indicator ; mask].
Value embed(const EncodedInstance& inst, const EmbeddingTables& tables, const FeatureConfig& cfg);

struct LstmParams {
  Value w_input;   // input_dim x 4H, gate blocks ordered i, f, g, o
  Value w_hidden;  // H x 4H
  Value bias;      // 1 x 4H

  int hidden_dim() const { return static_cast<int>(w_hidden.rows()); }
  static LstmParams init(int input_dim, int hidden_dim, std::mt19937_64& rng);
};

struct LstmState {
  Value h;
  Value c;

  static LstmState zeros(int hidden_dim);
};

struct SkipGateParams {
  Value weight;  // H x 1, applied to h_t
  Value bias;    // 1 x 1

  static SkipGateParams init(int hidden_dim, std::mt19937_64& rng, double bias = 1.0);
};

// Transition model S(s_{t-1}, x_t) of a standard LSTM without peepholes.
LstmState lstm_step(const LstmState& state, const Value& x_t, const LstmParams& params);
// Same, with x_t·W_input + bias already computed.
LstmState lstm_step_projected(const LstmState& state, const Value& projected_t,
                              const LstmParams& params);

enum class GateMode {
  learned,
  // u_t is the constant 1: no skipping and no gradient through the gate.
  forced_update,
  // u_t = ũ_t + (recorded u_t - recorded ũ_t): the recorded binary value at
  // the recorded parameters, moving one-for-one with ũ_t elsewhere. This is
  // the straight-through surrogate as an ordinary differentiable function.
  pinned,
};

struct SkipStep {
  LstmState state;
  Value u;             // binary gate used at this step
  Value u_tilde_next;  // accumulated update probability for the next step
};

// u_t = binarize(ũ_t); s_t = u_t·S(s_{t-1}, x_t) + (1 - u_t)·s_{t-1};
// Δũ_t = σ(W_p h_t + b_p); ũ_{t+1} = u_t·Δũ_t + (1 - u_t)·min(ũ_t + Δũ_t, 1).
struct PinnedGate {
  int u = 1;
  double u_tilde = 1.0;
};

// `pin` is required in pinned mode and ignored otherwise.
SkipStep skip_lstm_step(const LstmState& state, const Value& u_tilde, const Value& x_t,
                        const LstmParams& params, const SkipGateParams& gate,
                        GateMode mode = GateMode::learned, const PinnedGate* pin = nullptr);
SkipStep skip_lstm_step_projected(const LstmState& state, const Value& u_tilde,
                                  const Value& projected_t, const LstmParams& params,
                                  const SkipGateParams& gate, GateMode mode = GateMode::learned,
                                  const PinnedGate* pin = nullptr);

struct GateTrace {
  std::vector<int> u_fwd;
  std::vector<int> u_bwd;
  std::vector<double> u_tilde_fwd;
  std::vector<double> u_tilde_bwd;

  int size() const { return static_cast<int>(u_fwd.size()); }
  // Updated by both directions.
  bool remained(int t) const {
    return u_fwd[static_cast<std::size_t>(t)] == 1 && u_bwd[static_cast<std::size_t>(t)] == 1;
  }
  std::vector<int> remained_positions() const;
};

enum class EncoderMode { plain, skip };

const char* mode_name(EncoderMode mode);
EncoderMode parse_mode(const std::string& name);

struct EncoderParams {
  LstmParams forward;
  LstmParams backward;
  SkipGateParams gate_forward;
  SkipGateParams gate_backward;
};

struct EncoderOutput {
  Value states;  // T x 2H, rows [h_fwd_t ; h_bwd_t]
  std::optional<GateTrace> trace;
  // Gate values per position (skip mode), for the skip loss.
  std::vector<Value> gates_fwd;
  std::vector<Value> gates_bwd;
};

// Left-to-right and right-to-left passes over the features. The first
// reading step of each direction starts from ũ = 1. Pinned mode takes the
// gate values from `pattern`.
EncoderOutput bi_encode(const Value& features, const EncoderParams& params, EncoderMode mode,
                        GateMode gate_mode = GateMode::learned,
                        const GateTrace* pattern = nullptr);

}  // namespace skiptag
