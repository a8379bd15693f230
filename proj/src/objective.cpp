#include "skiptag/objective.hpp"

#include <stdexcept>

namespace skiptag {

using namespace ad;

Value skip_loss(std::span<const Value> gates_fwd, std::span<const Value> gates_bwd,
                const std::vector<int>& gold) {
  if (gates_fwd.size() != gold.size() || gates_bwd.size() != gold.size())
    throw std::invalid_argument("skip_loss: gate trace and gold tags differ in length");
  std::vector<Value> terms;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    if (gold[t] == 0) continue;
    terms.push_back(gates_fwd[t]);
    terms.push_back(gates_bwd[t]);
  }
  if (terms.empty()) return Value::scalar(0.0);
  // Σ (1 - u) = count - Σ u
  return shift(scale(sum(concat_cols(terms)), -1.0), static_cast<double>(terms.size()));
}

int skip_loss_count(const GateTrace& trace, const TagSequence& gold) {
  if (trace.size() != static_cast<int>(gold.size()))
    throw std::invalid_argument("skip_loss: gate trace and gold tags differ in length");
  int count = 0;
  for (int t = 0; t < trace.size(); ++t) {
    if (gold[static_cast<std::size_t>(t)] == "O") continue;
    count += (1 - trace.u_fwd[static_cast<std::size_t>(t)]) +
             (1 - trace.u_bwd[static_cast<std::size_t>(t)]);
  }
  return count;
}

JointLoss joint_loss(const Model& model, const EncodedInstance& inst, double lambda,
                     GateMode gate_mode, const GateTrace* pattern) {
  if (lambda < 0.0) throw std::invalid_argument("joint_loss: lambda must be >= 0");
  if (inst.gold.empty()) throw std::invalid_argument("joint_loss: instance has no gold tags");
  ForwardResult fr = model.forward(inst, gate_mode, pattern);
  JointLoss out;
  out.crf = fr.compressed.origin_positions.empty() ? Value::scalar(0.0)
                                                   : nll(fr.compressed, model.crf());
  out.remained = static_cast<int>(fr.compressed.origin_positions.size());
  if (fr.encoder.trace) {
    out.skip = skip_loss(fr.encoder.gates_fwd, fr.encoder.gates_bwd, inst.gold);
    out.total = lambda == 0.0 ? out.crf : out.crf + scale(out.skip, lambda);
    out.trace = std::move(fr.encoder.trace);
  } else {
    out.skip = Value::scalar(0.0);
    out.total = out.crf;
  }
  return out;
}

}  // namespace skiptag
