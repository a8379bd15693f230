#pragma once

// Skip loss and the joint CRF + skip training objective.

#include "skiptag/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace skiptag {

// Sum over directions of (1 - u_{t,d}) at positions whose gold tag is an
// entity tag (any id other than O = 0). Gradient reaches ũ through the
// straight-through binarizer.
Value skip_loss(std::span<const Value> gates_fwd, std::span<const Value> gates_bwd,
                const std::vector<int>& gold);

// The same count evaluated on a recorded trace.
int skip_loss_count(const GateTrace& trace, const TagSequence& gold);

struct JointLoss {
  Value total;
  Value crf;
  Value skip;  // zero constant in plain mode
  std::optional<GateTrace> trace;
  int remained = 0;
};

// L_CRF over remained tokens + lambda · L_skip. In plain mode this is the
// CRF loss over the whole sentence.
JointLoss joint_loss(const Model& model, const EncodedInstance& inst, double lambda,
                     GateMode gate_mode = GateMode::learned, const GateTrace* pattern = nullptr);

}  // namespace skiptag
