#pragma once

// Linear-chain CRF scored over the remained (compressed) token sequence.

#include "skiptag/autodiff.hpp"
#include "skiptag/tagging.hpp"

#include <random>
#include <vector>

namespace skiptag {

using ad::Matrix;
using ad::Value;

struct CrfParams {
  Value proj_weight;  // 2H x K
  Value proj_bias;    // 1 x K
  Value transitions;  // K x K, [from, to]
  Value start;        // 1 x K
  Value stop;         // 1 x K

  int num_tags() const { return static_cast<int>(transitions.rows()); }
  static CrfParams init(int input_dim, int num_tags, std::mt19937_64& rng);
};

struct CompressedSequence {
  Value emissions;                    // T' x K
  std::vector<int> gold;              // tag ids, empty when unlabeled
  std::vector<int> origin_positions;  // strictly increasing sentence positions
};

Value project_emissions(const Value& remained_states, const CrfParams& params);

// log of the sum over all K^T' paths of exp(score), by the forward algorithm.
Value log_partition(const CompressedSequence& seq, const CrfParams& params);
// start + emissions + transitions + stop along `tags`.
Value path_score(const CompressedSequence& seq, const CrfParams& params,
                 const std::vector<int>& tags);
// log_partition - gold path score. Throws std::invalid_argument without gold tags.
Value nll(const CompressedSequence& seq, const CrfParams& params);

// Transition validity for constrained decoding; allowed[from+1][to+1] where
// index 0 is the sequence boundary.
struct TransitionMask {
  std::vector<std::vector<bool>> allowed;
  static TransitionMask bioul(const TagSet& tags);
};

struct ViterbiResult {
  std::vector<int> tags;
  double score = 0.0;
};

// Highest scoring path; ties go to the lower tag id.
ViterbiResult viterbi(const CompressedSequence& seq, const CrfParams& params,
                      const TransitionMask* mask = nullptr);

}  // namespace skiptag
