#include "skiptag/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace skiptag {

using namespace ad;

PosVocab::PosVocab(std::vector<std::string> tags) : tags_(std::move(tags)) {
  if (tags_.empty() || tags_[0] != kUnknown)
    throw std::invalid_argument("POS vocabulary must start with " + std::string(kUnknown));
}

PosVocab PosVocab::build(const std::vector<Instance>& instances) {
  std::set<std::string> seen;
  for (const auto& inst : instances) seen.insert(inst.pos.begin(), inst.pos.end());
  std::vector<std::string> tags{kUnknown};
  tags.insert(tags.end(), seen.begin(), seen.end());
  return PosVocab(std::move(tags));
}

int PosVocab::index(const std::string& tag) const {
  auto it = std::find(tags_.begin() + 1, tags_.end(), tag);
  return it == tags_.end() ? 0 : static_cast<int>(it - tags_.begin());
}

Model::Model(ModelConfig config, TagSet tags, PosVocab pos_vocab,
             std::shared_ptr<const WordEmbeddings> words, std::uint64_t seed)
    : config_(config), tags_(std::move(tags)), pos_vocab_(std::move(pos_vocab)),
      words_(std::move(words)) {
  auto& f = config_.features;
  if (!words_) throw std::invalid_argument("Model: word embeddings are required");
  f.word_dim = words_->dim();
  f.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  auto random_table = [&](int rows, int cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return Value::parameter(std::move(m));
  };
  tables_.words = &words_->table();
  tables_.pos = random_table(pos_vocab_.size(), f.pos_dim);
  tables_.pct_indicator = random_table(2, f.pct_indicator_dim);
  encoder_.forward = LstmParams::init(f.input_dim(), f.hidden_dim, rng);
  encoder_.backward = LstmParams::init(f.input_dim(), f.hidden_dim, rng);
  encoder_.gate_forward = SkipGateParams::init(f.hidden_dim, rng, config_.gate_bias_init);
  encoder_.gate_backward = SkipGateParams::init(f.hidden_dim, rng, config_.gate_bias_init);
  crf_ = CrfParams::init(2 * f.hidden_dim, tags_.size(), rng);
  if (config_.constrained_decoding) mask_ = TransitionMask::bioul(tags_);
}

EncodedInstance Model::encode(const Instance& inst) const {
  EncodedInstance e;
  const auto n = static_cast<std::size_t>(inst.size());
  e.word_ids.reserve(n);
  e.pos_ids.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    e.word_ids.push_back(words_->index(inst.tokens[t]));
    e.pos_ids.push_back(pos_vocab_.index(inst.pos[t]));
  }
  e.pct_indicator = inst.pct_indicator;
  e.mask = inst.mask;
  if (!inst.gold.empty()) e.gold = tags_.ids(inst.gold);
  return e;
}

ForwardResult Model::forward(const EncodedInstance& inst, GateMode gate_mode,
                             const GateTrace* pattern) const {
  const Value features = embed(inst, tables_, config_.features);
  ForwardResult r;
  r.encoder = bi_encode(features, encoder_, config_.mode, gate_mode, pattern);
  std::vector<int> positions;
  if (r.encoder.trace) {
    positions = r.encoder.trace->remained_positions();
  } else {
    positions.resize(static_cast<std::size_t>(inst.size()));
    std::iota(positions.begin(), positions.end(), 0);
  }
  // Every token skipped by at least one direction: nothing reaches the CRF.
  if (positions.empty()) return r;
  const Value remained = static_cast<int>(positions.size()) == inst.size()
                             ? r.encoder.states
                             : gather_rows(r.encoder.states, positions);
  r.compressed.emissions = project_emissions(remained, crf_);
  if (!inst.gold.empty())
    for (int p : positions) r.compressed.gold.push_back(inst.gold[static_cast<std::size_t>(p)]);
  r.compressed.origin_positions = std::move(positions);
  return r;
}

Prediction Model::predict(const EncodedInstance& inst, GateMode gate_mode) const {
  const ad::NoGradGuard no_grad;
  const ForwardResult fr = forward(inst, gate_mode);
  Prediction p;
  p.trace = fr.encoder.trace;
  if (fr.compressed.origin_positions.empty()) {
    p.tags.assign(static_cast<std::size_t>(inst.size()), "O");
    return p;
  }
  const ViterbiResult best = viterbi(fr.compressed, crf_, mask_ ? &*mask_ : nullptr);
  p.tags = gap_fill(tags_.names_of(best.tags), fr.compressed.origin_positions, inst.size());
  p.spans = decode(p.tags, DecodeMode::lenient);
  return p;
}

Prediction Model::predict(const Instance& inst, GateMode gate_mode) const {
  Instance unlabeled = inst;
  unlabeled.gold.clear();
  return predict(encode(unlabeled), gate_mode);
}

std::vector<std::pair<std::string, Value>> Model::named_parameters() const {
  return {
      {"pos_embeddings", tables_.pos},
      {"pct_indicator_embeddings", tables_.pct_indicator},
      {"lstm_fwd.w_input", encoder_.forward.w_input},
      {"lstm_fwd.w_hidden", encoder_.forward.w_hidden},
      {"lstm_fwd.bias", encoder_.forward.bias},
      {"lstm_bwd.w_input", encoder_.backward.w_input},
      {"lstm_bwd.w_hidden", encoder_.backward.w_hidden},
      {"lstm_bwd.bias", encoder_.backward.bias},
      {"gate_fwd.weight", encoder_.gate_forward.weight},
      {"gate_fwd.bias", encoder_.gate_forward.bias},
      {"gate_bwd.weight", encoder_.gate_backward.weight},
      {"gate_bwd.bias", encoder_.gate_backward.bias},
      {"crf.proj_weight", crf_.proj_weight},
      {"crf.proj_bias", crf_.proj_bias},
      {"crf.transitions", crf_.transitions},
      {"crf.start", crf_.start},
      {"crf.stop", crf_.stop},
  };
}

std::vector<Value> Model::parameters() const {
  std::vector<Value> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

void Model::zero_grad() {
  for (auto& v : parameters()) v.zero_grad();
}

ParameterSnapshot Model::snapshot() const {
  ParameterSnapshot s;
  for (const auto& v : parameters()) s.push_back(v.data());
  return s;
}

void Model::restore(const ParameterSnapshot& snap) {
  auto params = parameters();
  if (snap.size() != params.size()) throw std::invalid_argument("restore: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snap[i].rows() != params[i].rows() || snap[i].cols() != params[i].cols())
      throw std::invalid_argument("restore: shape mismatch for parameter " + std::to_string(i));
    params[i].mutable_data() = snap[i];
  }
}

}  // namespace skiptag
