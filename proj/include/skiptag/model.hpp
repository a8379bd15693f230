#pragma once

// The bidirectional (Skip-)LSTM + CRF tagger: parameters, instance
// encoding, forward pass and decoding.

#include "skiptag/corpus.hpp"
#include "skiptag/crf.hpp"
#include "skiptag/layers.hpp"
#include "skiptag/tagging.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skiptag {

struct ModelConfig {
  FeatureConfig features;
  EncoderMode mode = EncoderMode::skip;
  Task task = Task::percentage;
  double gate_bias_init = 1.0;
  bool constrained_decoding = false;
};

// POS vocabulary; index 0 is reserved for tags unseen at training time.
class PosVocab {
 public:
  static constexpr const char* kUnknown = "<unk>";

  PosVocab() : tags_{kUnknown} {}
  explicit PosVocab(std::vector<std::string> tags);  // tags[0] must be kUnknown
  static PosVocab build(const std::vector<Instance>& instances);

  int size() const { return static_cast<int>(tags_.size()); }
  int index(const std::string& tag) const;
  const std::vector<std::string>& tags() const { return tags_; }

 private:
  std::vector<std::string> tags_;
};

struct ForwardResult {
  EncoderOutput encoder;
  CompressedSequence compressed;  // emissions undefined when no token remained
};

struct Prediction {
  TagSequence tags;  // full sentence after gap filling
  std::vector<Span> spans;
  std::optional<GateTrace> trace;
};

using ParameterSnapshot = std::vector<Matrix>;

class Model {
 public:
  Model(ModelConfig config, TagSet tags, PosVocab pos_vocab,
        std::shared_ptr<const WordEmbeddings> words, std::uint64_t seed);

  // Parameters are graph handles; a copy would alias them.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const TagSet& tags() const { return tags_; }
  const PosVocab& pos_vocab() const { return pos_vocab_; }
  const WordEmbeddings& words() const { return *words_; }
  std::shared_ptr<const WordEmbeddings> shared_words() const { return words_; }

  // Gold tags are mapped when present; unknown roles throw TagError.
  EncodedInstance encode(const Instance& inst) const;

  // Builds the graph for one sequence: embedding, encoder, remained-token
  // compression and CRF emissions.
  ForwardResult forward(const EncodedInstance& inst, GateMode gate_mode = GateMode::learned,
                        const GateTrace* pattern = nullptr) const;

  Prediction predict(const Instance& inst, GateMode gate_mode = GateMode::learned) const;
  Prediction predict(const EncodedInstance& inst, GateMode gate_mode = GateMode::learned) const;

  // Learned parameters in a fixed order.
  std::vector<std::pair<std::string, Value>> named_parameters() const;
  std::vector<Value> parameters() const;
  void zero_grad();
  ParameterSnapshot snapshot() const;
  void restore(const ParameterSnapshot& snap);

  EmbeddingTables& tables() { return tables_; }
  const EmbeddingTables& tables() const { return tables_; }
  EncoderParams& encoder() { return encoder_; }
  const EncoderParams& encoder() const { return encoder_; }
  CrfParams& crf() { return crf_; }
  const CrfParams& crf() const { return crf_; }

 private:
  ModelConfig config_;
  TagSet tags_;
  PosVocab pos_vocab_;
  std::shared_ptr<const WordEmbeddings> words_;
  EmbeddingTables tables_;
  EncoderParams encoder_;
  CrfParams crf_;
  std::optional<TransitionMask> mask_;
};

}  // namespace skiptag
