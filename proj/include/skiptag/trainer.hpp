#pragma once

// Optimization loop, lambda sweep and the multi-seed protocol.

#include "skiptag/metrics.hpp"
#include "skiptag/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace skiptag {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int hidden_dim = 50;
  int pos_dim = 25;
  int pct_indicator_dim = 5;
  double lambda = 0.1;
  int batch_size = 16;
  int max_epochs = 100;
  int patience = 25;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  EncoderMode mode = EncoderMode::skip;
  Task task = Task::percentage;
  double gate_bias_init = 1.0;
  bool constrained_decoding = false;
  // Pins every update gate to 1; used to check skip/plain equivalence.
  bool force_update_gates = false;
  // Stop as soon as dev F1 reaches this value (1.0 for overfit checks); off when > 1.
  double target_dev_f1 = 2.0;

  void validate() const;
  GateMode gate_mode() const {
    return force_update_gates ? GateMode::forced_update : GateMode::learned;
  }
};

// `key = value` lines; '#' starts a comment. Unknown keys and bad values
// throw ConfigError carrying the key.
void apply_config_entry(TrainingConfig& cfg, const std::string& key, const std::string& value);
TrainingConfig parse_config(std::istream& in, TrainingConfig base = {});
TrainingConfig load_config(const std::filesystem::path& path, TrainingConfig base = {});
std::string config_text(const TrainingConfig& cfg);

// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Value> params, double lr, double beta1, double beta2, double epsilon);
  void step();
  long steps() const { return t_; }

 private:
  std::vector<Value> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Rescales gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(const std::vector<Value>& params, double max_norm);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_crf = 0.0;
  double mean_skip = 0.0;
  double train_skipped = 0.0;  // union-skipped tokens during the epoch
  double dev_f1 = 0.0;
  long dev_skipped = 0;
  long dev_entity_skipped = 0;
  long dev_tokens = 0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
};

// Model architecture implied by a training config; word_dim follows the
// embeddings given to the model.
ModelConfig model_config(const TrainingConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Best-dev checkpoint is restored before returning. An empty dev set falls
// back to the training set for model selection.
TrainResult train(const TrainingConfig& cfg, const std::vector<Instance>& train_set,
                  const std::vector<Instance>& dev_set,
                  std::shared_ptr<const WordEmbeddings> words,
                  const std::vector<std::string>& roles, const EpochCallback& on_epoch = {});

// Span F1 plus skip statistics (skip mode).
EvalReport evaluate(const Model& model, const std::vector<Instance>& data,
                    GateMode gate_mode = GateMode::learned);

std::string history_jsonl(const std::vector<EpochRecord>& history);

// ---- sweep ------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over runs
};

MeanStd mean_std(const std::vector<double>& xs);

struct SweepRow {
  std::string label;
  EncoderMode mode = EncoderMode::skip;
  double lambda = 0.0;
  std::vector<double> run_f1;
  MeanStd overall;
  std::map<std::string, MeanStd> per_role;
  MeanStd skipped;  // union-skipped test tokens per run
};

struct SweepReport {
  std::optional<SweepRow> baseline;
  std::vector<SweepRow> rows;
  int best = -1;    // row with the highest mean overall F1
  int median = -1;  // row holding the (lower) median of the mean overall F1s
};

// start, start + step, ... up to end inclusive (within 1e-9).
std::vector<double> lambda_grid(double start, double end, double step);

struct SweepData {
  const std::vector<Instance>* train = nullptr;
  const std::vector<Instance>* dev = nullptr;
  const std::vector<Instance>* test = nullptr;
  std::shared_ptr<const WordEmbeddings> words;
  std::vector<std::string> roles;
};

// Runs `runs` seeds (base.seed + r) per lambda; every row uses the same
// seeds. Runs are spread over `workers` threads; results do not depend on it.
SweepReport sweep(const TrainingConfig& base, const std::vector<double>& grid, int runs,
                  const SweepData& data, bool include_baseline, int workers = 1);

// Mean/std summary of independently trained runs, used by sweep and the
// benchmark harness.
SweepRow run_setting(const TrainingConfig& cfg, int runs, const SweepData& data,
                     int workers = 1);

std::string format_sweep(const SweepReport& report);
std::string sweep_json(const SweepReport& report);

// Worker count from SKIPTAG_WORKERS, default 1.
int workers_from_env();

}  // namespace skiptag
