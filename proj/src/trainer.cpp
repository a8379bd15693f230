#include "skiptag/trainer.hpp"

#include "skiptag/objective.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace skiptag {

using namespace ad;

// ---- config -----------------------------------------------------------------

void TrainingConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0", "lr");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0", "lambda");
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be > 0", "hidden_dim");
  if (pos_dim <= 0) throw ConfigError("pos_dim must be > 0", "pos_dim");
  if (pct_indicator_dim <= 0) throw ConfigError("pct_indicator_dim must be > 0", "pct_indicator_dim");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0", "batch_size");
  if (max_epochs <= 0) throw ConfigError("max_epochs must be > 0", "max_epochs");
  if (patience <= 0) throw ConfigError("patience must be > 0", "patience");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be > 0", "grad_clip_norm");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0,1)", "beta1");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0,1)", "beta2");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0", "epsilon");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError("bad number '" + v + "' for key " + key, key);
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw ConfigError("bad integer '" + v + "' for key " + key, key);
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean '" + v + "' for key " + key, key);
}

}  // namespace

void apply_config_entry(TrainingConfig& cfg, const std::string& key, const std::string& value) {
  const auto as_int = [&] { return static_cast<int>(to_long(key, value)); };
  try {
    if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "beta1") cfg.beta1 = to_double(key, value);
    else if (key == "beta2") cfg.beta2 = to_double(key, value);
    else if (key == "epsilon") cfg.epsilon = to_double(key, value);
    else if (key == "hidden_dim") cfg.hidden_dim = as_int();
    else if (key == "pos_dim") cfg.pos_dim = as_int();
    else if (key == "pct_indicator_dim") cfg.pct_indicator_dim = as_int();
    else if (key == "lambda") cfg.lambda = to_double(key, value);
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "max_epochs") cfg.max_epochs = as_int();
    else if (key == "patience") cfg.patience = as_int();
    else if (key == "grad_clip_norm") cfg.grad_clip_norm = to_double(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "mode") cfg.mode = parse_mode(value);
    else if (key == "task") cfg.task = parse_task(value);
    else if (key == "gate_bias_init") cfg.gate_bias_init = to_double(key, value);
    else if (key == "constrained_decoding") cfg.constrained_decoding = to_bool(key, value);
    else if (key == "force_update_gates") cfg.force_update_gates = to_bool(key, value);
    else if (key == "target_dev_f1") cfg.target_dev_f1 = to_double(key, value);
    else throw ConfigError("unknown config key '" + key + "'", key);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " for key " + key, key);
  }
}

TrainingConfig parse_config(std::istream& in, TrainingConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value", trim(line));
    apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

TrainingConfig load_config(const std::filesystem::path& path, TrainingConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file", path.string());
  return parse_config(in, base);
}

std::string config_text(const TrainingConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "lr = " << c.lr << "\nbeta1 = " << c.beta1 << "\nbeta2 = " << c.beta2
     << "\nepsilon = " << c.epsilon << "\nhidden_dim = " << c.hidden_dim
     << "\npos_dim = " << c.pos_dim << "\npct_indicator_dim = " << c.pct_indicator_dim
     << "\nlambda = " << c.lambda << "\nbatch_size = " << c.batch_size
     << "\nmax_epochs = " << c.max_epochs << "\npatience = " << c.patience
     << "\ngrad_clip_norm = " << c.grad_clip_norm << "\nseed = " << c.seed
     << "\nmode = " << mode_name(c.mode) << "\ntask = " << task_name(c.task)
     << "\ngate_bias_init = " << c.gate_bias_init
     << "\nconstrained_decoding = " << (c.constrained_decoding ? "true" : "false")
     << "\nforce_update_gates = " << (c.force_update_gates ? "true" : "false")
     << "\ntarget_dev_f1 = " << c.target_dev_f1 << '\n';
  return os.str();
}

// ---- optimizer ----------------------------------------------------------------

Adam::Adam(std::vector<Value> params, double lr, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix& g = params_[i].grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params_[i].mutable_data().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(const std::vector<Value>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto p : params) p.mutable_grad() *= s;
  }
  return norm;
}

// ---- training -----------------------------------------------------------------

EvalReport evaluate(const Model& model, const std::vector<Instance>& data, GateMode gate_mode) {
  std::vector<std::vector<Span>> gold, pred;
  std::vector<GateTrace> traces;
  std::vector<TagSequence> golds;
  std::vector<std::vector<std::string>> tokens;
  gold.reserve(data.size());
  pred.reserve(data.size());
  for (const auto& inst : data) {
    Prediction p = model.predict(inst, gate_mode);
    gold.push_back(decode(inst.gold, DecodeMode::lenient));
    pred.push_back(std::move(p.spans));
    if (p.trace) {
      traces.push_back(std::move(*p.trace));
      golds.push_back(inst.gold);
      tokens.push_back(inst.tokens);
    }
  }
  EvalReport report = span_f1(gold, pred);
  if (model.config().mode == EncoderMode::skip) report.skips = skip_stats(traces, golds, tokens);
  return report;
}

ModelConfig model_config(const TrainingConfig& cfg) {
  ModelConfig mc;
  mc.features.pos_dim = cfg.pos_dim;
  mc.features.pct_indicator_dim = cfg.pct_indicator_dim;
  mc.features.hidden_dim = cfg.hidden_dim;
  mc.mode = cfg.mode;
  mc.task = cfg.task;
  mc.gate_bias_init = cfg.gate_bias_init;
  mc.constrained_decoding = cfg.constrained_decoding;
  return mc;
}

TrainResult train(const TrainingConfig& cfg, const std::vector<Instance>& train_set,
                  const std::vector<Instance>& dev_set,
                  std::shared_ptr<const WordEmbeddings> words,
                  const std::vector<std::string>& roles, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  TrainResult result{Model(model_config(cfg), TagSet(roles), PosVocab::build(train_set), std::move(words), cfg.seed),
                     {}, 0, -1.0};
  Model& model = result.model;

  std::vector<EncodedInstance> encoded;
  encoded.reserve(train_set.size());
  for (const auto& inst : train_set) encoded.push_back(model.encode(inst));
  const std::vector<Instance>& selection = dev_set.empty() ? train_set : dev_set;

  const std::vector<Value> params = model.parameters();
  Adam adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::vector<std::size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);
  ParameterSnapshot best = model.snapshot();
  const GateMode gate_mode = cfg.gate_mode();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(e - b);
      model.zero_grad();
      for (std::size_t i = b; i < e; ++i) {
        const EncodedInstance& inst = encoded[order[i]];
        JointLoss loss = joint_loss(model, inst, cfg.lambda, gate_mode);
        const double value = loss.total.item();
        if (!std::isfinite(value))
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                " on instance " + train_set[order[i]].sentence_id);
        rec.mean_loss += value;
        rec.mean_crf += loss.crf.item();
        rec.mean_skip += loss.skip.item();
        rec.train_skipped += inst.size() - loss.remained;
        scale(loss.total, inv).backward();
      }
      clip_grad_norm(params, cfg.grad_clip_norm);
      adam.step();
    }
    const double n = static_cast<double>(encoded.size());
    rec.mean_loss /= n;
    rec.mean_crf /= n;
    rec.mean_skip /= n;

    const EvalReport dev = evaluate(model, selection, gate_mode);
    rec.dev_f1 = dev.overall.f1();
    if (dev.skips) {
      rec.dev_skipped = dev.skips->tokens_skipped;
      rec.dev_entity_skipped = dev.skips->entity_tokens_skipped;
      rec.dev_tokens = dev.skips->total_tokens;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_f1 > result.best_dev_f1) {
      result.best_dev_f1 = rec.dev_f1;
      result.best_epoch = epoch;
      best = model.snapshot();
    }
    if (rec.dev_f1 >= cfg.target_dev_f1) break;
    if (epoch - result.best_epoch >= cfg.patience) break;
  }
  model.restore(best);
  return result;
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  for (const auto& r : history) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"loss", r.mean_loss},
                        {"crf_loss", r.mean_crf},
                        {"skip_loss", r.mean_skip},
                        {"train_skipped", r.train_skipped},
                        {"dev_f1", r.dev_f1},
                        {"dev_skipped", r.dev_skipped},
                        {"dev_entity_skipped", r.dev_entity_skipped},
                        {"dev_tokens", r.dev_tokens},
                        {"seconds", r.seconds}};
    os << j.dump() << '\n';
  }
  return os.str();
}

// ---- sweep ------------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(sq / static_cast<double>(xs.size()));
  return r;
}

std::vector<double> lambda_grid(double start, double end, double step) {
  if (!(step > 0.0) || end < start) return {};
  const auto count = static_cast<long>(std::floor((end - start) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) grid.push_back(start + static_cast<double>(i) * step);
  return grid;
}

int workers_from_env() {
  if (const char* w = std::getenv("SKIPTAG_WORKERS")) {
    const int n = std::atoi(w);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

// Runs jobs[i] into results[i] on up to `workers` threads.
template <class Job, class Result>
void run_parallel(const std::vector<Job>& jobs, std::vector<Result>& results, int workers,
                  const std::function<Result(const Job&)>& fn) {
  results.resize(jobs.size());
  if (workers <= 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = fn(jobs[i]);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), jobs.size());
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          results[i] = fn(jobs[i]);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

SweepRow summarize(const TrainingConfig& cfg, const std::vector<EvalReport>& reports,
                   const std::vector<std::string>& roles) {
  SweepRow row;
  row.mode = cfg.mode;
  row.lambda = cfg.lambda;
  std::ostringstream label;
  if (cfg.mode == EncoderMode::plain) {
    label << "plain";
  } else {
    label << "skip lambda=" << std::fixed << std::setprecision(2) << cfg.lambda;
  }
  row.label = label.str();
  std::map<std::string, std::vector<double>> role_f1;
  std::vector<double> skipped;
  for (const auto& r : reports) {
    row.run_f1.push_back(r.overall.f1());
    for (const auto& role : roles) {
      auto it = r.per_role.find(role);
      role_f1[role].push_back(it == r.per_role.end() ? 0.0 : it->second.f1());
    }
    skipped.push_back(r.skips ? static_cast<double>(r.skips->tokens_skipped) : 0.0);
  }
  row.overall = mean_std(row.run_f1);
  for (const auto& [role, xs] : role_f1) row.per_role[role] = mean_std(xs);
  row.skipped = mean_std(skipped);
  return row;
}

}  // namespace

SweepRow run_setting(const TrainingConfig& cfg, int runs, const SweepData& data, int workers) {
  std::vector<TrainingConfig> jobs;
  for (int r = 0; r < runs; ++r) {
    TrainingConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(r);
    jobs.push_back(c);
  }
  std::vector<EvalReport> reports;
  run_parallel<TrainingConfig, EvalReport>(jobs, reports, workers, [&](const TrainingConfig& c) {
    TrainResult tr = train(c, *data.train, *data.dev, data.words, data.roles);
    return evaluate(tr.model, *data.test, c.gate_mode());
  });
  return summarize(cfg, reports, data.roles);
}

SweepReport sweep(const TrainingConfig& base, const std::vector<double>& grid, int runs,
                  const SweepData& data, bool include_baseline, int workers) {
  if (grid.empty()) throw ConfigError("lambda grid is empty", "grid");
  if (runs <= 0) throw ConfigError("runs must be > 0", "runs");
  // Flatten (setting, run) pairs so every worker stays busy.
  std::vector<TrainingConfig> settings;
  if (include_baseline) {
    TrainingConfig c = base;
    c.mode = EncoderMode::plain;
    settings.push_back(c);
  }
  for (double lambda : grid) {
    TrainingConfig c = base;
    c.mode = EncoderMode::skip;
    c.lambda = lambda;
    settings.push_back(c);
  }
  std::vector<TrainingConfig> jobs;
  for (const auto& s : settings)
    for (int r = 0; r < runs; ++r) {
      TrainingConfig c = s;
      c.seed = base.seed + static_cast<std::uint64_t>(r);
      jobs.push_back(c);
    }
  std::vector<EvalReport> reports;
  run_parallel<TrainingConfig, EvalReport>(jobs, reports, workers, [&](const TrainingConfig& c) {
    TrainResult tr = train(c, *data.train, *data.dev, data.words, data.roles);
    return evaluate(tr.model, *data.test, c.gate_mode());
  });

  SweepReport report;
  std::size_t at = 0;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    std::vector<EvalReport> chunk(reports.begin() + static_cast<long>(at),
                                  reports.begin() + static_cast<long>(at + static_cast<std::size_t>(runs)));
    at += static_cast<std::size_t>(runs);
    SweepRow row = summarize(settings[s], chunk, data.roles);
    if (include_baseline && s == 0) report.baseline = std::move(row);
    else report.rows.push_back(std::move(row));
  }
  std::vector<int> idx(report.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return report.rows[static_cast<std::size_t>(a)].overall.mean <
           report.rows[static_cast<std::size_t>(b)].overall.mean;
  });
  report.best = idx.back();
  report.median = idx[(idx.size() - 1) / 2];
  return report;
}

namespace {

std::string ms(const MeanStd& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * m.mean << "(" << 100.0 * m.std << ")";
  return os.str();
}

nlohmann::json row_json(const SweepRow& r) {
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [role, m] : r.per_role) roles[role] = {{"mean", m.mean}, {"std", m.std}};
  return {{"label", r.label},
          {"mode", mode_name(r.mode)},
          {"lambda", r.lambda},
          {"runs", r.run_f1.size()},
          {"run_f1", r.run_f1},
          {"overall", {{"mean", r.overall.mean}, {"std", r.overall.std}}},
          {"per_role", roles},
          {"skipped_tokens", {{"mean", r.skipped.mean}, {"std", r.skipped.std}}}};
}

}  // namespace

std::string format_sweep(const SweepReport& report) {
  std::ostringstream os;
  std::vector<std::string> roles;
  const SweepRow* any = report.baseline ? &*report.baseline
                                        : (report.rows.empty() ? nullptr : &report.rows.front());
  if (any)
    for (const auto& [role, m] : any->per_role) roles.push_back(role);
  os << std::left << std::setw(22) << "setting" << std::setw(16) << "overall";
  for (const auto& r : roles) os << std::setw(16) << r;
  os << "skipped\n";
  auto line = [&](const std::string& name, const SweepRow& row) {
    os << std::left << std::setw(22) << name << std::setw(16) << ms(row.overall);
    for (const auto& r : roles) {
      auto it = row.per_role.find(r);
      os << std::setw(16) << (it == row.per_role.end() ? std::string("-") : ms(it->second));
    }
    os << std::fixed << std::setprecision(1) << row.skipped.mean << '\n';
  };
  if (report.baseline) line("biLSTM+CRF", *report.baseline);
  for (const auto& row : report.rows) line(row.label, row);
  if (report.best >= 0) {
    line("+skip best", report.rows[static_cast<std::size_t>(report.best)]);
    line("+skip median", report.rows[static_cast<std::size_t>(report.median)]);
  }
  return os.str();
}

std::string sweep_json(const SweepReport& report) {
  nlohmann::json j;
  j["baseline"] = report.baseline ? row_json(*report.baseline) : nlohmann::json(nullptr);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_json(r));
  j["best"] = report.best;
  j["median"] = report.median;
  if (report.best >= 0) {
    j["best_lambda"] = report.rows[static_cast<std::size_t>(report.best)].lambda;
    j["median_lambda"] = report.rows[static_cast<std::size_t>(report.median)].lambda;
  }
  return j.dump(2);
}

}  // namespace skiptag
