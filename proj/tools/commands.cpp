#include "commands.hpp"

#include "skiptag/checkpoint.hpp"
#include "skiptag/corpus.hpp"
#include "skiptag/metrics.hpp"
#include "skiptag/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <unordered_set>
#include <sstream>

namespace skiptag::cli {

namespace {

using json = nlohmann::json;

std::vector<SentenceRecord> load_data(const std::string& path, Task task) {
  const bool jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  if (task == Task::ner && !jsonl) return load_conll(path);
  return load_records(path);
}

std::vector<std::string> roles_for(Task task, const std::vector<SentenceRecord>& records) {
  if (task == Task::percentage) return kPartWholeRoles;
  return collect_roles(records);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file", path);
  out << text;
}

struct TrainFlags {
  std::string config, train, dev, embeddings, out, history, mode, task;
  int random_embeddings = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  int max_epochs = 0;
  bool init_only = false;
};

struct DataFlags {
  std::string train, dev, test, embeddings, task = "percentage";
  int random_embeddings = 0;
};

TrainingConfig resolve_config(const std::string& config_path) {
  TrainingConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  return cfg;
}

std::shared_ptr<const WordEmbeddings> embeddings_for(const std::string& path, int random_dim,
                                                     std::uint64_t seed,
                                                     const std::vector<SentenceRecord>& records,
                                                     std::ostream& err) {
  if (!path.empty()) {
    std::unordered_set<std::string> vocab;
    for (const auto& r : records)
      for (const auto& t : r.tokens) vocab.insert(lowercase(t));
    EmbeddingLoad load = load_embeddings(path, &vocab);
    for (const auto& w : load.warnings) err << "warning: " << w << '\n';
    return std::make_shared<WordEmbeddings>(std::move(load.embeddings));
  }
  if (random_dim > 0) return std::make_shared<WordEmbeddings>(random_embeddings(records, random_dim, seed));
  throw ConfigError("one of --embeddings or --random-embeddings is required", "embeddings");
}

int cmd_train(const CLI::App& cmd, const TrainFlags& f, std::ostream& out, std::ostream& err) {
  TrainingConfig cfg = resolve_config(f.config);
  if (cmd.count("--mode")) apply_config_entry(cfg, "mode", f.mode);
  if (cmd.count("--task")) apply_config_entry(cfg, "task", f.task);
  if (cmd.count("--lambda")) cfg.lambda = f.lambda;
  if (cmd.count("--seed")) cfg.seed = f.seed;
  if (cmd.count("--max-epochs")) cfg.max_epochs = f.max_epochs;
  cfg.validate();

  const auto train_records = load_data(f.train, cfg.task);
  const auto dev_records = f.dev.empty() ? std::vector<SentenceRecord>{} : load_data(f.dev, cfg.task);
  std::vector<SentenceRecord> all = train_records;
  all.insert(all.end(), dev_records.begin(), dev_records.end());
  auto words = embeddings_for(f.embeddings, f.random_embeddings, cfg.seed, all, err);
  const auto roles = roles_for(cfg.task, all);
  const auto train_set = expand_all(train_records, cfg.task);
  const auto dev_set = expand_all(dev_records, cfg.task);
  if (train_set.empty()) throw DataError("training data yields no instances", f.train);

  if (f.init_only) {
    Model model(model_config(cfg), TagSet(roles), PosVocab::build(train_set), words, cfg.seed);
    save_checkpoint(f.out, model);
    out << "wrote untrained " << mode_name(cfg.mode) << " model to " << f.out << '\n';
    return kOk;
  }

  TrainResult result = train(cfg, train_set, dev_set, words, roles, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << std::fixed << std::setprecision(4) << r.mean_loss
        << " dev_f1 " << r.dev_f1 << " dev_skipped " << r.dev_skipped << " (" << std::setprecision(1)
        << r.seconds << "s)\n";
  });
  save_checkpoint(f.out, result.model);
  write_text(f.history.empty() ? f.out + ".history.jsonl" : f.history, history_jsonl(result.history));
  out << "best epoch " << result.best_epoch << " dev_f1 " << std::fixed << std::setprecision(4)
      << result.best_dev_f1 << "; wrote " << f.out << '\n';
  return kOk;
}

void check_compatible(const Model& model, const std::vector<SentenceRecord>& records,
                      const std::string& mode) {
  if (!mode.empty() && parse_mode(mode) != model.config().mode)
    throw CompatibilityError("model was trained in " + std::string(mode_name(model.config().mode)) +
                             " mode, --mode asks for " + mode);
  const auto& known = model.tags().roles();
  for (const auto& role : collect_roles(records))
    if (std::find(known.begin(), known.end(), role) == known.end())
      throw CompatibilityError("data role '" + role + "' is not in the model tag set");
}

json prediction_json(const Instance& inst, const Prediction& p) {
  json j = {{"sentence_id", inst.sentence_id},
            {"percentage_index", inst.percentage_index},
            {"tokens", inst.tokens},
            {"tags", p.tags},
            {"spans", json::array()}};
  for (const auto& s : p.spans) j["spans"].push_back({{"role", s.role}, {"start", s.start}, {"end", s.end}});
  if (p.trace)
    j["gates"] = {{"forward", p.trace->u_fwd},
                  {"backward", p.trace->u_bwd},
                  {"remained", p.trace->remained_positions()}};
  return j;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& output,
                const std::string& mode, std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  const auto records = load_data(input, model.config().task);
  check_compatible(model, records, mode);
  std::ostringstream buf;
  long count = 0;
  for (const auto& inst : expand_all(records, model.config().task)) {
    buf << prediction_json(inst, model.predict(inst)).dump() << '\n';
    ++count;
  }
  if (output.empty() || output == "-") out << buf.str();
  else write_text(output, buf.str());
  if (!output.empty() && output != "-") out << "wrote " << count << " predictions to " << output << '\n';
  return kOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data, const std::string& summary,
                 std::size_t top, std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  const auto records = load_data(data, model.config().task);
  check_compatible(model, records, {});
  const EvalReport report = evaluate(model, expand_all(records, model.config().task));
  out << format_report(report, top);
  if (!summary.empty()) write_text(summary, report_json(report, top) + "\n");
  return kOk;
}

int cmd_stats(const std::string& model_path, const std::string& data, std::size_t top,
              std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  if (model.config().mode != EncoderMode::skip)
    throw CompatibilityError("stats needs a skip-mode model");
  const auto records = load_data(data, model.config().task);
  check_compatible(model, records, {});
  const EvalReport report = evaluate(model, expand_all(records, model.config().task));
  const SkipStats& s = *report.skips;
  out << "sequences " << s.sequences << "\ntotal_tokens " << s.total_tokens << "\ntokens_skipped "
      << s.tokens_skipped << "\nentity_tokens_skipped " << s.entity_tokens_skipped
      << "\nmean_skipped_per_sequence " << s.mean_skipped_per_sequence() << "\nranking";
  std::size_t shown = 0;
  for (const auto& r : rank_skipped_tokens(s.skip_counts, s.frequencies)) {
    if (shown++ == top || r.skips == 0) break;
    out << "\n  " << std::left << std::setw(16) << r.token << std::fixed << std::setprecision(4)
        << r.score << "  skips " << r.skips << "  freq " << r.frequency;
  }
  out << '\n';
  return kOk;
}

int cmd_annotate(const std::string& input, const std::string& output, std::ostream& out) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open input", input);
  std::vector<SentenceRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string toks = line, tags;
    if (const auto sep = line.find("|||"); sep != std::string::npos) {
      toks = line.substr(0, sep);
      tags = line.substr(sep + 3);
    }
    std::vector<std::string> tokens, pos;
    std::istringstream ts(toks), ps(tags);
    for (std::string t; ts >> t;) tokens.push_back(t);
    for (std::string t; ps >> t;) pos.push_back(t);
    if (tokens.empty()) continue;
    if (pos.empty()) pos.assign(tokens.size(), "X");
    const std::string where = input + ":" + std::to_string(lineno);
    if (pos.size() != tokens.size())
      throw DataError(std::to_string(pos.size()) + " POS tags for " + std::to_string(tokens.size()) +
                          " tokens",
                      where);
    records.push_back(annotate("line-" + std::to_string(lineno), std::move(tokens), std::move(pos)));
  }
  if (output.empty() || output == "-") {
    write_records(out, records);
  } else {
    save_records(output, records);
    long mentions = 0;
    for (const auto& r : records) mentions += static_cast<long>(r.percentages.size());
    out << "annotated " << records.size() << " sentences, " << mentions << " percentages\n";
  }
  return kOk;
}

int cmd_sweep(const CLI::App& cmd, const std::string& config, const DataFlags& d, double start,
              double end, double step, int runs, std::uint64_t seed, bool no_baseline, int workers,
              const std::string& output, std::ostream& out, std::ostream& err) {
  TrainingConfig cfg = resolve_config(config);
  if (cmd.count("--task")) apply_config_entry(cfg, "task", d.task);
  if (cmd.count("--seed")) cfg.seed = seed;
  const auto grid = lambda_grid(start, end, step);
  if (grid.empty()) throw ConfigError("lambda grid is empty", "grid");
  if (runs <= 0) throw ConfigError("--runs must be positive", "runs");

  const auto train_records = load_data(d.train, cfg.task);
  const auto dev_records = d.dev.empty() ? std::vector<SentenceRecord>{} : load_data(d.dev, cfg.task);
  const auto test_records = load_data(d.test, cfg.task);
  std::vector<SentenceRecord> all = train_records;
  all.insert(all.end(), dev_records.begin(), dev_records.end());
  all.insert(all.end(), test_records.begin(), test_records.end());
  const auto train_set = expand_all(train_records, cfg.task);
  const auto dev_set = expand_all(dev_records, cfg.task);
  const auto test_set = expand_all(test_records, cfg.task);
  SweepData data{&train_set, &dev_set, &test_set,
                 embeddings_for(d.embeddings, d.random_embeddings, cfg.seed, all, err),
                 roles_for(cfg.task, all)};
  out << "sweeping " << grid.size() << " lambda values x " << runs << " runs\n";
  const SweepReport report = sweep(cfg, grid, runs, data, !no_baseline, workers);
  out << format_sweep(report);
  if (!output.empty()) write_text(output, sweep_json(report) + "\n");
  return kOk;
}

int cmd_synth(const SyntheticParams& p, const std::string& output, const std::string& stats_path,
              const std::string& emb_out, int emb_dim, std::ostream& out) {
  const auto records = generate_synthetic(p);
  const SyntheticStats st = synthetic_stats(records);
  if (output.empty() || output == "-") write_records(out, records);
  else save_records(output, records);
  const json stats = {{"sentences", st.sentences},
                      {"percentages", st.percentages},
                      {"tokens", st.tokens},
                      {"mean_length", st.mean_length},
                      {"min_part_distance", st.min_part_distance},
                      {"max_part_distance", st.max_part_distance},
                      {"seed", p.seed}};
  if (!stats_path.empty()) write_text(stats_path, stats.dump(2) + "\n");
  if (!emb_out.empty()) {
    std::ofstream e(emb_out);
    if (!e) throw DataError("cannot write file", emb_out);
    write_embeddings(e, random_embeddings(records, emb_dim, p.seed));
  }
  if (!output.empty() && output != "-") out << stats.dump() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"skiptag: skip-gated biLSTM-CRF tagger for part/whole extraction"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", tf.config, "key = value config file");
  train_cmd->add_option("--train", tf.train, "training data")->required();
  train_cmd->add_option("--dev", tf.dev, "development data");
  train_cmd->add_option("--embeddings", tf.embeddings, "pretrained embedding text file");
  train_cmd->add_option("--random-embeddings", tf.random_embeddings,
                        "use seeded random vectors of this dimension instead");
  train_cmd->add_option("--mode", tf.mode, "plain or skip");
  train_cmd->add_option("--task", tf.task, "percentage or ner");
  train_cmd->add_option("--lambda", tf.lambda, "skip loss weight");
  train_cmd->add_option("--seed", tf.seed, "random seed");
  train_cmd->add_option("--max-epochs", tf.max_epochs, "epoch budget");
  train_cmd->add_option("--out", tf.out, "checkpoint path")->required();
  train_cmd->add_option("--history", tf.history, "per-epoch history (JSON lines)");
  train_cmd->add_flag("--init-only", tf.init_only, "write the initialized model without training");

  std::string model_path, input, output, mode, summary;
  std::size_t top = 10;
  auto* predict_cmd = app.add_subcommand("predict", "tag data with a trained model");
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--input", input)->required();
  predict_cmd->add_option("--out", output, "output JSON lines (default stdout)");
  predict_cmd->add_option("--mode", mode, "expected model mode; mismatch is an error");

  auto* eval_cmd = app.add_subcommand("evaluate", "span F1 and skip statistics");
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--data", input)->required();
  eval_cmd->add_option("--summary", summary, "machine-readable JSON summary");
  eval_cmd->add_option("--top", top, "ranked skipped tokens to show");

  auto* stats_cmd = app.add_subcommand("stats", "skip statistics and skipped-token ranking");
  stats_cmd->add_option("--model", model_path)->required();
  stats_cmd->add_option("--data", input)->required();
  stats_cmd->add_option("--top", top, "ranked tokens to show");

  auto* annotate_cmd = app.add_subcommand("annotate", "recognize percentages in tokenized text");
  annotate_cmd->add_option("--input", input, "one sentence per line, optional ' ||| POS ...'")
      ->required();
  annotate_cmd->add_option("--out", output, "record file (default stdout)");

  SyntheticParams sp;
  std::string stats_path, emb_out;
  int emb_dim = 50;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic long-gap corpus");
  synth_cmd->add_option("--n", sp.n, "sentences");
  synth_cmd->add_option("--min-length", sp.min_length);
  synth_cmd->add_option("--max-length", sp.max_length);
  synth_cmd->add_option("--min-gap", sp.min_gap);
  synth_cmd->add_option("--max-gap", sp.max_gap);
  synth_cmd->add_option("--seed", sp.seed);
  synth_cmd->add_option("--id-prefix", sp.id_prefix);
  synth_cmd->add_option("--out", output, "record file (default stdout)");
  synth_cmd->add_option("--stats", stats_path, "corpus statistics (JSON)");
  synth_cmd->add_option("--embeddings-out", emb_out, "also write random embeddings for the vocabulary");
  synth_cmd->add_option("--embedding-dim", emb_dim);

  DataFlags df;
  std::string sweep_config;
  double grid_start = 0.02, grid_end = 1.00, grid_step = 0.02;
  int runs = 20;
  std::uint64_t sweep_seed = 1;
  bool no_baseline = false;
  int workers = workers_from_env();
  auto* sweep_cmd = app.add_subcommand("sweep", "lambda sweep with multi-seed averaging");
  sweep_cmd->add_option("--config", sweep_config);
  sweep_cmd->add_option("--train", df.train)->required();
  sweep_cmd->add_option("--dev", df.dev);
  sweep_cmd->add_option("--test", df.test)->required();
  sweep_cmd->add_option("--embeddings", df.embeddings);
  sweep_cmd->add_option("--random-embeddings", df.random_embeddings);
  sweep_cmd->add_option("--task", df.task);
  sweep_cmd->add_option("--grid-start", grid_start);
  sweep_cmd->add_option("--grid-end", grid_end);
  sweep_cmd->add_option("--grid-step", grid_step);
  sweep_cmd->add_option("--runs", runs, "seeded runs per setting");
  sweep_cmd->add_option("--seed", sweep_seed, "first seed");
  sweep_cmd->add_flag("--no-baseline", no_baseline, "skip the plain biLSTM+CRF rows");
  sweep_cmd->add_option("--workers", workers, "parallel runs (default $SKIPTAG_WORKERS or 1)");
  sweep_cmd->add_option("--out", output, "JSON report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(*train_cmd, tf, out, err);
    if (*predict_cmd) return cmd_predict(model_path, input, output, mode, out);
    if (*eval_cmd) return cmd_evaluate(model_path, input, summary, top, out);
    if (*stats_cmd) return cmd_stats(model_path, input, top, out);
    if (*annotate_cmd) return cmd_annotate(input, output, out);
    if (*synth_cmd) return cmd_synth(sp, output, stats_path, emb_out, emb_dim, out);
    if (*sweep_cmd)
      return cmd_sweep(*sweep_cmd, sweep_config, df, grid_start, grid_end, grid_step, runs,
                       sweep_seed, no_baseline, workers, output, out, err);
  } catch (const ConfigError& e) {
    err << "config error [" << e.key() << "]: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const TagError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CompatibilityError& e) {
    err << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace skiptag::cli
