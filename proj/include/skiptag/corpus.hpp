#pragma once

// Data ingestion: percentage-task record files, CoNLL NER files, pretrained
// embedding text files, percentage recognition and per-percentage instance
// expansion.

#include "skiptag/autodiff.hpp"
#include "skiptag/tagging.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace skiptag {

// Malformed input data. `location` is "path:line" when known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::string location = {})
      : std::runtime_error(location.empty() ? what : location + ": " + what),
        location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

struct PercentageMention {
  int token_index = 0;
  std::string surface;
  double normalized_value = 0.0;  // percent units, 30% -> 30.0

  bool operator==(const PercentageMention&) const = default;
};

// A part/whole annotation attached to one percentage.
struct Fact {
  int percentage = 0;
  std::string role;
  int start = 0;
  int end = 0;

  bool operator==(const Fact&) const = default;
};

struct SentenceRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<PercentageMention> percentages;
  std::vector<Fact> facts;
  // Sentence-level entity spans (NER data).
  std::vector<Span> entities;

  int size() const { return static_cast<int>(tokens.size()); }
  bool operator==(const SentenceRecord&) const = default;
};

enum class Task { percentage, ner };

const char* task_name(Task task);
Task parse_task(const std::string& name);

// One tagging input: a sentence as seen for one current percentage.
struct Instance {
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<int> pct_indicator;
  std::vector<int> mask;
  TagSequence gold;
  std::string sentence_id;
  int percentage_index = -1;  // -1 for NER instances

  int size() const { return static_cast<int>(tokens.size()); }
};

// Percentage task roles.
inline const std::vector<std::string> kPartWholeRoles = {"part", "whole"};

// ---- records -------------------------------------------------------------

void validate(const SentenceRecord& rec);

std::string to_json_line(const SentenceRecord& rec);
SentenceRecord record_from_json_line(const std::string& line, const std::string& location = {});

std::vector<SentenceRecord> read_records(std::istream& in, const std::string& name = "<stream>");
std::vector<SentenceRecord> load_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<SentenceRecord>& records);
void save_records(const std::filesystem::path& path, const std::vector<SentenceRecord>& records);

// ---- percentage recognition ----------------------------------------------

// Rule subset: NUMBER%, NUMBER %, NUMBER percent|pct, NUMBER per cent, where
// NUMBER is an integer or decimal literal. Matching is case-insensitive and
// mentions never overlap.
std::vector<PercentageMention> recognize_percentages(const std::vector<std::string>& tokens);

// Builds a record (no facts) from tokens and POS tags.
SentenceRecord annotate(std::string id, std::vector<std::string> tokens,
                        std::vector<std::string> pos);

// ---- instance expansion ----------------------------------------------------

using SentenceFilter = std::function<bool(const SentenceRecord&)>;

// Default sentence filter: keeps every record.
bool keep_all(const SentenceRecord&);

// Percentage task: one instance per percentage, mask marking that
// percentage's token, gold encoding its facts. NER task: one instance per
// sentence with an all-zero mask.
std::vector<Instance> expand_instances(const SentenceRecord& rec, Task task = Task::percentage);

std::vector<Instance> expand_all(const std::vector<SentenceRecord>& records, Task task,
                                 const SentenceFilter& filter = keep_all);

// ---- CoNLL ------------------------------------------------------------------

// Converts IOB1 tags (CoNLL-2003 style) to BIOUL.
TagSequence iob1_to_bioul(const TagSequence& iob1, const std::string& location = {});

std::vector<SentenceRecord> read_conll(std::istream& in, const std::string& name = "<stream>");
std::vector<SentenceRecord> load_conll(const std::filesystem::path& path);

// Entity roles appearing in the records, sorted.
std::vector<std::string> collect_roles(const std::vector<SentenceRecord>& records);

// ---- embeddings -------------------------------------------------------------

// Frozen pretrained word vectors. Row 0 is the all-zero OOV vector.
class WordEmbeddings {
 public:
  WordEmbeddings() = default;
  WordEmbeddings(std::vector<std::string> words, ad::Matrix vectors);

  int dim() const { return static_cast<int>(table_.cols()); }
  int size() const { return static_cast<int>(words_.size()); }
  // Lowercases before lookup; unknown words map to row 0.
  int index(const std::string& word) const;
  const ad::Matrix& table() const { return table_; }
  const std::vector<std::string>& words() const { return words_; }
  std::uint64_t vocab_hash() const;

 private:
  std::vector<std::string> words_;  // words_[i] names table row i + 1
  std::unordered_map<std::string, int> index_;
  ad::Matrix table_;
};

std::string lowercase(std::string s);

struct EmbeddingLoad {
  WordEmbeddings embeddings;
  std::vector<std::string> warnings;
};

// `word v1 ... vD` per line. D comes from the first line. When `vocab` is
// given only those (lowercased) words are kept. Duplicates: last one wins.
EmbeddingLoad read_embeddings(std::istream& in, const std::unordered_set<std::string>* vocab,
                              const std::string& name = "<stream>");
EmbeddingLoad load_embeddings(const std::filesystem::path& path,
                              const std::unordered_set<std::string>* vocab = nullptr);
void write_embeddings(std::ostream& out, const WordEmbeddings& emb);

// Random vectors for every distinct (lowercased) token of the records.
WordEmbeddings random_embeddings(const std::vector<SentenceRecord>& records, int dim,
                                 std::uint64_t seed);

// ---- synthetic corpus ---------------------------------------------------------

struct SyntheticParams {
  int n = 100;
  int min_length = 20;
  int max_length = 60;
  int min_gap = 15;
  int max_gap = 25;
  std::uint64_t seed = 1;
  std::string id_prefix = "syn";
};

struct SyntheticStats {
  int sentences = 0;
  int percentages = 0;
  int tokens = 0;
  int min_part_distance = 0;
  int max_part_distance = 0;
  double mean_length = 0.0;
};

// Filler tokens the generator draws gaps from.
const std::vector<std::string>& synthetic_filler_pool();

// Sentences of k in {1,2,3} percentages ("77 % of jobs in China , ...")
// followed by a run of filler tokens and a part phrase shared by every
// percentage. The part starts at least `gap` tokens after the last
// percentage. Throws std::invalid_argument when the geometry cannot fit.
std::vector<SentenceRecord> generate_synthetic(const SyntheticParams& params);
SyntheticStats synthetic_stats(const std::vector<SentenceRecord>& records);

}  // namespace skiptag
