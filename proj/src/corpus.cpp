#include "skiptag/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

namespace skiptag {

using json = nlohmann::json;

const char* task_name(Task task) { return task == Task::percentage ? "percentage" : "ner"; }

Task parse_task(const std::string& name) {
  if (name == "percentage") return Task::percentage;
  if (name == "ner") return Task::ner;
  throw std::invalid_argument("unknown task '" + name + "' (expected percentage or ner)");
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// ---- records -------------------------------------------------------------

namespace {

void check_span(int start, int end, int length, const std::string& what) {
  if (start < 0 || start >= end || end > length)
    throw DataError(what + " span [" + std::to_string(start) + "," + std::to_string(end) +
                    ") invalid for " + std::to_string(length) + " tokens");
}

}  // namespace

void validate(const SentenceRecord& rec) {
  const int n = rec.size();
  if (n == 0) throw DataError("record '" + rec.id + "' has no tokens");
  if (rec.pos.size() != rec.tokens.size())
    throw DataError("record '" + rec.id + "': " + std::to_string(rec.pos.size()) +
                    " POS tags for " + std::to_string(n) + " tokens");
  std::set<int> pct_tokens;
  for (const auto& m : rec.percentages) {
    if (m.token_index < 0 || m.token_index >= n)
      throw DataError("record '" + rec.id + "': percentage token index " +
                      std::to_string(m.token_index) + " out of range");
    if (!pct_tokens.insert(m.token_index).second)
      throw DataError("record '" + rec.id + "': two percentages share token " +
                      std::to_string(m.token_index));
  }
  for (const auto& f : rec.facts) {
    if (f.percentage < 0 || f.percentage >= static_cast<int>(rec.percentages.size()))
      throw DataError("record '" + rec.id + "': fact references missing percentage " +
                      std::to_string(f.percentage));
    check_span(f.start, f.end, n, "record '" + rec.id + "': fact");
  }
  for (const auto& e : rec.entities) check_span(e.start, e.end, n, "record '" + rec.id + "': entity");
}

std::string to_json_line(const SentenceRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["tokens"] = rec.tokens;
  j["pos"] = rec.pos;
  j["percentages"] = json::array();
  for (const auto& m : rec.percentages)
    j["percentages"].push_back(
        {{"token_index", m.token_index}, {"surface", m.surface}, {"value", m.normalized_value}});
  j["facts"] = json::array();
  for (const auto& f : rec.facts)
    j["facts"].push_back(
        {{"percentage", f.percentage}, {"role", f.role}, {"start", f.start}, {"end", f.end}});
  j["entities"] = json::array();
  for (const auto& e : rec.entities)
    j["entities"].push_back({{"role", e.role}, {"start", e.start}, {"end", e.end}});
  return j.dump();
}

SentenceRecord record_from_json_line(const std::string& line, const std::string& location) {
  SentenceRecord rec;
  try {
    const json j = json::parse(line);
    rec.id = j.at("id").get<std::string>();
    rec.tokens = j.at("tokens").get<std::vector<std::string>>();
    rec.pos = j.at("pos").get<std::vector<std::string>>();
    for (const auto& m : j.value("percentages", json::array()))
      rec.percentages.push_back({m.at("token_index").get<int>(), m.at("surface").get<std::string>(),
                                 m.at("value").get<double>()});
    for (const auto& f : j.value("facts", json::array()))
      rec.facts.push_back({f.at("percentage").get<int>(), f.at("role").get<std::string>(),
                           f.at("start").get<int>(), f.at("end").get<int>()});
    for (const auto& e : j.value("entities", json::array()))
      rec.entities.push_back(
          {e.at("role").get<std::string>(), e.at("start").get<int>(), e.at("end").get<int>()});
  } catch (const json::exception& e) {
    throw DataError(std::string("bad record: ") + e.what(), location);
  }
  try {
    validate(rec);
  } catch (const DataError& e) {
    throw DataError(e.what(), location);
  }
  return rec;
}

std::vector<SentenceRecord> read_records(std::istream& in, const std::string& name) {
  std::vector<SentenceRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json_line(line, name + ":" + std::to_string(lineno)));
  }
  return out;
}

std::vector<SentenceRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open record file", path.string());
  return read_records(in, path.string());
}

void write_records(std::ostream& out, const std::vector<SentenceRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

void save_records(const std::filesystem::path& path, const std::vector<SentenceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write record file", path.string());
  write_records(out, records);
}

// ---- percentage recognition ----------------------------------------------

namespace {

const std::regex& number_re() {
  static const std::regex re(R"(^[+-]?(\d+(\.\d+)?|\.\d+)$)");
  return re;
}

bool is_number(const std::string& s) { return std::regex_match(s, number_re()); }

double parse_number(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

}  // namespace

std::vector<PercentageMention> recognize_percentages(const std::vector<std::string>& tokens) {
  std::vector<PercentageMention> out;
  const std::size_t n = tokens.size();
  std::size_t i = 0;
  while (i < n) {
    const std::string& tok = tokens[i];
    // "20%"
    if (tok.size() > 1 && tok.back() == '%' && is_number(tok.substr(0, tok.size() - 1))) {
      out.push_back({static_cast<int>(i), tok, parse_number(tok.substr(0, tok.size() - 1))});
      ++i;
      continue;
    }
    if (is_number(tok) && i + 1 < n) {
      const std::string next = lowercase(tokens[i + 1]);
      if (next == "%" || next == "percent" || next == "pct") {
        out.push_back({static_cast<int>(i), tok + " " + tokens[i + 1], parse_number(tok)});
        i += 2;
        continue;
      }
      if (next == "per" && i + 2 < n && lowercase(tokens[i + 2]) == "cent") {
        out.push_back({static_cast<int>(i), tok + " " + tokens[i + 1] + " " + tokens[i + 2],
                       parse_number(tok)});
        i += 3;
        continue;
      }
    }
    ++i;
  }
  return out;
}

SentenceRecord annotate(std::string id, std::vector<std::string> tokens,
                        std::vector<std::string> pos) {
  SentenceRecord rec;
  rec.id = std::move(id);
  rec.percentages = recognize_percentages(tokens);
  rec.tokens = std::move(tokens);
  rec.pos = std::move(pos);
  validate(rec);
  return rec;
}

// ---- instance expansion ----------------------------------------------------

bool keep_all(const SentenceRecord&) { return true; }

std::vector<Instance> expand_instances(const SentenceRecord& rec, Task task) {
  validate(rec);
  const int n = rec.size();
  std::vector<Instance> out;
  Instance base;
  base.tokens = rec.tokens;
  base.pos = rec.pos;
  base.sentence_id = rec.id;
  base.pct_indicator.assign(static_cast<std::size_t>(n), 0);
  base.mask.assign(static_cast<std::size_t>(n), 0);
  for (const auto& m : rec.percentages) base.pct_indicator[static_cast<std::size_t>(m.token_index)] = 1;

  auto gold_of = [&](const std::vector<Span>& spans) {
    try {
      return encode(spans, n);
    } catch (const TagError& e) {
      throw DataError("record '" + rec.id + "': " + e.what());
    }
  };

  if (task == Task::ner) {
    Instance inst = base;
    inst.gold = gold_of(rec.entities);
    out.push_back(std::move(inst));
    return out;
  }

  for (std::size_t p = 0; p < rec.percentages.size(); ++p) {
    Instance inst = base;
    inst.percentage_index = static_cast<int>(p);
    inst.mask[static_cast<std::size_t>(rec.percentages[p].token_index)] = 1;
    std::vector<Span> spans;
    for (const auto& f : rec.facts)
      if (f.percentage == static_cast<int>(p)) spans.push_back({f.role, f.start, f.end});
    inst.gold = gold_of(spans);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> expand_all(const std::vector<SentenceRecord>& records, Task task,
                                 const SentenceFilter& filter) {
  std::vector<Instance> out;
  for (const auto& r : records) {
    if (!filter(r)) continue;
    auto inst = expand_instances(r, task);
    std::move(inst.begin(), inst.end(), std::back_inserter(out));
  }
  return out;
}

// ---- CoNLL ------------------------------------------------------------------

TagSequence iob1_to_bioul(const TagSequence& iob1, const std::string& location) {
  std::vector<Span> spans;
  std::optional<Span> open;
  const int n = static_cast<int>(iob1.size());
  for (int i = 0; i < n; ++i) {
    const std::string& t = iob1[static_cast<std::size_t>(i)];
    if (t == "O") {
      if (open) spans.push_back(*open);
      open.reset();
      continue;
    }
    if (t.size() < 3 || t[1] != '-' || (t[0] != 'I' && t[0] != 'B'))
      throw DataError("malformed IOB tag '" + t + "'", location);
    const std::string role = t.substr(2);
    if (t[0] == 'I' && open && open->role == role) {
      open->end = i + 1;
      continue;
    }
    if (open) spans.push_back(*open);
    open = Span{role, i, i + 1};
  }
  if (open) spans.push_back(*open);
  return encode(spans, n);
}

std::vector<SentenceRecord> read_conll(std::istream& in, const std::string& name) {
  std::vector<SentenceRecord> out;
  SentenceRecord cur;
  TagSequence tags;
  int start_line = 0;
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    const std::string where = name + ":" + std::to_string(start_line);
    cur.id = where;
    cur.entities = decode(iob1_to_bioul(tags, where), DecodeMode::strict);
    out.push_back(std::move(cur));
    cur = SentenceRecord{};
    tags.clear();
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") continue;
    if (cols.size() != 4)
      throw DataError("expected 4 columns, found " + std::to_string(cols.size()),
                      name + ":" + std::to_string(lineno));
    if (cur.tokens.empty()) start_line = lineno;
    cur.tokens.push_back(cols[0]);
    cur.pos.push_back(cols[1]);
    tags.push_back(cols[3]);
    if (tags.back() != "O" && (tags.back().size() < 3 || tags.back()[1] != '-' ||
                               (tags.back()[0] != 'I' && tags.back()[0] != 'B')))
      throw DataError("malformed IOB tag '" + tags.back() + "'",
                      name + ":" + std::to_string(lineno));
  }
  flush();
  return out;
}

std::vector<SentenceRecord> load_conll(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CoNLL file", path.string());
  return read_conll(in, path.string());
}

std::vector<std::string> collect_roles(const std::vector<SentenceRecord>& records) {
  std::set<std::string> roles;
  for (const auto& r : records) {
    for (const auto& f : r.facts) roles.insert(f.role);
    for (const auto& e : r.entities) roles.insert(e.role);
  }
  return {roles.begin(), roles.end()};
}

// ---- embeddings -------------------------------------------------------------

WordEmbeddings::WordEmbeddings(std::vector<std::string> words, ad::Matrix vectors)
    : words_(std::move(words)) {
  if (static_cast<Eigen::Index>(words_.size()) != vectors.rows())
    throw std::invalid_argument("WordEmbeddings: word count does not match vector rows");
  table_ = ad::Matrix::Zero(vectors.rows() + 1, vectors.cols());
  table_.bottomRows(vectors.rows()) = vectors;
  for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i) + 1;
}

int WordEmbeddings::index(const std::string& word) const {
  auto it = index_.find(lowercase(word));
  return it == index_.end() ? 0 : it->second;
}

std::uint64_t WordEmbeddings::vocab_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& w : words_) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

EmbeddingLoad read_embeddings(std::istream& in, const std::unordered_set<std::string>* vocab,
                              const std::string& name) {
  EmbeddingLoad result;
  std::vector<std::string> words;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  int dim = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> vec;
    for (std::string f; fields >> f;) {
      char* endp = nullptr;
      const double v = std::strtod(f.c_str(), &endp);
      if (endp == f.c_str() || *endp != '\0')
        throw DataError("non-numeric component '" + f + "'", name + ":" + std::to_string(lineno));
      vec.push_back(v);
    }
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (dim == 0) throw DataError("embedding line has no components", name + ":" + std::to_string(lineno));
    if (static_cast<int>(vec.size()) != dim)
      throw DataError("expected " + std::to_string(dim) + " components, found " +
                          std::to_string(vec.size()),
                      name + ":" + std::to_string(lineno));
    word = lowercase(word);
    if (vocab && !vocab->contains(word)) continue;
    if (auto it = seen.find(word); it != seen.end()) {
      result.warnings.push_back(name + ":" + std::to_string(lineno) + ": duplicate word '" + word +
                                "', keeping the last vector");
      rows[it->second] = std::move(vec);
      continue;
    }
    seen.emplace(word, words.size());
    words.push_back(word);
    rows.push_back(std::move(vec));
  }
  if (dim < 0) throw DataError("embedding file is empty", name);
  ad::Matrix table(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dim; ++j) table(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  result.embeddings = WordEmbeddings(std::move(words), std::move(table));
  return result;
}

EmbeddingLoad load_embeddings(const std::filesystem::path& path,
                              const std::unordered_set<std::string>* vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file", path.string());
  return read_embeddings(in, vocab, path.string());
}

void write_embeddings(std::ostream& out, const WordEmbeddings& emb) {
  std::ostringstream line;
  line.precision(17);
  for (int i = 0; i < emb.size(); ++i) {
    line.str({});
    line << emb.words()[static_cast<std::size_t>(i)];
    for (int j = 0; j < emb.dim(); ++j) line << ' ' << emb.table()(i + 1, j);
    out << line.str() << '\n';
  }
}

WordEmbeddings random_embeddings(const std::vector<SentenceRecord>& records, int dim,
                                 std::uint64_t seed) {
  std::set<std::string> vocab;
  for (const auto& r : records)
    for (const auto& t : r.tokens) vocab.insert(lowercase(t));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  ad::Matrix table(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < dim; ++j) table(i, j) = normal(rng);
  return WordEmbeddings({vocab.begin(), vocab.end()}, std::move(table));
}

}  // namespace skiptag
