#include "skiptag/corpus.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

namespace skiptag {

namespace {

struct Phrase {
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
};

const std::vector<Phrase>& intros() {
  static const std::vector<Phrase> v = {
      {{}, {}},
      {{"The", "report", "estimates", "that"}, {"DT", "NN", "VBZ", "IN"}},
      {{"Surveys", "show", "that"}, {"NNS", "VBP", "IN"}},
      {{"Researchers", "found", "that"}, {"NNS", "VBD", "IN"}},
      {{"According", "to", "the", "study", ","}, {"VBG", "TO", "DT", "NN", ","}},
  };
  return v;
}

const std::vector<Phrase>& part_phrases() {
  static const std::vector<Phrase> v = {
      {{"at", "risk", "of", "automation"}, {"IN", "NN", "IN", "NN"}},
      {{"own", "a", "car"}, {"VBP", "DT", "NN"}},
      {{"support", "the", "new", "policy"}, {"VBP", "DT", "JJ", "NN"}},
      {{"live", "in", "cities"}, {"VBP", "IN", "NNS"}},
      {{"have", "student", "loans"}, {"VBP", "NN", "NNS"}},
      {{"use", "the", "internet", "daily"}, {"VBP", "DT", "NN", "RB"}},
      {{"prefer", "public", "transport"}, {"VBP", "JJ", "NN"}},
      {{"work", "from", "home"}, {"VBP", "IN", "NN"}},
  };
  return v;
}

const std::vector<std::string>& whole_nouns() {
  static const std::vector<std::string> v = {"jobs",     "students", "adults",    "households",
                                             "voters",   "graduates", "workers",  "residents",
                                             "patients", "firms"};
  return v;
}

const std::vector<std::string>& places() {
  static const std::vector<std::string> v = {"China", "India", "Ethiopia", "Brazil",
                                             "Kenya", "Peru",  "Chile",    "Japan"};
  return v;
}

const std::vector<std::string>& filler_pos() {
  static const std::vector<std::string> v = {"DT", "IN", "CC", "IN", "TO", "IN", "DT", "IN",
                                             "VBD", ":", ",", ".", "IN", "IN", "IN", "IN"};
  return v;
}

template <class T>
const T& choose(const std::vector<T>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

int uniform(int lo, int hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Shortest sentence the generator can produce for a given gap: one
// percentage "N% of jobs", ", are", a three-token part and the final ".".
int min_length_for_gap(int gap) { return std::max(gap, 5) + 4; }

}  // namespace

const std::vector<std::string>& synthetic_filler_pool() {
  static const std::vector<std::string> v = {"the", "of", "and", "in", "to",  "by", "a",   "that",
                                             "were", "-",  ",",   ".",  "as", "with", "on", "for"};
  return v;
}

std::vector<SentenceRecord> generate_synthetic(const SyntheticParams& params) {
  if (params.n < 0) throw std::invalid_argument("synthetic: n must be >= 0");
  if (params.min_length < 1 || params.min_length > params.max_length)
    throw std::invalid_argument("synthetic: invalid length range");
  if (params.min_gap < 1 || params.min_gap > params.max_gap)
    throw std::invalid_argument("synthetic: invalid gap range");
  if (params.max_gap >= params.max_length)
    throw std::invalid_argument("synthetic: gap range must lie within the length range");
  if (min_length_for_gap(params.min_gap) > params.max_length)
    throw std::invalid_argument("synthetic: a gap of " + std::to_string(params.min_gap) +
                                " needs at least " +
                                std::to_string(min_length_for_gap(params.min_gap)) +
                                " tokens, above max length " + std::to_string(params.max_length));

  std::mt19937_64 rng(params.seed);
  const auto& fillers = synthetic_filler_pool();
  std::vector<SentenceRecord> out;
  out.reserve(static_cast<std::size_t>(params.n));

  for (int s = 0; s < params.n; ++s) {
    SentenceRecord rec;
    bool built = false;
    for (int attempt = 0; attempt < 1000 && !built; ++attempt) {
      rec = SentenceRecord{};
      rec.id = params.id_prefix + "-" + std::to_string(s);
      auto push = [&](const std::string& tok, const std::string& pos) {
        rec.tokens.push_back(tok);
        rec.pos.push_back(pos);
      };
      // Shrink the sentence on retries so tight length ranges converge.
      const int k = attempt < 500 ? uniform(1, 3, rng) : 1;
      const Phrase& intro = attempt < 500 ? choose(intros(), rng) : intros()[0];
      for (std::size_t i = 0; i < intro.tokens.size(); ++i) push(intro.tokens[i], intro.pos[i]);

      std::vector<Span> wholes;
      for (int m = 0; m < k; ++m) {
        if (m > 0) {
          if (k == 3 && m == 1) push(",", ",");
          if (m == k - 1) {
            if (k == 3) push(",", ",");
            push("and", "CC");
          }
        }
        const int value = uniform(1, 99, rng);
        const int pct_index = rec.size();
        const int form = uniform(0, 2, rng);
        if (form == 0) {
          push(std::to_string(value) + "%", "CD");
        } else if (form == 1) {
          push(std::to_string(value), "CD");
          push("%", "NN");
        } else {
          push(std::to_string(value), "CD");
          push("percent", "NN");
        }
        rec.percentages.push_back({pct_index, "", static_cast<double>(value)});
        push("of", "IN");
        const int whole_start = rec.size();
        push(choose(whole_nouns(), rng), "NNS");
        if (uniform(0, 1, rng) == 1) {
          push("in", "IN");
          push(choose(places(), rng), "NNP");
        }
        wholes.push_back({"whole", whole_start, rec.size()});
      }

      const int gap = uniform(params.min_gap, params.max_gap, rng);
      const int last_pct = rec.percentages.back().token_index;
      const int fill = std::max(0, gap - (rec.size() + 2 - last_pct));
      for (int f = 0; f < fill; ++f) {
        const std::size_t w = std::uniform_int_distribution<std::size_t>(0, fillers.size() - 1)(rng);
        push(fillers[w], filler_pos()[w]);
      }
      push(",", ",");
      push(uniform(0, 1, rng) ? "are" : "were", "VBP");
      const Phrase& part = choose(part_phrases(), rng);
      const int part_start = rec.size();
      for (std::size_t i = 0; i < part.tokens.size(); ++i) push(part.tokens[i], part.pos[i]);
      const int part_end = rec.size();
      push(".", ".");

      if (rec.size() > params.max_length) continue;
      // Pad at the front so distances to the part are unchanged.
      const int pad = params.min_length - rec.size();
      if (pad > 0) {
        std::vector<std::string> toks, tags;
        for (int f = 0; f < pad; ++f) {
          const std::size_t w =
              std::uniform_int_distribution<std::size_t>(0, fillers.size() - 1)(rng);
          toks.push_back(fillers[w]);
          tags.push_back(filler_pos()[w]);
        }
        rec.tokens.insert(rec.tokens.begin(), toks.begin(), toks.end());
        rec.pos.insert(rec.pos.begin(), tags.begin(), tags.end());
        for (auto& m : rec.percentages) m.token_index += pad;
        for (auto& w : wholes) {
          w.start += pad;
          w.end += pad;
        }
      }
      const int shift = std::max(pad, 0);
      for (std::size_t p = 0; p < rec.percentages.size(); ++p) {
        auto& m = rec.percentages[p];
        m.surface = rec.tokens[static_cast<std::size_t>(m.token_index)];
        if (rec.tokens[static_cast<std::size_t>(m.token_index)].back() != '%')
          m.surface += " " + rec.tokens[static_cast<std::size_t>(m.token_index) + 1];
        rec.facts.push_back({static_cast<int>(p), "part", part_start + shift, part_end + shift});
        rec.facts.push_back({static_cast<int>(p), "whole", wholes[p].start, wholes[p].end});
      }
      built = true;
    }
    if (!built)
      throw std::invalid_argument("synthetic: could not fit a sentence into the length range");
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

SyntheticStats synthetic_stats(const std::vector<SentenceRecord>& records) {
  SyntheticStats st;
  st.sentences = static_cast<int>(records.size());
  st.min_part_distance = std::numeric_limits<int>::max();
  for (const auto& r : records) {
    st.percentages += static_cast<int>(r.percentages.size());
    st.tokens += r.size();
    for (const auto& f : r.facts) {
      if (f.role != "part") continue;
      const int d = f.start - r.percentages[static_cast<std::size_t>(f.percentage)].token_index;
      st.min_part_distance = std::min(st.min_part_distance, d);
      st.max_part_distance = std::max(st.max_part_distance, d);
    }
  }
  if (st.min_part_distance == std::numeric_limits<int>::max()) st.min_part_distance = 0;
  if (st.sentences > 0) st.mean_length = static_cast<double>(st.tokens) / st.sentences;
  return st;
}

}  // namespace skiptag
