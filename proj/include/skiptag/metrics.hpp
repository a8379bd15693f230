#pragma once

// Entity-level precision/recall/F1 and skip statistics.

#include "skiptag/layers.hpp"
#include "skiptag/tagging.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace skiptag {

struct Counts {
  long gold = 0;
  long predicted = 0;
  long correct = 0;

  // 0/0 is reported as 0.
  double precision() const { return predicted == 0 ? 0.0 : static_cast<double>(correct) / predicted; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(correct) / gold; }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct RankedToken {
  std::string token;
  double score = 0.0;
  long skips = 0;
  long frequency = 0;
};

struct SkipStats {
  long tokens_skipped = 0;
  long entity_tokens_skipped = 0;
  long total_tokens = 0;
  long sequences = 0;
  std::map<std::string, long> skip_counts;
  std::map<std::string, long> frequencies;

  double mean_skipped_per_sequence() const {
    return sequences == 0 ? 0.0 : static_cast<double>(tokens_skipped) / sequences;
  }
};

struct EvalReport {
  Counts overall;
  std::map<std::string, Counts> per_role;
  std::optional<SkipStats> skips;
};

// Exact (role, start, end) matching, micro-averaged over instances.
EvalReport span_f1(const std::vector<std::vector<Span>>& gold,
                   const std::vector<std::vector<Span>>& predicted);

// A token is skipped when either direction skipped it.
SkipStats skip_stats(const std::vector<GateTrace>& traces, const std::vector<TagSequence>& golds,
                     const std::vector<std::vector<std::string>>& tokens);

// score(w) = skips(w) / ln(freq(w)), descending, ties by token. Tokens with
// frequency 1 have no score and are left out.
std::vector<RankedToken> rank_skipped_tokens(const std::map<std::string, long>& skip_counts,
                                             const std::map<std::string, long>& frequencies);

std::string format_report(const EvalReport& report, std::size_t top_tokens = 10);
std::string report_json(const EvalReport& report, std::size_t top_tokens = 10);

}  // namespace skiptag
