#include "skiptag/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace skiptag {

EvalReport span_f1(const std::vector<std::vector<Span>>& gold,
                   const std::vector<std::vector<Span>>& predicted) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("span_f1: " + std::to_string(gold.size()) + " gold and " +
                                std::to_string(predicted.size()) + " predicted instances");
  EvalReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<Span> g(gold[i].begin(), gold[i].end());
    const std::set<Span> p(predicted[i].begin(), predicted[i].end());
    for (const auto& s : g) {
      ++r.overall.gold;
      ++r.per_role[s.role].gold;
      if (p.contains(s)) {
        ++r.overall.correct;
        ++r.per_role[s.role].correct;
      }
    }
    for (const auto& s : p) {
      ++r.overall.predicted;
      ++r.per_role[s.role].predicted;
    }
  }
  return r;
}

SkipStats skip_stats(const std::vector<GateTrace>& traces, const std::vector<TagSequence>& golds,
                     const std::vector<std::vector<std::string>>& tokens) {
  if (traces.size() != golds.size() || traces.size() != tokens.size())
    throw std::invalid_argument("skip_stats: traces, gold tags and tokens are misaligned");
  SkipStats st;
  st.sequences = static_cast<long>(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& tr = traces[i];
    if (static_cast<std::size_t>(tr.size()) != golds[i].size() ||
        golds[i].size() != tokens[i].size())
      throw std::invalid_argument("skip_stats: length mismatch in sequence " + std::to_string(i));
    for (int t = 0; t < tr.size(); ++t) {
      const auto at = static_cast<std::size_t>(t);
      ++st.total_tokens;
      ++st.frequencies[tokens[i][at]];
      if (tr.remained(t)) continue;
      ++st.tokens_skipped;
      ++st.skip_counts[tokens[i][at]];
      if (golds[i][at] != "O") ++st.entity_tokens_skipped;
    }
  }
  return st;
}

std::vector<RankedToken> rank_skipped_tokens(const std::map<std::string, long>& skip_counts,
                                             const std::map<std::string, long>& frequencies) {
  std::vector<RankedToken> out;
  for (const auto& [token, freq] : frequencies) {
    if (freq < 2) continue;
    const auto it = skip_counts.find(token);
    const long skips = it == skip_counts.end() ? 0 : it->second;
    out.push_back({token, static_cast<double>(skips) / std::log(static_cast<double>(freq)), skips,
                   freq});
  }
  std::sort(out.begin(), out.end(), [](const RankedToken& a, const RankedToken& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  return out;
}

namespace {

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x;
  return os.str();
}

nlohmann::json counts_json(const Counts& c) {
  return {{"gold", c.gold},           {"predicted", c.predicted}, {"correct", c.correct},
          {"precision", c.precision()}, {"recall", c.recall()},     {"f1", c.f1()}};
}

}  // namespace

std::string format_report(const EvalReport& report, std::size_t top_tokens) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "role" << std::right << std::setw(8) << "P" << std::setw(8)
     << "R" << std::setw(8) << "F1" << std::setw(8) << "gold" << std::setw(8) << "pred"
     << std::setw(8) << "correct" << '\n';
  auto row = [&](const std::string& name, const Counts& c) {
    os << std::left << std::setw(10) << name << std::right << std::setw(8) << pct(c.precision())
       << std::setw(8) << pct(c.recall()) << std::setw(8) << pct(c.f1()) << std::setw(8) << c.gold
       << std::setw(8) << c.predicted << std::setw(8) << c.correct << '\n';
  };
  row("overall", report.overall);
  for (const auto& [role, c] : report.per_role) row(role, c);
  if (report.skips) {
    const auto& s = *report.skips;
    os << "skipped tokens: " << s.tokens_skipped << " (entity " << s.entity_tokens_skipped
       << ") of " << s.total_tokens << " over " << s.sequences << " sequences\n";
    const auto ranked = rank_skipped_tokens(s.skip_counts, s.frequencies);
    os << "most skipped:";
    std::size_t shown = 0;
    for (const auto& r : ranked) {
      if (shown == top_tokens || r.skips == 0) break;
      os << ' ' << r.token;
      ++shown;
    }
    os << '\n';
  }
  return os.str();
}

std::string report_json(const EvalReport& report, std::size_t top_tokens) {
  nlohmann::json j;
  j["overall"] = counts_json(report.overall);
  j["per_role"] = nlohmann::json::object();
  for (const auto& [role, c] : report.per_role) j["per_role"][role] = counts_json(c);
  if (report.skips) {
    const auto& s = *report.skips;
    nlohmann::json ranked = nlohmann::json::array();
    for (const auto& r : rank_skipped_tokens(s.skip_counts, s.frequencies)) {
      if (ranked.size() == top_tokens || r.skips == 0) break;
      ranked.push_back({{"token", r.token}, {"score", r.score}, {"skips", r.skips},
                        {"frequency", r.frequency}});
    }
    j["skips"] = {{"tokens_skipped", s.tokens_skipped},
                  {"entity_tokens_skipped", s.entity_tokens_skipped},
                  {"total_tokens", s.total_tokens},
                  {"sequences", s.sequences},
                  {"mean_skipped_per_sequence", s.mean_skipped_per_sequence()},
                  {"top_skipped", ranked}};
  }
  return j.dump(2);
}

}  // namespace skiptag
