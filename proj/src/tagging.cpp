#include "skiptag/tagging.hpp"

#include <algorithm>

namespace skiptag {

Tag Tag::parse(std::string_view text) {
  if (text == "O") return {};
  if (text.size() < 3 || text[1] != '-' ||
      std::string_view("BILU").find(text[0]) == std::string_view::npos)
    throw TagError("malformed BIOUL tag '" + std::string(text) + "'", -1);
  return {text[0], std::string(text.substr(2))};
}

std::string Tag::str() const {
  if (prefix == 'O') return "O";
  return std::string(1, prefix) + "-" + role;
}

TagSet::TagSet(std::vector<std::string> roles) : roles_(std::move(roles)) {
  names_.push_back("O");
  for (const auto& r : roles_)
    for (char p : {'B', 'I', 'L', 'U'}) names_.push_back(std::string(1, p) + "-" + r);
}

std::optional<int> TagSet::find(std::string_view tag) const {
  auto it = std::find(names_.begin(), names_.end(), tag);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int TagSet::id(std::string_view tag) const {
  if (auto found = find(tag)) return *found;
  throw TagError("tag '" + std::string(tag) + "' is not in the tag set", -1);
}

std::vector<int> TagSet::ids(const TagSequence& tags) const {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(id(t));
  return out;
}

TagSequence TagSet::names_of(const std::vector<int>& ids) const {
  TagSequence out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(name(i));
  return out;
}

bool TagSet::allowed(int from, int to) const {
  const bool from_open = from >= 0 && (name(from)[0] == 'B' || name(from)[0] == 'I');
  if (to < 0) return !from_open;
  const Tag next = Tag::parse(name(to));
  const bool continues = next.prefix == 'I' || next.prefix == 'L';
  if (!from_open) return !continues;
  return continues && Tag::parse(name(from)).role == next.role;
}

TagSequence encode(std::vector<Span> spans, int length) {
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  TagSequence tags(static_cast<std::size_t>(length), "O");
  int last_end = 0;
  for (const auto& s : spans) {
    if (s.start < 0 || s.end > length || s.start >= s.end)
      throw TagError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                         ") invalid for length " + std::to_string(length),
                     s.start);
    if (s.start < last_end)
      throw TagError("span starting at " + std::to_string(s.start) + " overlaps", s.start);
    last_end = s.end;
    if (s.end - s.start == 1) {
      tags[static_cast<std::size_t>(s.start)] = "U-" + s.role;
      continue;
    }
    tags[static_cast<std::size_t>(s.start)] = "B-" + s.role;
    for (int i = s.start + 1; i < s.end - 1; ++i) tags[static_cast<std::size_t>(i)] = "I-" + s.role;
    tags[static_cast<std::size_t>(s.end - 1)] = "L-" + s.role;
  }
  return tags;
}

std::vector<Span> decode(const TagSequence& tags, DecodeMode mode) {
  std::vector<Span> spans;
  std::optional<Span> open;
  const int n = static_cast<int>(tags.size());
  auto fail = [](const std::string& why, int i) -> void {
    throw TagError("invalid BIOUL sequence at index " + std::to_string(i) + ": " + why, i);
  };
  for (int i = 0; i < n; ++i) {
    Tag tag;
    try {
      tag = Tag::parse(tags[static_cast<std::size_t>(i)]);
    } catch (const TagError& e) {
      throw TagError(std::string(e.what()) + " at index " + std::to_string(i), i);
    }
    const bool continues = open && open->role == tag.role && (tag.prefix == 'I' || tag.prefix == 'L');
    if (open && !continues) {
      if (mode == DecodeMode::strict) fail("span of role '" + open->role + "' not closed", i);
      spans.push_back(*open);
      open.reset();
    }
    switch (tag.prefix) {
      case 'O':
        break;
      case 'U':
        spans.push_back({tag.role, i, i + 1});
        break;
      case 'B':
        open = Span{tag.role, i, i + 1};
        break;
      case 'I':
      case 'L':
        if (!continues) {
          if (mode == DecodeMode::strict) fail("'" + tag.str() + "' without an open span", i);
          open = Span{tag.role, i, i + 1};
        }
        open->end = i + 1;
        if (tag.prefix == 'L') {
          spans.push_back(*open);
          open.reset();
        }
        break;
    }
  }
  if (open) {
    if (mode == DecodeMode::strict) fail("span of role '" + open->role + "' not closed", n);
    spans.push_back(*open);
  }
  return spans;
}

TagSequence gap_fill(const TagSequence& compressed, const std::vector<int>& origin_positions,
                     int length) {
  if (compressed.size() != origin_positions.size())
    throw std::invalid_argument("gap_fill: tags and origin positions differ in length");
  TagSequence out(static_cast<std::size_t>(length), "O");
  for (std::size_t k = 0; k < origin_positions.size(); ++k) {
    const int p = origin_positions[k];
    if (p < 0 || p >= length || (k > 0 && p <= origin_positions[k - 1]))
      throw std::invalid_argument("gap_fill: origin positions must be strictly increasing in [0," +
                                  std::to_string(length) + ")");
    out[static_cast<std::size_t>(p)] = compressed[k];
  }
  // Each gap between consecutive remained tokens gets filled as a unit.
  for (std::size_t k = 0; k + 1 < origin_positions.size(); ++k) {
    const int left = origin_positions[k];
    const int right = origin_positions[k + 1];
    if (right - left < 2) continue;
    const Tag l = Tag::parse(compressed[k]);
    const Tag r = Tag::parse(compressed[k + 1]);
    const bool inside = l.role == r.role && (l.prefix == 'B' || l.prefix == 'I') &&
                        (r.prefix == 'I' || r.prefix == 'L');
    if (!inside) continue;
    for (int p = left + 1; p < right; ++p) out[static_cast<std::size_t>(p)] = "I-" + l.role;
  }
  return out;
}

}  // namespace skiptag
