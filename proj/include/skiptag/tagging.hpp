#pragma once

// BIOUL span codec and the decode-time gap filling for skipped tokens.

#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skiptag {

struct Span {
  std::string role;
  int start = 0;  // inclusive
  int end = 0;    // exclusive

  auto operator<=>(const Span&) const = default;
};

using TagSequence = std::vector<std::string>;

class TagError : public std::invalid_argument {
 public:
  TagError(const std::string& what, int index) : std::invalid_argument(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

// A parsed BIOUL tag. prefix is one of 'O', 'B', 'I', 'L', 'U'.
struct Tag {
  char prefix = 'O';
  std::string role;

  static Tag parse(std::string_view text);
  std::string str() const;
  bool is_entity() const { return prefix != 'O'; }
};

// Dense tag ids: 0 is O, then B/I/L/U for each role in declaration order.
class TagSet {
 public:
  TagSet() = default;
  explicit TagSet(std::vector<std::string> roles);

  int size() const { return static_cast<int>(names_.size()); }
  int id(std::string_view tag) const;
  std::optional<int> find(std::string_view tag) const;
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& roles() const { return roles_; }
  // Membership in the entity-tag set (every tag except O).
  bool is_entity(int id) const { return id != 0; }

  std::vector<int> ids(const TagSequence& tags) const;
  TagSequence names_of(const std::vector<int>& ids) const;

  // Whether tag `to` may follow `from` under BIOUL; -1 stands for the sequence boundary.
  bool allowed(int from, int to) const;

  bool operator==(const TagSet&) const = default;

 private:
  std::vector<std::string> roles_;
  std::vector<std::string> names_;
};

// Throws TagError on overlapping or out-of-range spans.
TagSequence encode(std::vector<Span> spans, int length);

enum class DecodeMode { strict, lenient };

// Strict mode throws TagError naming the first offending index. Lenient
// mode follows conlleval chunking: a chunk opens at B/U or at an I/L that
// does not continue an open chunk of the same role, and closes after L/U.
std::vector<Span> decode(const TagSequence& tags, DecodeMode mode);

// Scatters tags predicted on remained tokens back to a full sentence of
// `length` tokens. A skipped token becomes I-x when its nearest remained
// neighbours are the same role x, the left one B-x or I-x and the right one
// I-x or L-x; every other skipped token becomes O.
TagSequence gap_fill(const TagSequence& compressed, const std::vector<int>& origin_positions,
                     int length);

}  // namespace skiptag
