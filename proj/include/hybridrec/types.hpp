#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

namespace hybridrec {

/// Dense 0-based identifier. The tag keeps user and item ids from mixing.
template <class Tag>
struct DenseId {
  std::uint32_t value = 0;

  constexpr DenseId() = default;
  constexpr explicit DenseId(std::uint32_t v) : value(v) {}
  constexpr explicit DenseId(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
  constexpr explicit DenseId(int v) : value(static_cast<std::uint32_t>(v)) {}

  [[nodiscard]] constexpr std::size_t index() const { return value; }

  constexpr auto operator<=>(const DenseId&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, DenseId<Tag> id) {
  return os << id.value;
}

struct UserTag {};
struct ItemTag {};

using UserId = DenseId<UserTag>;
using ItemId = DenseId<ItemTag>;

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  [[nodiscard]] double clip(double r) const { return r < min ? min : (r > max ? max : r); }
  [[nodiscard]] bool contains(double r) const { return r >= min && r <= max; }
  bool operator==(const RatingScale&) const = default;
};

}  // namespace hybridrec

template <class Tag>
struct std::hash<hybridrec::DenseId<Tag>> {
  std::size_t operator()(hybridrec::DenseId<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
