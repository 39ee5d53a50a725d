#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

#include "hybridrec/errors.hpp"
#include "hybridrec/llmlink.hpp"

namespace hybridrec {
namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string normalize_title(std::string_view title) {
  std::string out;
  out.reserve(title.size());
  bool pending_space = false;
  for (unsigned char c : title) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  return out;
}

std::vector<ItemId> parse_ranked_list(std::string_view response,
                                      std::span<const TitledItem> candidates) {
  if (candidates.empty()) throw ArgumentError("parse_ranked_list needs candidates");
  std::vector<std::string> keys;
  keys.reserve(candidates.size());
  for (const auto& c : candidates) keys.push_back(normalize_title(c.title));

  std::vector<bool> used(candidates.size(), false);
  std::vector<ItemId> order;
  std::size_t start = 0;
  while (start <= response.size()) {
    auto end = response.find(';', start);
    if (end == std::string_view::npos) end = response.size();
    const auto token = normalize_title(response.substr(start, end - start));
    start = end + 1;
    if (token.empty()) continue;
    // Duplicate titles among candidates resolve to the first unused one.
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (!used[k] && keys[k] == token) {
        used[k] = true;
        order.push_back(candidates[k].item);
        break;
      }
    }
  }
  if (order.empty()) throw Unparseable("no candidate title found in the ranked-list response");
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!used[k]) order.push_back(candidates[k].item);
  }
  return order;
}

double parse_rating(std::string_view response, RatingScale scale) {
  static const std::regex number(R"([-+]?(\d+(\.\d*)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(response.begin(), response.end(), m, number)) {
    throw Unparseable("no numeric token in rating response");
  }
  std::string token = m.str();
  if (token.front() == '+') token.erase(0, 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc()) throw Unparseable("numeric token '" + token + "' out of range");
  return scale.clip(value);
}

std::pair<ItemId, ItemId> parse_pair_preference(std::string_view response, const TitledItem& a,
                                                const TitledItem& b) {
  const auto ka = normalize_title(a.title);
  const auto kb = normalize_title(b.title);
  if (ka == kb) throw ArgumentError("pair titles must be distinct");
  const auto text = normalize_title(response);
  const auto pa = text.find(ka);
  const auto pb = text.find(kb);
  if (pa == std::string::npos && pb == std::string::npos) {
    throw Unparseable("neither pair title appears in the response");
  }
  bool a_first = false;
  if (pb == std::string::npos) {
    a_first = true;
  } else if (pa == std::string::npos) {
    a_first = false;
  } else if (pa != pb) {
    a_first = pa < pb;
  } else {
    // One title is a prefix of the other; the longer one is what was written.
    a_first = ka.size() > kb.size();
  }
  return a_first ? std::pair{a.item, b.item} : std::pair{b.item, a.item};
}

AttributeMap parse_attributes(std::string_view response,
                              std::span<const std::string> expected_keys) {
  if (expected_keys.empty()) throw ArgumentError("parse_attributes needs expected keys");
  AttributeMap out;
  std::size_t start = 0;
  while (start < response.size()) {
    auto end = response.find('\n', start);
    if (end == std::string_view::npos) end = response.size();
    const auto line = response.substr(start, end - start);
    start = end + 1;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const std::string key(trim(line.substr(0, colon)));
    const std::string value(trim(line.substr(colon + 1)));
    if (value.empty() || out.contains(key)) continue;
    if (std::find(expected_keys.begin(), expected_keys.end(), key) != expected_keys.end()) {
      out.emplace(key, value);
    }
  }
  if (out.empty()) throw Unparseable("no expected attribute found in the response");
  return out;
}

}  // namespace hybridrec
