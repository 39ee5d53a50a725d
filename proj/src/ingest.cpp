// Dataset readers for MovieLens-100K, MovieLens-1M, BookCrossing and a
// generic CSV layout. Each reader produces RawRecords plus attribute tables;
// build_corpus() applies the shared rules (dense ids in first-appearance
// order, synthetic timestamps, duplicate resolution, rating-scale checks).

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <unordered_map>

#include <fmt/format.h>

#include "hybridrec/corpus.hpp"
#include "hybridrec/errors.hpp"

namespace hybridrec {
namespace {

namespace fs = std::filesystem;

struct RawRecord {
  std::string user;
  std::string item;
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;
  std::size_t line = 0;
};

using AttributeTable = std::unordered_map<std::string, AttributeMap>;

struct RawDataset {
  std::string source;
  std::vector<RawRecord> records;
  AttributeTable items;
  AttributeTable users;
  RatingScale scale;
};

std::string latin1_to_utf8(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (unsigned char c : in) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

// Delimited line with optional double-quoted fields. Inside quotes, "" and \"
// both denote a literal quote (BookCrossing uses the latter).
std::optional<std::vector<std::string>> split_quoted(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t n = 0; n < line.size(); ++n) {
    const char c = line[n];
    if (quoted) {
      if (c == '\\' && n + 1 < line.size() && line[n + 1] == '"' &&
          !(n + 2 == line.size() || line[n + 2] == delim)) {
        field.push_back('"');
        ++n;
      } else if (c == '"') {
        if (n + 1 < line.size() && line[n + 1] == '"') {
          field.push_back('"');
          ++n;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  out.push_back(std::move(field));
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedRecord(path.string(), 0, "cannot open file");
  return in;
}

// Reads every non-blank line of an optional metadata file.
template <class Fn>
void for_each_line(const fs::path& path, bool required, Fn&& fn) {
  if (!required && !fs::exists(path)) return;
  auto in = open_or_throw(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    fn(line, lineno);
  }
}

void put_if(AttributeMap& attrs, const std::string& key, std::string_view value) {
  value = trim(value);
  if (!value.empty() && value != "NULL") attrs[key] = std::string(value);
}

// ---------------------------------------------------------------------------
// MovieLens-100K

const std::vector<std::string>& ml100k_default_genres() {
  static const std::vector<std::string> genres = {
      "unknown", "Action",    "Adventure", "Animation", "Children's", "Comedy", "Crime",
      "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
      "Romance", "Sci-Fi",    "Thriller",  "War",       "Western"};
  return genres;
}

RawDataset read_ml100k(const fs::path& dir) {
  RawDataset ds;
  ds.scale = {1.0, 5.0};
  const auto data = dir / "u.data";
  ds.source = data.string();
  for_each_line(data, true, [&](const std::string& line, std::size_t lineno) {
    auto fields = split_on(trim(line), "\t");
    if (fields.size() != 4) {
      throw MalformedRecord(ds.source, lineno, "expected 4 tab-separated fields");
    }
    auto rating = parse_number<double>(fields[2]);
    auto ts = parse_number<std::int64_t>(fields[3]);
    if (!rating || !ts) throw MalformedRecord(ds.source, lineno, "non-numeric rating or timestamp");
    ds.records.push_back({std::string(trim(fields[0])), std::string(trim(fields[1])), rating, ts,
                          lineno});
  });

  auto genres = ml100k_default_genres();
  const auto genre_file = dir / "u.genre";
  if (fs::exists(genre_file)) {
    std::vector<std::string> named(genres.size());
    for_each_line(genre_file, false, [&](const std::string& line, std::size_t) {
      auto f = split_on(trim(line), "|");
      if (f.size() != 2) return;
      auto idx = parse_number<std::size_t>(f[1]);
      if (idx && *idx < named.size()) named[*idx] = f[0];
    });
    for (std::size_t g = 0; g < named.size(); ++g) {
      if (!named[g].empty()) genres[g] = named[g];
    }
  }

  const auto item_file = (dir / "u.item").string();
  for_each_line(dir / "u.item", false, [&](const std::string& raw, std::size_t lineno) {
    auto fields = split_on(latin1_to_utf8(trim(raw)), "|");
    if (fields.size() != 5 + genres.size()) {
      throw MalformedRecord(item_file, lineno, "expected 24 pipe-separated fields");
    }
    AttributeMap attrs;
    put_if(attrs, "Title", fields[1]);
    const auto date = trim(fields[2]);
    if (date.size() >= 4) put_if(attrs, "Year", date.substr(date.size() - 4));
    std::string joined;
    for (std::size_t g = 0; g < genres.size(); ++g) {
      if (trim(fields[5 + g]) == "1") {
        if (!joined.empty()) joined += ", ";
        joined += genres[g];
      }
    }
    put_if(attrs, "Genres", joined);
    ds.items[std::string(trim(fields[0]))] = std::move(attrs);
  });

  const auto user_file = (dir / "u.user").string();
  for_each_line(dir / "u.user", false, [&](const std::string& raw, std::size_t lineno) {
    auto fields = split_on(latin1_to_utf8(trim(raw)), "|");
    if (fields.size() != 5) throw MalformedRecord(user_file, lineno, "expected 5 fields");
    AttributeMap attrs;
    put_if(attrs, "Age", fields[1]);
    put_if(attrs, "Gender", fields[2]);
    put_if(attrs, "Occupation", fields[3]);
    put_if(attrs, "ZipCode", fields[4]);
    ds.users[std::string(trim(fields[0]))] = std::move(attrs);
  });
  return ds;
}

// ---------------------------------------------------------------------------
// MovieLens-1M

RawDataset read_ml1m(const fs::path& dir) {
  RawDataset ds;
  ds.scale = {1.0, 5.0};
  const auto data = dir / "ratings.dat";
  ds.source = data.string();
  for_each_line(data, true, [&](const std::string& line, std::size_t lineno) {
    auto fields = split_on(trim(line), "::");
    if (fields.size() != 4) throw MalformedRecord(ds.source, lineno, "expected 4 '::' fields");
    auto rating = parse_number<double>(fields[2]);
    auto ts = parse_number<std::int64_t>(fields[3]);
    if (!rating || !ts) throw MalformedRecord(ds.source, lineno, "non-numeric rating or timestamp");
    ds.records.push_back({fields[0], fields[1], rating, ts, lineno});
  });

  const auto movie_file = (dir / "movies.dat").string();
  for_each_line(dir / "movies.dat", false, [&](const std::string& raw, std::size_t lineno) {
    auto fields = split_on(latin1_to_utf8(trim(raw)), "::");
    if (fields.size() != 3) throw MalformedRecord(movie_file, lineno, "expected 3 '::' fields");
    AttributeMap attrs;
    put_if(attrs, "Title", fields[1]);
    const auto& title = attrs["Title"];
    if (title.size() >= 6 && title.back() == ')') {
      put_if(attrs, "Year", std::string_view(title).substr(title.size() - 5, 4));
    }
    std::string genres = fields[2];
    std::replace(genres.begin(), genres.end(), '|', ',');
    std::string spaced;
    for (char c : genres) {
      spaced.push_back(c);
      if (c == ',') spaced.push_back(' ');
    }
    put_if(attrs, "Genres", spaced);
    ds.items[fields[0]] = std::move(attrs);
  });

  const auto user_file = (dir / "users.dat").string();
  for_each_line(dir / "users.dat", false, [&](const std::string& raw, std::size_t lineno) {
    auto fields = split_on(latin1_to_utf8(trim(raw)), "::");
    if (fields.size() != 5) throw MalformedRecord(user_file, lineno, "expected 5 '::' fields");
    AttributeMap attrs;
    put_if(attrs, "Gender", fields[1]);
    put_if(attrs, "Age", fields[2]);
    put_if(attrs, "Occupation", fields[3]);
    put_if(attrs, "ZipCode", fields[4]);
    ds.users[fields[0]] = std::move(attrs);
  });
  return ds;
}

// ---------------------------------------------------------------------------
// BookCrossing

RawDataset read_bookcrossing(const fs::path& dir) {
  RawDataset ds;
  ds.scale = {1.0, 10.0};
  const auto data = dir / "BX-Book-Ratings.csv";
  ds.source = data.string();
  bool header = true;
  for_each_line(data, true, [&](const std::string& raw, std::size_t lineno) {
    if (header) {
      header = false;
      return;
    }
    auto fields = split_quoted(latin1_to_utf8(trim(raw)), ';');
    if (!fields || fields->size() != 3) {
      throw MalformedRecord(ds.source, lineno, "expected 3 quoted ';' fields");
    }
    auto rating = parse_number<double>((*fields)[2]);
    if (!rating) throw MalformedRecord(ds.source, lineno, "non-numeric rating");
    // 0 marks an implicit interaction without an explicit rating.
    if (*rating == 0.0) return;
    ds.records.push_back({(*fields)[0], (*fields)[1], rating, std::nullopt, lineno});
  });

  const auto book_file = (dir / "BX-Books.csv").string();
  header = true;
  for_each_line(dir / "BX-Books.csv", false, [&](const std::string& raw, std::size_t lineno) {
    if (header) {
      header = false;
      return;
    }
    auto fields = split_quoted(latin1_to_utf8(trim(raw)), ';');
    if (!fields || fields->size() < 5) {
      throw MalformedRecord(book_file, lineno, "expected at least 5 quoted ';' fields");
    }
    AttributeMap attrs;
    put_if(attrs, "Title", (*fields)[1]);
    put_if(attrs, "Author", (*fields)[2]);
    if ((*fields)[3] != "0") put_if(attrs, "Year", (*fields)[3]);
    put_if(attrs, "Publisher", (*fields)[4]);
    ds.items[(*fields)[0]] = std::move(attrs);
  });

  const auto user_file = (dir / "BX-Users.csv").string();
  header = true;
  for_each_line(dir / "BX-Users.csv", false, [&](const std::string& raw, std::size_t lineno) {
    if (header) {
      header = false;
      return;
    }
    auto fields = split_quoted(latin1_to_utf8(trim(raw)), ';');
    if (!fields || fields->size() != 3) {
      throw MalformedRecord(user_file, lineno, "expected 3 quoted ';' fields");
    }
    AttributeMap attrs;
    put_if(attrs, "Location", (*fields)[1]);
    put_if(attrs, "Age", (*fields)[2]);
    ds.users[(*fields)[0]] = std::move(attrs);
  });
  return ds;
}

// ---------------------------------------------------------------------------
// GenericCSV: header names the columns; user and item are required.

RawDataset read_generic_csv(const fs::path& file) {
  RawDataset ds;
  ds.source = file.string();
  std::optional<std::size_t> user_col, item_col, rating_col, ts_col;
  std::size_t n_cols = 0;
  bool header = true;
  for_each_line(file, true, [&](const std::string& raw, std::size_t lineno) {
    auto fields = split_quoted(trim(raw), ',');
    if (!fields) throw MalformedRecord(ds.source, lineno, "unterminated quote");
    if (header) {
      header = false;
      n_cols = fields->size();
      for (std::size_t c = 0; c < fields->size(); ++c) {
        const auto name = std::string(trim((*fields)[c]));
        if (name == "user") user_col = c;
        else if (name == "item") item_col = c;
        else if (name == "rating") rating_col = c;
        else if (name == "timestamp") ts_col = c;
      }
      if (!user_col || !item_col) {
        throw MalformedRecord(ds.source, lineno, "header must name 'user' and 'item' columns");
      }
      return;
    }
    if (fields->size() != n_cols) {
      throw MalformedRecord(ds.source, lineno,
                            fmt::format("expected {} fields, got {}", n_cols, fields->size()));
    }
    RawRecord rec;
    rec.line = lineno;
    rec.user = std::string(trim((*fields)[*user_col]));
    rec.item = std::string(trim((*fields)[*item_col]));
    if (rec.user.empty() || rec.item.empty()) {
      throw MalformedRecord(ds.source, lineno, "empty user or item");
    }
    if (rating_col && !trim((*fields)[*rating_col]).empty()) {
      rec.rating = parse_number<double>((*fields)[*rating_col]);
      if (!rec.rating) throw MalformedRecord(ds.source, lineno, "non-numeric rating");
    }
    if (ts_col && !trim((*fields)[*ts_col]).empty()) {
      rec.timestamp = parse_number<std::int64_t>((*fields)[*ts_col]);
      if (!rec.timestamp) throw MalformedRecord(ds.source, lineno, "non-integer timestamp");
    }
    ds.records.push_back(std::move(rec));
  });

  // The scale is the observed rating range.
  bool any = false;
  for (const auto& r : ds.records) {
    if (!r.rating) continue;
    if (!any) {
      ds.scale = {*r.rating, *r.rating};
      any = true;
    }
    ds.scale.min = std::min(ds.scale.min, *r.rating);
    ds.scale.max = std::max(ds.scale.max, *r.rating);
  }
  return ds;
}

// ---------------------------------------------------------------------------

Corpus build_corpus(RawDataset ds) {
  if (ds.records.empty()) throw MalformedRecord(ds.source, 0, "zero records");

  std::unordered_map<std::string, std::uint32_t> user_ids, item_ids;
  std::vector<std::string> user_keys, item_keys;
  auto intern = [](auto& ids, auto& keys, const std::string& key) {
    auto [it, inserted] = ids.try_emplace(key, static_cast<std::uint32_t>(keys.size()));
    if (inserted) keys.push_back(key);
    return it->second;
  };

  std::vector<std::int64_t> next_synthetic;
  std::vector<Interaction> all;
  all.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    const auto u = intern(user_ids, user_keys, r.user);
    const auto i = intern(item_ids, item_keys, r.item);
    if (next_synthetic.size() <= u) next_synthetic.resize(u + 1, 0);
    const auto ts = r.timestamp ? *r.timestamp : next_synthetic[u];
    ++next_synthetic[u];
    if (r.rating && !ds.scale.contains(*r.rating)) {
      throw MalformedRecord(ds.source, r.line,
                            fmt::format("rating {} outside scale [{}, {}]", *r.rating,
                                        ds.scale.min, ds.scale.max));
    }
    all.push_back({UserId(u), ItemId(i), r.rating, ts});
  }

  // Duplicate (user, item): keep the largest timestamp; ties go to the later line.
  std::unordered_map<std::uint64_t, std::size_t> kept_at;
  std::vector<bool> keep(all.size(), true);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto key = (static_cast<std::uint64_t>(all[n].user.value) << 32) | all[n].item.value;
    auto [it, inserted] = kept_at.try_emplace(key, n);
    if (inserted) continue;
    if (all[n].timestamp >= all[it->second].timestamp) {
      keep[it->second] = false;
      it->second = n;
    } else {
      keep[n] = false;
    }
  }
  std::vector<Interaction> interactions;
  interactions.reserve(kept_at.size());
  for (std::size_t n = 0; n < all.size(); ++n) {
    if (keep[n]) interactions.push_back(all[n]);
  }

  Catalog catalog;
  catalog.items.resize(item_keys.size());
  catalog.users.resize(user_keys.size());
  for (std::size_t i = 0; i < item_keys.size(); ++i) {
    if (auto it = ds.items.find(item_keys[i]); it != ds.items.end()) catalog.items[i] = it->second;
  }
  for (std::size_t u = 0; u < user_keys.size(); ++u) {
    if (auto it = ds.users.find(user_keys[u]); it != ds.users.end()) catalog.users[u] = it->second;
  }
  return Corpus(std::move(interactions), std::move(catalog), ds.scale, std::move(user_keys),
                std::move(item_keys));
}

}  // namespace

Corpus ingest(const std::filesystem::path& path, DatasetFormat format) {
  if (fs::is_directory(path) && fs::is_empty(path)) {
    throw EmptyCorpus("directory " + path.string() + " is empty");
  }
  switch (format) {
    case DatasetFormat::MovieLens100K: return build_corpus(read_ml100k(path));
    case DatasetFormat::MovieLens1M: return build_corpus(read_ml1m(path));
    case DatasetFormat::BookCrossing: return build_corpus(read_bookcrossing(path));
    case DatasetFormat::GenericCSV: return build_corpus(read_generic_csv(path));
  }
  throw UnknownFormat("unhandled dataset format");
}

}  // namespace hybridrec
