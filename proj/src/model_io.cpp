// Binary model files:
//
//   "HRMODEL\0" | u32 version | u8 kind | id maps | kind-specific payload
//
// All integers are little-endian, doubles are their IEEE-754 bit patterns as
// u64, strings are u32 length + bytes.

#include <bit>
#include <fstream>
#include <iterator>
#include <optional>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {
namespace {

constexpr char kMagic[8] = {'H', 'R', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  void flags(const std::vector<bool>& v) {
    u64(v.size());
    for (bool b : v) u8(b ? 1 : 0);
  }
  void header(ModelKind kind, const IdMaps& ids) {
    buf_.append(kMagic, sizeof kMagic);
    u32(kVersion);
    u8(static_cast<std::uint8_t>(kind));
    u64(ids.users.size());
    for (const auto& s : ids.users) str(s);
    u64(ids.items.size());
    for (const auto& s : ids.items) str(s);
  }
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed for " + path.string());
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  ModelKind header(IdMaps* ids) {
    need(sizeof kMagic);
    if (!std::equal(kMagic, kMagic + sizeof kMagic, buf_.begin())) fail("bad magic");
    pos_ += sizeof kMagic;
    const auto version = u32();
    if (version != kVersion) fail(fmt::format("unsupported version {}", version));
    const auto kind = u8();
    if (kind < 1 || kind > 3) fail(fmt::format("unknown model kind {}", kind));
    IdMaps maps;
    maps.users.resize(count(4));
    for (auto& s : maps.users) s = str();
    maps.items.resize(count(4));
    for (auto& s : maps.items) s = str();
    ids_sizes_ = {maps.users.size(), maps.items.size()};
    if (ids) *ids = std::move(maps);
    return static_cast<ModelKind>(kind);
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  // Element count that must fit in the remaining bytes at `min_bytes` each.
  std::size_t count(std::size_t min_bytes) {
    const auto n = u64();
    if (min_bytes > 0 && n > (buf_.size() - pos_) / min_bytes) fail("element count exceeds file size");
    return static_cast<std::size_t>(n);
  }
  std::vector<double> doubles() {
    std::vector<double> v(count(8));
    for (auto& d : v) d = f64();
    return v;
  }
  std::vector<bool> flags() {
    std::vector<bool> v(count(1));
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = u8() != 0;
    return v;
  }
  void finish() const {
    if (pos_ != buf_.size()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ModelFormatError(path_ + ": " + why);
  }
  void expect_kind(ModelKind got, ModelKind want) const {
    if (got != want) {
      fail(fmt::format("model kind {} where {} was expected", static_cast<int>(got),
                       static_cast<int>(want)));
    }
  }
  /// `users` is empty for models without a user dimension.
  void check_ids(std::optional<std::size_t> users, std::size_t items) const {
    const bool users_ok = !users || ids_sizes_.first == 0 || ids_sizes_.first == *users;
    const bool items_ok = ids_sizes_.second == 0 || ids_sizes_.second == items;
    if (!users_ok || !items_ok) fail("id maps do not match parameter shapes");
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated");
  }

  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
  std::pair<std::size_t, std::size_t> ids_sizes_{0, 0};
};

void write_mf(Writer& w, const MFModel& m) {
  w.u64(m.n_users());
  w.u64(m.n_items());
  w.u64(m.dimension());
  w.doubles(m.user_parameters());
  w.doubles(m.item_parameters());
}

MFModel read_mf(Reader& r) {
  const auto n_users = r.u64();
  const auto n_items = r.u64();
  const auto dim = r.u64();
  auto users = r.doubles();
  auto items = r.doubles();
  if (users.size() != n_users * dim || items.size() != n_items * dim) {
    r.fail("embedding table sizes do not match the declared shape");
  }
  MFModel m(n_users, n_items, dim);
  m.user_parameters() = std::move(users);
  m.item_parameters() = std::move(items);
  return m;
}

}  // namespace

void save_model(const MFModel& model, const IdMaps& ids, const std::filesystem::path& path) {
  Writer w;
  w.header(ModelKind::MfBpr, ids);
  write_mf(w, model);
  w.save(path);
}

void save_model(const RatingModel& model, const IdMaps& ids, const std::filesystem::path& path) {
  Writer w;
  w.header(ModelKind::RatingMf, ids);
  w.f64(model.scale.min);
  w.f64(model.scale.max);
  w.f64(model.global_mean);
  w.doubles(model.user_bias);
  w.doubles(model.item_bias);
  w.flags(model.user_seen);
  w.flags(model.item_seen);
  write_mf(w, model.factors);
  w.save(path);
}

void save_model(const MarkovSequentialModel& model, const IdMaps& ids,
                const std::filesystem::path& path) {
  Writer w;
  w.header(ModelKind::Markov, ids);
  w.u64(model.n_items());
  for (std::size_t i = 0; i < model.n_items(); ++i) w.u64(model.popularity(ItemId(i)));
  w.u64(model.transitions().size());
  for (const auto& [pair, n] : model.transitions()) {
    w.u32(pair.first);
    w.u32(pair.second);
    w.u64(n);
  }
  w.save(path);
}

ModelKind peek_model_kind(const std::filesystem::path& path) {
  Reader r(path);
  return r.header(nullptr);
}

MFModel load_mf_model(const std::filesystem::path& path, IdMaps* ids) {
  Reader r(path);
  r.expect_kind(r.header(ids), ModelKind::MfBpr);
  auto m = read_mf(r);
  r.check_ids(m.n_users(), m.n_items());
  r.finish();
  return m;
}

RatingModel load_rating_model(const std::filesystem::path& path, IdMaps* ids) {
  Reader r(path);
  r.expect_kind(r.header(ids), ModelKind::RatingMf);
  RatingModel m;
  m.scale.min = r.f64();
  m.scale.max = r.f64();
  m.global_mean = r.f64();
  m.user_bias = r.doubles();
  m.item_bias = r.doubles();
  m.user_seen = r.flags();
  m.item_seen = r.flags();
  m.factors = read_mf(r);
  if (m.user_seen.size() != m.user_bias.size() || m.item_seen.size() != m.item_bias.size() ||
      m.factors.n_users() != m.user_bias.size() || m.factors.n_items() != m.item_bias.size()) {
    r.fail("rating model tables disagree on shape");
  }
  r.check_ids(m.n_users(), m.n_items());
  r.finish();
  return m;
}

MarkovSequentialModel load_markov_model(const std::filesystem::path& path, IdMaps* ids) {
  Reader r(path);
  r.expect_kind(r.header(ids), ModelKind::Markov);
  const auto n_items = r.count(8);
  MarkovSequentialModel m(n_items);
  for (std::size_t i = 0; i < n_items; ++i) m.set_popularity(ItemId(i), r.u64());
  const auto n_transitions = r.count(16);
  for (std::size_t k = 0; k < n_transitions; ++k) {
    const auto from = r.u32();
    const auto to = r.u32();
    const auto n = r.u64();
    if (from >= n_items || to >= n_items) r.fail("transition endpoint out of range");
    m.add_transition(ItemId(from), ItemId(to), n);
  }
  r.check_ids(std::nullopt, n_items);
  r.finish();
  return m;
}

}  // namespace hybridrec
