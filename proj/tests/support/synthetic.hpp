#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hybridrec/corpus.hpp"
#include "hybridrec/llmlink.hpp"

namespace hybridrec::testing {

struct SyntheticOptions {
  std::size_t n_users = 200;
  std::size_t n_items = 100;
  std::size_t rank = 4;
  std::size_t positives_per_user = 20;
  /// Multiplies the latent scores before the Gumbel perturbation.
  double signal = 2.0;
  std::uint64_t seed = 2024;
};

/// Low-rank preference world: score(u, i) = signal * p_u . q_i / sqrt(rank)
/// with Gaussian factors. Each user's positives are a Gumbel top-k draw over
/// those scores; ratings are the rounded score shifted to the 1..5 scale and
/// timestamps are a random permutation per user.
struct SyntheticWorld {
  Corpus corpus;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<double> truth;  // row-major n_users x n_items

  [[nodiscard]] double score(UserId u, ItemId i) const {
    return truth[u.index() * n_items + i.index()];
  }
};

SyntheticWorld make_synthetic(const SyntheticOptions& options = {});

/// Keeps a seeded random subset of `per_user` interactions for every user.
Corpus sparsify(const Corpus& corpus, std::size_t per_user, std::uint64_t seed);

/// Mock oracle whose preferences are the latent scores for every pair.
MockOracle truth_oracle(const SyntheticWorld& world);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hybridrec");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

/// ML-100K directory from HYBRIDREC_ML100K_DIR (environment first, then the
/// build-time default). Empty when neither points at a u.data file.
std::filesystem::path ml100k_dir();

}  // namespace hybridrec::testing
