#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "abx/corpus.hpp"
#include "abx/embedding_store.hpp"

namespace abx::testing {

// Fresh directory under the system temp dir, removed on destruction.
class temp_dir {
 public:
  explicit temp_dir(const std::string& tag = "abx");
  ~temp_dir();
  temp_dir(const temp_dir&) = delete;
  temp_dir& operator=(const temp_dir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

using meaning_lists = std::map<std::string, std::vector<meaning_id>>;
// (checkpoint, layer, language, meaning) -> row
using vector_fn = std::function<std::vector<float>(std::int64_t, int, const std::string&, meaning_id)>;

struct store_spec {
  meaning_lists meanings;
  std::vector<std::int64_t> checkpoints = {0};
  std::vector<int> layers = {0};
  std::size_t dim = 8;
};

// Writes one EMBX file per (checkpoint, layer, language) plus manifest.json
// and returns the manifest path.
std::filesystem::path write_store(const std::filesystem::path& dir, const store_spec& spec, const vector_fn& fn);

// Deterministic i.i.d. Gaussian rows keyed on (seed, checkpoint, layer, language, meaning).
vector_fn gaussian_vectors(std::uint64_t seed, std::size_t dim);

// Writes a corpus .jsonl holding one record per (language, meaning).
std::filesystem::path write_corpus(const std::filesystem::path& path, const meaning_lists& meanings);

// Meanings 1..m for every language.
meaning_lists full_alignment(const std::vector<std::string>& languages, std::size_t m);

std::string read_file(const std::filesystem::path& path);

}  // namespace abx::testing
