#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace abx {

using meaning_id = std::uint64_t;

inline constexpr std::uint32_t kEmbxFormatVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;
inline constexpr std::size_t kEmbxHeaderBytes = 4 + 4 + 4 + 8 + 8;

// Owning in-memory matrix, the unit handed to write_matrix.
struct embedding_matrix {
  std::int64_t checkpoint = 0;
  int layer = 0;
  std::string language;
  std::size_t dim = 0;
  std::vector<meaning_id> meaning_ids;
  std::vector<float> vectors;  // row-major, meaning_ids.size() * dim

  std::size_t rows() const noexcept { return meaning_ids.size(); }
  std::span<const float> row(std::size_t i) const { return {vectors.data() + i * dim, dim}; }
};

// Throws invariant_error on duplicate meaning ids, an all-zero row, a
// non-finite value, a zero dim or a vectors/ids size mismatch.
void validate_matrix(std::span<const meaning_id> ids, std::span<const float> vectors, std::size_t dim);

void write_matrix(const embedding_matrix& matrix, const std::filesystem::path& path);

// Reads a whole EMBX file into memory (checkpoint/layer/language left default).
embedding_matrix read_matrix(const std::filesystem::path& path);

struct matrix_header {
  std::uint32_t format_version = 0;
  std::uint32_t dtype = 0;
  std::uint64_t n_sentences = 0;
  std::uint64_t dim = 0;
};

matrix_header read_header(const std::filesystem::path& path);

struct manifest_entry {
  std::int64_t checkpoint = 0;
  int layer = 0;
  std::string language;
  std::string path;  // relative to the manifest directory
  std::uint64_t n_sentences = 0;
  std::uint64_t dim = 0;
};

struct store_manifest {
  std::uint32_t format_version = kEmbxFormatVersion;
  std::vector<std::string> languages;
  std::vector<std::int64_t> checkpoints;
  std::vector<int> layers;
  std::vector<manifest_entry> entries;
};

store_manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const store_manifest& manifest, const std::filesystem::path& path);

// Builds the languages/checkpoints/layers lists from the entries.
store_manifest make_manifest(std::vector<manifest_entry> entries);

struct cell_key {
  std::int64_t checkpoint;
  int layer;
  std::string language;

  auto operator<=>(const cell_key&) const = default;
};

// Read-only memory mapping of one EMBX file.
class mapped_file {
 public:
  explicit mapped_file(const std::filesystem::path& path);
  ~mapped_file();
  mapped_file(const mapped_file&) = delete;
  mapped_file& operator=(const mapped_file&) = delete;

  std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }

 private:
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

// Validated view over a mapped matrix. Vectors stay in the mapping; ids are
// copied because the id block is not 8-byte aligned on disk.
class matrix_view {
 public:
  matrix_view(cell_key key, std::shared_ptr<const mapped_file> file, std::size_t n, std::size_t dim);

  const cell_key& key() const noexcept { return key_; }
  std::size_t rows() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const meaning_id> meaning_ids() const noexcept { return ids_; }
  std::span<const float> vectors() const noexcept { return vectors_; }
  std::span<const float> row(std::size_t i) const { return vectors_.subspan(i * dim_, dim_); }

  bool contains(meaning_id id) const { return row_of_.contains(id); }
  // Throws lookup_error when absent.
  std::size_t row_index(meaning_id id) const;
  std::span<const float> vector_for(meaning_id id) const { return row(row_index(id)); }

 private:
  cell_key key_;
  std::shared_ptr<const mapped_file> file_;
  std::size_t dim_;
  std::vector<meaning_id> ids_;
  std::span<const float> vectors_;
  std::unordered_map<meaning_id, std::size_t> row_of_;
};

// Manifest-indexed collection of EMBX files. Matrices are mapped and
// validated on first access; all public members are safe to call from
// several threads at once.
class embedding_store {
 public:
  static embedding_store open(const std::filesystem::path& manifest_path);

  const store_manifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& root() const noexcept { return root_; }
  bool has(std::int64_t checkpoint, int layer, const std::string& language) const;

  // Throws missing_matrix_error when no entry matches.
  std::shared_ptr<const matrix_view> get(std::int64_t checkpoint, int layer, const std::string& language) const;

  std::vector<float> get_vector(std::int64_t checkpoint, int layer, const std::string& language, meaning_id id) const;

  // Dimension shared by all entries of a checkpoint.
  std::size_t dim(std::int64_t checkpoint) const;

 private:
  embedding_store() = default;

  struct slot {
    manifest_entry entry;
    mutable std::once_flag once;
    mutable std::shared_ptr<const matrix_view> view;
  };

  store_manifest manifest_;
  std::filesystem::path root_;
  std::map<cell_key, std::unique_ptr<slot>> slots_;
};

}  // namespace abx
