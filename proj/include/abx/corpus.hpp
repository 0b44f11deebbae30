#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "abx/embedding_store.hpp"

namespace abx {

struct sentence_record {
  meaning_id id = 0;
  std::string language;
  std::string text;
};

// Which meanings exist in which languages. Immutable once built.
class alignment_index {
 public:
  alignment_index() = default;

  // Records must have unique (meaning, language); throws invariant_error otherwise.
  static alignment_index from_records(const std::vector<sentence_record>& records,
                                      const std::optional<std::vector<std::string>>& languages = std::nullopt);

  // From explicit per-language meaning lists (used when loading a saved index).
  static alignment_index from_lists(const std::map<std::string, std::vector<meaning_id>>& lists);

  const std::vector<std::string>& languages() const noexcept { return languages_; }
  bool has_language(const std::string& lang) const;
  std::size_t language_slot(const std::string& lang) const;

  // Sorted ascending; symmetric in its arguments.
  std::vector<meaning_id> shared_meanings(const std::string& l1, const std::string& l2) const;
  const std::vector<meaning_id>& meanings_of(const std::string& lang) const;

  std::size_t count(const std::string& lang) const { return meanings_of(lang).size(); }
  std::size_t meaning_count() const noexcept { return meanings_.size(); }
  const boost::dynamic_bitset<>& languages_of(meaning_id id) const;

 private:
  void build();

  std::vector<std::string> languages_;  // sorted
  std::map<meaning_id, boost::dynamic_bitset<>> meanings_;
  std::vector<std::vector<meaning_id>> per_language_;  // sorted ids, parallel to languages_
};

// Line-delimited JSON {"meaning_id", "language", "text"}. Malformed lines
// raise format_error with the 1-based line number.
std::vector<sentence_record> read_corpus(const std::filesystem::path& path);

alignment_index ingest_corpus(const std::filesystem::path& path,
                              const std::optional<std::vector<std::string>>& languages = std::nullopt);

// Persisted index: {"languages": [...], "meanings": {"en": [ids...], ...}}.
void save_index(const alignment_index& index, const std::filesystem::path& path);
alignment_index load_index(const std::filesystem::path& path);

// Accepts either a saved index (.json) or a raw corpus (.jsonl).
alignment_index load_index_or_corpus(const std::filesystem::path& path,
                                     const std::optional<std::vector<std::string>>& languages = std::nullopt);

// Per-language counts and pairwise shared counts, as emitted by `abx ingest`.
std::string index_summary_json(const alignment_index& index);

}  // namespace abx
