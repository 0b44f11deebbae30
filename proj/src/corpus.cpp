#include "abx/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <set>

#include "abx/error.hpp"

namespace abx {

namespace fs = std::filesystem;
using json = nlohmann::json;

alignment_index alignment_index::from_records(const std::vector<sentence_record>& records,
                                              const std::optional<std::vector<std::string>>& languages) {
  std::set<std::string> present;
  for (const auto& r : records) present.insert(r.language);

  std::set<std::string> keep;
  if (languages) {
    for (const auto& l : *languages) {
      if (!present.contains(l)) throw unknown_language_error("language '" + l + "' not present in corpus");
      keep.insert(l);
    }
  } else {
    keep = present;
  }

  alignment_index idx;
  idx.languages_.assign(keep.begin(), keep.end());
  idx.per_language_.resize(idx.languages_.size());
  std::set<std::pair<meaning_id, std::string>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.id, r.language).second) {
      throw invariant_error("duplicate record for meaning " + std::to_string(r.id) + " in language " + r.language);
    }
    if (!keep.contains(r.language)) continue;
    idx.per_language_[idx.language_slot(r.language)].push_back(r.id);
  }
  idx.build();
  return idx;
}

alignment_index alignment_index::from_lists(const std::map<std::string, std::vector<meaning_id>>& lists) {
  alignment_index idx;
  for (const auto& [lang, ids] : lists) {
    idx.languages_.push_back(lang);
    idx.per_language_.push_back(ids);
    std::vector<meaning_id> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw invariant_error("duplicate meaning id in language " + lang);
    }
  }
  idx.build();
  return idx;
}

void alignment_index::build() {
  const std::size_t n = languages_.size();
  meanings_.clear();
  for (std::size_t s = 0; s < n; ++s) {
    auto& ids = per_language_[s];
    std::sort(ids.begin(), ids.end());
    for (meaning_id id : ids) {
      auto [it, fresh] = meanings_.try_emplace(id, n);
      it->second.set(s);
    }
  }
}

bool alignment_index::has_language(const std::string& lang) const {
  return std::binary_search(languages_.begin(), languages_.end(), lang);
}

std::size_t alignment_index::language_slot(const std::string& lang) const {
  auto it = std::lower_bound(languages_.begin(), languages_.end(), lang);
  if (it == languages_.end() || *it != lang) throw unknown_language_error("unknown language '" + lang + "'");
  return static_cast<std::size_t>(it - languages_.begin());
}

const std::vector<meaning_id>& alignment_index::meanings_of(const std::string& lang) const {
  return per_language_[language_slot(lang)];
}

std::vector<meaning_id> alignment_index::shared_meanings(const std::string& l1, const std::string& l2) const {
  const auto& a = meanings_of(l1);
  const auto& b = meanings_of(l2);
  std::vector<meaning_id> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

const boost::dynamic_bitset<>& alignment_index::languages_of(meaning_id id) const {
  auto it = meanings_.find(id);
  if (it == meanings_.end()) throw lookup_error("meaning " + std::to_string(id) + " not in index");
  return it->second;
}

std::vector<sentence_record> read_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open corpus " + path.string());
  std::vector<sentence_record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw format_error(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("meaning_id") || !j.contains("language") || !j.contains("text")) {
      throw format_error(where + ": record needs meaning_id, language and text");
    }
    const auto& mid = j["meaning_id"];
    if (!mid.is_number_integer() || (mid.is_number_integer() && !mid.is_number_unsigned() && mid.get<std::int64_t>() < 0)) {
      throw format_error(where + ": meaning_id must be a non-negative integer");
    }
    if (!j["language"].is_string() || !j["text"].is_string()) {
      throw format_error(where + ": language and text must be strings");
    }
    out.push_back({mid.get<meaning_id>(), j["language"].get<std::string>(), j["text"].get<std::string>()});
  }
  return out;
}

alignment_index ingest_corpus(const fs::path& path, const std::optional<std::vector<std::string>>& languages) {
  return alignment_index::from_records(read_corpus(path), languages);
}

void save_index(const alignment_index& index, const fs::path& path) {
  json meanings = json::object();
  for (const auto& lang : index.languages()) meanings[lang] = index.meanings_of(lang);
  json j = {{"languages", index.languages()}, {"meanings", meanings}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write index " + path.string());
  out << j.dump() << '\n';
}

alignment_index load_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open index " + path.string());
  try {
    json j;
    in >> j;
    std::map<std::string, std::vector<meaning_id>> lists;
    for (const auto& [lang, ids] : j.at("meanings").items()) lists[lang] = ids.get<std::vector<meaning_id>>();
    return alignment_index::from_lists(lists);
  } catch (const json::exception& e) {
    throw format_error("index " + path.string() + ": " + e.what());
  }
}

alignment_index load_index_or_corpus(const fs::path& path, const std::optional<std::vector<std::string>>& languages) {
  if (path.extension() == ".jsonl") return ingest_corpus(path, languages);
  auto idx = load_index(path);
  if (!languages) return idx;
  std::map<std::string, std::vector<meaning_id>> lists;
  for (const auto& l : *languages) lists[l] = idx.meanings_of(l);
  return alignment_index::from_lists(lists);
}

std::string index_summary_json(const alignment_index& index) {
  json counts = json::object();
  for (const auto& l : index.languages()) counts[l] = index.count(l);
  json shared = json::array();
  const auto& langs = index.languages();
  for (std::size_t i = 0; i < langs.size(); ++i) {
    for (std::size_t k = i + 1; k < langs.size(); ++k) {
      shared.push_back({{"lang1", langs[i]}, {"lang2", langs[k]},
                        {"shared", index.shared_meanings(langs[i], langs[k]).size()}});
    }
  }
  json j = {{"languages", langs}, {"n_meanings", index.meaning_count()}, {"counts", counts}, {"pairs", shared}};
  return j.dump(2);
}

}  // namespace abx
