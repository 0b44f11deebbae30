#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "abx/retrieval.hpp"
#include "abx/scorer.hpp"

namespace abx {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text);

// Header-keyed CSV. Fields are plain (no quoting); codes and numbers only.
struct csv_table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws format_error
  bool has_column(const std::string& name) const;
  const std::string& at(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
};

csv_table read_csv(const std::filesystem::path& path);
void write_csv(const csv_table& table, const std::filesystem::path& path);
void write_csv(const csv_table& table, std::ostream& out);

// Layer column text: integer, or "avg" for kAveragedLayer.
std::string layer_text(int layer);
int parse_layer(const std::string& text);

// mode,lang1,lang2,layer,checkpoint,score,n_triplets,tie_count,seed,score_1x,score_2x,n_1x,n_2x
csv_table records_table(const std::vector<abx_record>& records);
std::vector<abx_record> records_from_table(const csv_table& table);
void write_records_jsonl(const std::vector<abx_record>& records, const std::filesystem::path& path);

// lang1,lang2,layer,checkpoint,acc_1to2,acc_2to1,acc_mean,pool_size
csv_table retrieval_table(const std::vector<retrieval_result>& results);
std::vector<retrieval_result> retrieval_from_table(const csv_table& table);

// mode,language,checkpoint,layer,score,n_pairs
csv_table global_scores_table(const std::vector<global_language_score>& scores);
std::vector<global_language_score> global_scores_from_table(const csv_table& table);

// Deterministic order: mode, lang1, lang2, checkpoint, layer.
void sort_records(std::vector<abx_record>& records);

}  // namespace abx
