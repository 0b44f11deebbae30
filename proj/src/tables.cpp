#include "abx/tables.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

#include "abx/error.hpp"

namespace abx {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw format_error("not a number: '" + text + "'");
  }
  return v;
}

namespace {

std::uint64_t parse_u64(const std::string& text) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw format_error("not an unsigned integer: '" + text + "'");
  }
  return v;
}

std::int64_t parse_i64(const std::string& text) {
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw format_error("not an integer: '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t csv_table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw format_error("table has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool csv_table::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

csv_table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open table " + path.string());
  csv_table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw format_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw format_error(path.string() + ": empty table");
  return t;
}

void write_csv(const csv_table& table, std::ostream& out) {
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
}

void write_csv(const csv_table& table, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  write_csv(table, out);
  if (!out) throw io_error("write failed for " + path.string());
}

std::string layer_text(int layer) { return layer == kAveragedLayer ? "avg" : std::to_string(layer); }

int parse_layer(const std::string& text) {
  if (text == "avg") return kAveragedLayer;
  return static_cast<int>(parse_i64(text));
}

void sort_records(std::vector<abx_record>& records) {
  std::sort(records.begin(), records.end(), [](const abx_record& a, const abx_record& b) {
    return std::tie(a.mode, a.lang1, a.lang2, a.checkpoint, a.layer) <
           std::tie(b.mode, b.lang1, b.lang2, b.checkpoint, b.layer);
  });
}

csv_table records_table(const std::vector<abx_record>& records) {
  csv_table t;
  t.header = {"mode",      "lang1", "lang2",    "layer",    "checkpoint", "score", "n_triplets",
              "tie_count", "seed",  "score_1x", "score_2x", "n_1x",       "n_2x"};
  for (const auto& r : records) {
    t.rows.push_back({std::string(to_string(r.mode)), r.lang1, r.lang2, layer_text(r.layer),
                      std::to_string(r.checkpoint), format_double(r.score), std::to_string(r.n_triplets),
                      std::to_string(r.tie_count), std::to_string(r.seed), format_double(r.score_dir[0]),
                      format_double(r.score_dir[1]), std::to_string(r.n_dir[0]), std::to_string(r.n_dir[1])});
  }
  return t;
}

std::vector<abx_record> records_from_table(const csv_table& t) {
  std::vector<abx_record> out;
  const bool has_dirs = t.has_column("score_1x");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    abx_record r;
    r.mode = parse_mode(t.at(i, "mode"));
    r.lang1 = t.at(i, "lang1");
    r.lang2 = t.at(i, "lang2");
    r.layer = parse_layer(t.at(i, "layer"));
    r.checkpoint = parse_i64(t.at(i, "checkpoint"));
    r.score = parse_double(t.at(i, "score"));
    r.n_triplets = parse_u64(t.at(i, "n_triplets"));
    r.tie_count = parse_u64(t.at(i, "tie_count"));
    r.seed = parse_u64(t.at(i, "seed"));
    if (has_dirs) {
      r.score_dir[0] = parse_double(t.at(i, "score_1x"));
      r.score_dir[1] = parse_double(t.at(i, "score_2x"));
      r.n_dir[0] = parse_u64(t.at(i, "n_1x"));
      r.n_dir[1] = parse_u64(t.at(i, "n_2x"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_records_jsonl(const std::vector<abx_record>& records, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json j = {{"mode", to_string(r.mode)},
                        {"lang1", r.lang1},
                        {"lang2", r.lang2},
                        {"layer", layer_text(r.layer)},
                        {"checkpoint", r.checkpoint},
                        {"score", r.score},
                        {"n_triplets", r.n_triplets},
                        {"tie_count", r.tie_count},
                        {"seed", r.seed},
                        {"score_1x", r.score_dir[0]},
                        {"score_2x", r.score_dir[1]},
                        {"n_1x", r.n_dir[0]},
                        {"n_2x", r.n_dir[1]}};
    out << j.dump() << '\n';
  }
}

csv_table retrieval_table(const std::vector<retrieval_result>& results) {
  csv_table t;
  t.header = {"lang1", "lang2", "layer", "checkpoint", "acc_1to2", "acc_2to1", "acc_mean", "pool_size"};
  for (const auto& r : results) {
    t.rows.push_back({r.lang1, r.lang2, layer_text(r.layer), std::to_string(r.checkpoint),
                      format_double(r.accuracy_1to2), format_double(r.accuracy_2to1), format_double(r.accuracy_mean),
                      std::to_string(r.pool_size)});
  }
  return t;
}

std::vector<retrieval_result> retrieval_from_table(const csv_table& t) {
  std::vector<retrieval_result> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    retrieval_result r;
    r.lang1 = t.at(i, "lang1");
    r.lang2 = t.at(i, "lang2");
    r.layer = parse_layer(t.at(i, "layer"));
    r.checkpoint = parse_i64(t.at(i, "checkpoint"));
    r.accuracy_1to2 = parse_double(t.at(i, "acc_1to2"));
    r.accuracy_2to1 = parse_double(t.at(i, "acc_2to1"));
    r.accuracy_mean = parse_double(t.at(i, "acc_mean"));
    r.pool_size = parse_u64(t.at(i, "pool_size"));
    out.push_back(std::move(r));
  }
  return out;
}

csv_table global_scores_table(const std::vector<global_language_score>& scores) {
  csv_table t;
  t.header = {"mode", "language", "checkpoint", "layer", "score", "n_pairs"};
  for (const auto& g : scores) {
    t.rows.push_back({std::string(to_string(g.mode)), g.language, std::to_string(g.checkpoint), layer_text(g.layer),
                      format_double(g.score), std::to_string(g.n_pairs)});
  }
  return t;
}

std::vector<global_language_score> global_scores_from_table(const csv_table& t) {
  std::vector<global_language_score> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({parse_mode(t.at(i, "mode")), t.at(i, "language"), parse_i64(t.at(i, "checkpoint")),
                   parse_layer(t.at(i, "layer")), parse_double(t.at(i, "score")), parse_u64(t.at(i, "n_pairs"))});
  }
  return out;
}

}  // namespace abx
