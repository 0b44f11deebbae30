#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abx/scorer.hpp"

namespace abx {

struct run_config {
  std::filesystem::path store;
  std::filesystem::path corpus;  // raw corpus (.jsonl) or saved index (.json)
  std::vector<std::string> languages;        // empty: every language in both store and corpus
  std::vector<int> layers;                   // empty: every store layer
  std::vector<std::int64_t> checkpoints;     // empty: every store checkpoint
  std::set<std::int64_t> exclude_checkpoints;
  std::vector<triplet_mode> modes = {triplet_mode::ld, triplet_mode::md};
  std::uint64_t n_triplets = 100000;
  std::uint64_t seed = 0;
  std::filesystem::path out = "abx-out";
  std::size_t jobs = 1;
  bool retrieval = true;
  std::optional<int> retrieval_layer;        // default: last layer of the layer set
  std::optional<std::filesystem::path> accuracy;  // language,checkpoint,accuracy
  std::optional<std::filesystem::path> transfer;  // source,target,accuracy
  std::optional<std::int64_t> final_checkpoint;   // default: last checkpoint after exclusion
  bool figures = true;
};

// JSON object or flat key=value lines; list values are comma separated.
// Keys match run_config fields (n_triplets, exclude_checkpoints, ...).
run_config load_run_config(const std::filesystem::path& path);
// Applies one key=value override; throws error on unknown keys.
void apply_config_value(run_config& config, const std::string& key, const std::string& value);

struct planned_cell {
  cell_spec cell;
  std::uint64_t seed = 0;
};

struct run_plan {
  std::vector<std::string> languages;
  std::vector<int> layers;
  std::vector<std::int64_t> checkpoints;
  std::vector<planned_cell> cells;  // sorted by cell key
};

// Resolves language/layer/checkpoint sets against the store and corpus.
run_plan plan_run(const run_config& config);
void print_plan(const run_plan& plan, std::ostream& out);

struct stage_error {
  std::string stage;
  std::string cell;
  std::string kind;
  std::string message;
};

struct run_result {
  int exit_status = 0;  // 0 ok, 2 completed with cell/stage errors, 1 aborted
  std::vector<stage_error> errors;
  std::vector<std::filesystem::path> files;
};

// Executes score -> layer average -> global scores -> retrieval -> correlation
// -> regression/selection (when accuracy tables are given) -> figures, writing
// every table under config.out together with errors.json and run_manifest.json.
run_result run(const run_config& config);

}  // namespace abx
