#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "abx/scorer.hpp"
#include "abx/selection.hpp"
#include "abx/stats.hpp"
#include "abx/tables.hpp"

namespace abx {

// Probe accuracy CSV with columns language, checkpoint, accuracy and an
// optional seed column; repeated (language, checkpoint) rows are averaged.
checkpoint_series read_accuracy_table(const std::filesystem::path& path);
checkpoint_series accuracy_from_table(const csv_table& table);

// Transfer CSV with columns source, target, accuracy (optional seed, averaged).
transfer_table read_transfer_table(const std::filesystem::path& path);
transfer_table transfer_from_table(const csv_table& table);

// language -> checkpoint -> score for one mode and layer scope.
checkpoint_series series_from_global(const std::vector<global_language_score>& scores, triplet_mode mode,
                                     int layer = kAveragedLayer);

// Unordered-pair scores of one mode at a checkpoint and layer scope.
pair_table pair_scores(const std::vector<abx_record>& records, triplet_mode mode, std::int64_t checkpoint,
                       int layer = kAveragedLayer);

// Which checkpoint(s) feed a regression: the final one, the mean over all, or one step.
struct checkpoint_scope {
  enum class kind { last, average, at } what = kind::last;
  std::int64_t checkpoint = 0;

  static checkpoint_scope parse(const std::string& text);  // "last" | "avg" | <int>
  std::string label() const;
};

struct accuracy_regression {
  checkpoint_scope scope;
  std::vector<std::string> languages;
  regression_result fit;  // coefficients: intercept, LD, MD
};

// Accuracy ~ b0 + b1*LD + b2*MD over languages present in all three series.
// For `average`, each series is first averaged over its checkpoints;
// for `last`, the largest checkpoint shared by every series is used.
accuracy_regression regress_accuracy(const checkpoint_series& accuracy, const checkpoint_series& ld,
                                     const checkpoint_series& md, const checkpoint_scope& scope);

// Pair-level variant: transfer accuracy (source, target) ~ LD(pair) + MD(pair).
accuracy_regression regress_transfer(const transfer_table& transfer, const pair_table& ld, const pair_table& md);

// term,coefficient,std_error,t,p_value with r_squared and n in trailing rows.
csv_table regression_table(const accuracy_regression& reg);

}  // namespace abx
