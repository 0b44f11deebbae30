#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "abx/stats.hpp"

namespace abx {

// language -> checkpoint -> value
using checkpoint_series = std::map<std::string, std::map<std::int64_t, double>>;

struct checkpoint_selection {
  std::string language;
  std::int64_t abx_checkpoint = 0;    // argmin LD, earliest on ties
  std::int64_t final_checkpoint = 0;
  std::int64_t best_checkpoint = 0;   // argmax accuracy, earliest on ties
  double best_accuracy = 0.0;
  double gap_abx = 0.0;               // best - acc(abx)
  double gap_final = 0.0;             // best - acc(final)
  double delta = 0.0;                 // acc(abx) - acc(final); > 0 means ABX got closer to best
};

struct checkpoint_selection_summary {
  std::vector<checkpoint_selection> languages;
  std::size_t n_improved = 0;  // #{delta > 0}
  std::size_t n_worse = 0;
  double mean_delta = 0.0;
  double sd_delta = 0.0;
  std::optional<rank_test_result> wilcoxon;  // empty when every delta is 0
};

// Throws error when a language has no checkpoints left after exclusion, when
// its LD and accuracy axes differ, or when `final_checkpoint` is not on the axis.
checkpoint_selection_summary select_checkpoint_by_ld(const checkpoint_series& ld, const checkpoint_series& accuracy,
                                                     std::int64_t final_checkpoint,
                                                     const std::set<std::int64_t>& excluded = {});

// Unordered-pair LD: key is (min(a,b), max(a,b)).
using pair_table = std::map<std::pair<std::string, std::string>, double>;
// Directional transfer accuracy: key is (source, target).
using transfer_table = std::map<std::pair<std::string, std::string>, double>;

struct source_selection {
  std::string target;
  std::string abx_source;        // argmin LD(source, target), lexicographically smallest on ties
  std::string true_best_source;  // argmax transfer accuracy, lexicographically smallest on ties
  double abx_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::size_t rank_of_abx_source = 0;  // 1 + #sources with strictly higher accuracy
  std::map<std::size_t, bool> top_k_hit;
  double win_rate = 0.0;
  std::size_t n_random_draws = 0;
};

struct source_selection_summary {
  std::vector<source_selection> targets;
  std::size_t n_exact = 0;
  std::map<std::size_t, std::size_t> n_top_k;
  double mean_win_rate = 0.0;
  double sd_win_rate = 0.0;
};

struct source_selection_options {
  std::vector<std::size_t> k_list = {1, 3};
  std::size_t n_draws = 100;
  std::uint64_t seed = 0;
  // Whether the ABX-selected source may itself be drawn as a random rival.
  bool include_self_in_pool = true;
};

// Candidate sources for a target are the other languages of `languages`.
// Throws coverage_error when an LD or transfer cell is missing.
source_selection_summary select_source_by_ld(const std::vector<std::string>& languages, const pair_table& pair_ld,
                                             const transfer_table& transfer, const source_selection_options& options);

// Mean over n_draws uniform draws (with replacement) of
// 1 / 0.5 / 0 for abx accuracy greater / equal / less than the draw.
double win_rate_vs_random(double abx_accuracy, const std::vector<double>& candidate_accuracies, std::size_t n_draws,
                          std::uint64_t seed);

}  // namespace abx
