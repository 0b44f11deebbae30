#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abx/corpus.hpp"
#include "abx/embedding_store.hpp"
#include "abx/scorer.hpp"
#include "abx/stats.hpp"

namespace abx {

struct retrieval_result {
  std::string lang1;
  std::string lang2;
  int layer = 0;
  std::int64_t checkpoint = 0;
  double accuracy_1to2 = 0.0;
  double accuracy_2to1 = 0.0;
  double accuracy_mean = 0.0;
  std::size_t pool_size = 0;
};

// Fraction of queries whose nearest candidate (cosine) carries the query's
// meaning. queries[i] and candidates[i] are translations of each other; ties
// at the minimum distance give credit 1/|tied set| when the translation is among them.
double top1_accuracy(const std::vector<std::span<const float>>& queries,
                     const std::vector<std::span<const float>>& candidates);

// Both directions over all shared meanings of the pair.
retrieval_result retrieval_top1(const embedding_store& store, const alignment_index& index, const std::string& l1,
                                const std::string& l2, int layer, std::int64_t checkpoint);

struct md_retrieval_correlation {
  correlation_result pearson;
  correlation_result spearman;
  std::size_t n_pairs = 0;
};

// Pairs each MD record (lang1, lang2) with the retrieval result of the same
// unordered pair and correlates MD score against accuracy_mean. Records are
// matched on the pair only; callers choose layer/checkpoint by filtering.
// Throws coverage_error when either side lacks a pair the other has.
md_retrieval_correlation correlate_md_retrieval(const std::vector<abx_record>& md_records,
                                                const std::vector<retrieval_result>& retrieval);

}  // namespace abx
