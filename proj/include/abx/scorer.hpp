#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abx/corpus.hpp"
#include "abx/embedding_store.hpp"
#include "abx/triplets.hpp"

namespace abx {

// Layer value of records averaged over the configured layer set.
inline constexpr int kAveragedLayer = -1;

struct abx_record {
  triplet_mode mode = triplet_mode::ld;
  std::string lang1;  // lang1 < lang2
  std::string lang2;
  int layer = 0;
  std::int64_t checkpoint = 0;
  double score = 0.0;
  std::uint64_t n_triplets = 0;
  std::uint64_t tie_count = 0;
  std::uint64_t seed = 0;
  // Per-direction breakdown: index 0 has lang1 supplying X, index 1 lang2.
  double score_dir[2] = {0.0, 0.0};
  std::uint64_t n_dir[2] = {0, 0};
};

struct cell_spec {
  triplet_mode mode = triplet_mode::ld;
  std::string lang1;
  std::string lang2;
  int layer = 0;
  std::int64_t checkpoint = 0;
};

// Deterministic per-cell seed: splitmix-fold of (master, mode, lang1, lang2,
// layer, checkpoint) with languages in canonical (sorted) order.
std::uint64_t cell_seed(std::uint64_t master, const cell_spec& cell);

// Mean over n sampled triplets. The pair is canonicalised to lang1 < lang2
// before sampling, so (en, fr) and (fr, en) yield the same record.
abx_record score_cell(const embedding_store& store, const alignment_index& index, const cell_spec& cell,
                      std::uint64_t n, std::uint64_t seed);

// Exact mean over every valid triplet.
abx_record score_cell_exhaustive(const embedding_store& store, const alignment_index& index, const cell_spec& cell,
                                 std::uint64_t cap = kDefaultEnumerationCap);

// Unweighted mean over one record per layer of `layers`; counts summed.
// Averaged records carry layer kAveragedLayer and seed 0.
abx_record average_over_layers(const std::vector<abx_record>& records, const std::vector<int>& layers);

struct global_language_score {
  triplet_mode mode = triplet_mode::ld;
  std::string language;
  std::int64_t checkpoint = 0;
  int layer = kAveragedLayer;
  double score = 0.0;
  std::size_t n_pairs = 0;
};

// Per-language mean over every pair among `languages` at (mode, checkpoint,
// layer). Pairs listed in `skipped` (as (lo, hi)) had too few shared meanings
// and are left out of both the requirement and the mean. Throws
// coverage_error naming each other missing pair.
std::vector<global_language_score> global_language_scores(
    const std::vector<abx_record>& records, triplet_mode mode, std::int64_t checkpoint, int layer,
    const std::vector<std::string>& languages, const std::set<std::pair<std::string, std::string>>& skipped = {});

}  // namespace abx

namespace abx {

// Layer-averages every (mode, pair, checkpoint) group of per-layer records
// over `layers`. Groups missing a layer raise coverage_error.
std::vector<abx_record> average_records_over_layers(const std::vector<abx_record>& per_layer,
                                                    const std::vector<int>& layers);

}  // namespace abx
