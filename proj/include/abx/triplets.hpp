#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "abx/corpus.hpp"

namespace abx {

enum class triplet_mode : std::uint8_t { ld, md, baseline_ld, baseline_md };

std::string_view to_string(triplet_mode mode) noexcept;
// Accepts "ld", "md", "baseline-ld", "baseline-md" (case-insensitive, '_' or '-').
triplet_mode parse_mode(std::string_view text);

// Smallest shared-meaning count for which a mode has any valid triplet.
std::size_t min_shared_meanings(triplet_mode mode) noexcept;

// Number of distinct valid triplets for m shared meanings, both directions.
std::uint64_t pool_size(triplet_mode mode, std::uint64_t m) noexcept;

struct sentence_ref {
  std::string language;
  meaning_id meaning = 0;

  bool operator==(const sentence_ref&) const = default;
};

struct triplet {
  triplet_mode mode = triplet_mode::ld;
  sentence_ref x, a, b;
  // 0: the first pair language supplies X; 1: the second does.
  std::uint8_t direction = 0;

  bool operator==(const triplet&) const = default;
};

// Position-encoded triplet over a fixed language pair: side 0/1 selects the
// pair member, index points into the pair's sorted shared-meaning list.
struct compact_triplet {
  std::uint8_t direction;
  std::uint8_t x_side, a_side, b_side;
  std::uint32_t x_index, a_index, b_index;
};

// Triplet i of a sampled stream is a pure function of (mode, m, seed, i):
// direction = i mod 2, meanings drawn uniformly (with replacement across
// triplets) from the counter-based sub-stream i.
compact_triplet sample_compact(triplet_mode mode, std::uint32_t m, std::uint64_t seed, std::uint64_t i) noexcept;

// Shared-meaning pool for a pair, validated against the mode's minimum.
// Throws pair_skipped_error when too small, invariant_error when l1 == l2.
std::vector<meaning_id> triplet_pool(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                     const std::string& l2);

triplet expand(const compact_triplet& t, triplet_mode mode, const std::string& l1, const std::string& l2,
               const std::vector<meaning_id>& shared);

std::vector<triplet> sample_triplets(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                     const std::string& l2, std::uint64_t n, std::uint64_t seed);

inline constexpr std::uint64_t kDefaultEnumerationCap = 50'000'000;

// Every valid triplet once, ordered by (direction, M1, M2[, M3]).
void for_each_triplet(triplet_mode mode, std::uint32_t m, const std::function<void(const compact_triplet&)>& fn);

std::vector<triplet> enumerate_all_triplets(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                            const std::string& l2, std::uint64_t cap = kDefaultEnumerationCap);

// Satisfies the structural invariant of its mode.
bool satisfies_mode(const triplet& t, const std::string& l1, const std::string& l2);

// {"mode":..,"x":[lang,mid],"a":[..],"b":[..]} per line.
void write_triplet_jsonl(std::ostream& out, const triplet& t);

}  // namespace abx
