#include "abx/triplets.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>
#include <ostream>
#include <tuple>

#include "abx/error.hpp"
#include "abx/rng.hpp"

namespace abx {

std::string_view to_string(triplet_mode mode) noexcept {
  switch (mode) {
    case triplet_mode::ld: return "ld";
    case triplet_mode::md: return "md";
    case triplet_mode::baseline_ld: return "baseline-ld";
    case triplet_mode::baseline_md: return "baseline-md";
  }
  return "?";
}

triplet_mode parse_mode(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "ld") return triplet_mode::ld;
  if (s == "md") return triplet_mode::md;
  if (s == "baseline-ld") return triplet_mode::baseline_ld;
  if (s == "baseline-md") return triplet_mode::baseline_md;
  throw error("unknown mode '" + std::string(text) + "'");
}

std::size_t min_shared_meanings(triplet_mode mode) noexcept {
  // Baseline LD needs three distinct meanings in one language.
  return mode == triplet_mode::baseline_ld ? 3 : 2;
}

std::uint64_t pool_size(triplet_mode mode, std::uint64_t m) noexcept {
  if (m < min_shared_meanings(mode)) return 0;
  switch (mode) {
    case triplet_mode::ld:
    case triplet_mode::md: return 2 * m * (m - 1);
    case triplet_mode::baseline_ld: return 2 * m * (m - 1) * (m - 2);
    case triplet_mode::baseline_md: return 2 * m;
  }
  return 0;
}

namespace {

compact_triplet make(triplet_mode mode, std::uint8_t dir, std::uint32_t m1, std::uint32_t m2, std::uint32_t m3) {
  const std::uint8_t own = dir;
  const std::uint8_t other = 1 - dir;
  switch (mode) {
    case triplet_mode::ld:
      // X and A share a language, A and B share a meaning.
      return {dir, own, own, other, m1, m2, m2};
    case triplet_mode::md:
      // X and A share a meaning, A and B share a language.
      return {dir, own, other, other, m1, m1, m2};
    case triplet_mode::baseline_ld:
      // Language constant; A and B differ only in meaning.
      return {dir, own, own, own, m1, m2, m3};
    case triplet_mode::baseline_md:
      // Meaning constant; without paraphrases B repeats A's sentence.
      return {dir, own, other, other, m1, m1, m1};
  }
  return {};
}

}  // namespace

compact_triplet sample_compact(triplet_mode mode, std::uint32_t m, std::uint64_t seed, std::uint64_t i) noexcept {
  const auto dir = static_cast<std::uint8_t>(i & 1U);
  auto rng = substream(seed, i);
  const auto m1 = static_cast<std::uint32_t>(rng.uniform(m));
  std::uint32_t m2 = m1;
  std::uint32_t m3 = m1;
  if (mode != triplet_mode::baseline_md) {
    m2 = static_cast<std::uint32_t>(rng.uniform(m - 1));
    if (m2 >= m1) ++m2;
  }
  if (mode == triplet_mode::baseline_ld) {
    // Uniform over the m-2 indices that are neither m1 nor m2.
    m3 = static_cast<std::uint32_t>(rng.uniform(m - 2));
    const auto lo = std::min(m1, m2);
    const auto hi = std::max(m1, m2);
    if (m3 >= lo) ++m3;
    if (m3 >= hi) ++m3;
  }
  return make(mode, dir, m1, m2, m3);
}

std::vector<meaning_id> triplet_pool(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                     const std::string& l2) {
  if (l1 == l2) throw invariant_error("triplet sampling needs two distinct languages, got " + l1 + " twice");
  auto shared = index.shared_meanings(l1, l2);
  if (shared.size() < min_shared_meanings(mode)) {
    throw pair_skipped_error(l1, l2, shared.size(), min_shared_meanings(mode));
  }
  if (shared.size() > UINT32_MAX) throw invariant_error("shared meaning pool exceeds 2^32 entries");
  return shared;
}

triplet expand(const compact_triplet& t, triplet_mode mode, const std::string& l1, const std::string& l2,
               const std::vector<meaning_id>& shared) {
  auto lang = [&](std::uint8_t side) -> const std::string& { return side == 0 ? l1 : l2; };
  return {mode,
          {lang(t.x_side), shared[t.x_index]},
          {lang(t.a_side), shared[t.a_index]},
          {lang(t.b_side), shared[t.b_index]},
          t.direction};
}

std::vector<triplet> sample_triplets(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                     const std::string& l2, std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw invariant_error("triplet count must be at least 1");
  const auto shared = triplet_pool(index, mode, l1, l2);
  const auto m = static_cast<std::uint32_t>(shared.size());
  std::vector<triplet> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(expand(sample_compact(mode, m, seed, i), mode, l1, l2, shared));
  return out;
}

void for_each_triplet(triplet_mode mode, std::uint32_t m, const std::function<void(const compact_triplet&)>& fn) {
  if (m < min_shared_meanings(mode)) return;
  for (std::uint8_t dir = 0; dir < 2; ++dir) {
    for (std::uint32_t m1 = 0; m1 < m; ++m1) {
      if (mode == triplet_mode::baseline_md) {
        fn(make(mode, dir, m1, m1, m1));
        continue;
      }
      for (std::uint32_t m2 = 0; m2 < m; ++m2) {
        if (m2 == m1) continue;
        if (mode != triplet_mode::baseline_ld) {
          fn(make(mode, dir, m1, m2, m2));
          continue;
        }
        for (std::uint32_t m3 = 0; m3 < m; ++m3) {
          if (m3 == m1 || m3 == m2) continue;
          fn(make(mode, dir, m1, m2, m3));
        }
      }
    }
  }
}

std::vector<triplet> enumerate_all_triplets(const alignment_index& index, triplet_mode mode, const std::string& l1,
                                            const std::string& l2, std::uint64_t cap) {
  const auto shared = triplet_pool(index, mode, l1, l2);
  const auto total = pool_size(mode, shared.size());
  if (total > cap) {
    throw invariant_error("triplet pool of " + std::to_string(total) + " exceeds enumeration cap " +
                          std::to_string(cap));
  }
  std::vector<triplet> out;
  out.reserve(total);
  for_each_triplet(mode, static_cast<std::uint32_t>(shared.size()),
                   [&](const compact_triplet& t) { out.push_back(expand(t, mode, l1, l2, shared)); });
  return out;
}

bool satisfies_mode(const triplet& t, const std::string& l1, const std::string& l2) {
  const auto& [x, a, b] = std::tie(t.x, t.a, t.b);
  const std::string& own = t.direction == 0 ? l1 : l2;
  const std::string& other = t.direction == 0 ? l2 : l1;
  if (l1 == l2 || x.language != own) return false;
  switch (t.mode) {
    case triplet_mode::ld:
      return a.language == own && b.language == other && a.meaning == b.meaning && x.meaning != a.meaning;
    case triplet_mode::md:
      return a.language == other && b.language == other && a.meaning == x.meaning && b.meaning != a.meaning;
    case triplet_mode::baseline_ld:
      return a.language == own && b.language == own && x.meaning != a.meaning && x.meaning != b.meaning &&
             a.meaning != b.meaning;
    case triplet_mode::baseline_md:
      return a.language == other && b.language == other && a.meaning == x.meaning && b.meaning == x.meaning;
  }
  return false;
}

void write_triplet_jsonl(std::ostream& out, const triplet& t) {
  nlohmann::json j = {{"mode", to_string(t.mode)},
                      {"x", {t.x.language, t.x.meaning}},
                      {"a", {t.a.language, t.a.meaning}},
                      {"b", {t.b.language, t.b.meaning}}};
  out << j.dump() << '\n';
}

}  // namespace abx
