#include "abx/scorer.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <tuple>

#include "abx/distance.hpp"
#include "abx/error.hpp"
#include "abx/rng.hpp"

namespace abx {

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw invariant_error("dim mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  const double nu = norm_f64(u);
  const double nv = norm_f64(v);
  if (nu == 0.0 || nv == 0.0) throw invariant_error("cosine distance of a zero-norm vector");
  return cosine_distance_normed(u, nu, v, nv);
}

double score_triplet(std::span<const float> x, std::span<const float> a, std::span<const float> b) {
  return 0.5 * half_points(cosine_distance(x, a), cosine_distance(x, b));
}

std::uint64_t cell_seed(std::uint64_t master, const cell_spec& cell) {
  const auto& [lo, hi] = std::minmax(cell.lang1, cell.lang2);
  std::uint64_t s = seed_combine(master, fnv1a64(to_string(cell.mode)));
  s = seed_combine(s, fnv1a64(lo));
  s = seed_combine(s, fnv1a64(hi));
  s = seed_combine(s, static_cast<std::uint64_t>(static_cast<std::int64_t>(cell.layer)));
  return seed_combine(s, static_cast<std::uint64_t>(cell.checkpoint));
}

namespace {

// Rows of the shared meanings for both languages of a cell, with norms.
class prepared_cell {
 public:
  prepared_cell(const embedding_store& store, const alignment_index& index, const cell_spec& cell)
      : shared_(triplet_pool(index, cell.mode, cell.lang1, cell.lang2)) {
    const std::string* langs[2] = {&cell.lang1, &cell.lang2};
    for (int s = 0; s < 2; ++s) {
      views_[s] = store.get(cell.checkpoint, cell.layer, *langs[s]);
      rows_[s].reserve(shared_.size());
      norms_[s].reserve(shared_.size());
      for (meaning_id id : shared_) {
        auto row = views_[s]->vector_for(id);
        rows_[s].push_back(row);
        norms_[s].push_back(norm_f64(row));
      }
    }
    if (views_[0]->dim() != views_[1]->dim()) throw invariant_error("pair matrices differ in dim");
  }

  std::uint32_t m() const noexcept { return static_cast<std::uint32_t>(shared_.size()); }

  unsigned half_points_of(const compact_triplet& t) const noexcept {
    const auto& x = rows_[t.x_side][t.x_index];
    const double nx = norms_[t.x_side][t.x_index];
    const double d_xa = cosine_distance_normed(x, nx, rows_[t.a_side][t.a_index], norms_[t.a_side][t.a_index]);
    const double d_xb = cosine_distance_normed(x, nx, rows_[t.b_side][t.b_index], norms_[t.b_side][t.b_index]);
    return half_points(d_xa, d_xb);
  }

 private:
  std::vector<meaning_id> shared_;
  std::shared_ptr<const matrix_view> views_[2];
  std::vector<std::span<const float>> rows_[2];
  std::vector<double> norms_[2];
};

struct tally {
  std::uint64_t half[2] = {0, 0};
  std::uint64_t n[2] = {0, 0};
  std::uint64_t ties = 0;

  void add(const compact_triplet& t, unsigned hp) {
    half[t.direction] += hp;
    ++n[t.direction];
    ties += hp == 1U;
  }
};

cell_spec canonical(cell_spec cell) {
  if (cell.lang2 < cell.lang1) std::swap(cell.lang1, cell.lang2);
  return cell;
}

abx_record to_record(const cell_spec& cell, const tally& t, std::uint64_t seed) {
  abx_record r;
  r.mode = cell.mode;
  r.lang1 = cell.lang1;
  r.lang2 = cell.lang2;
  r.layer = cell.layer;
  r.checkpoint = cell.checkpoint;
  r.n_triplets = t.n[0] + t.n[1];
  r.tie_count = t.ties;
  r.seed = seed;
  // Integer half-points keep the sum exact and order independent.
  r.score = static_cast<double>(t.half[0] + t.half[1]) / (2.0 * static_cast<double>(r.n_triplets));
  for (int d = 0; d < 2; ++d) {
    r.n_dir[d] = t.n[d];
    r.score_dir[d] = t.n[d] == 0 ? 0.0 : static_cast<double>(t.half[d]) / (2.0 * static_cast<double>(t.n[d]));
  }
  return r;
}

}  // namespace

abx_record score_cell(const embedding_store& store, const alignment_index& index, const cell_spec& requested,
                      std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw invariant_error("triplet count must be at least 1");
  const auto cell = canonical(requested);
  const prepared_cell prep(store, index, cell);
  tally t;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto trip = sample_compact(cell.mode, prep.m(), seed, i);
    t.add(trip, prep.half_points_of(trip));
  }
  return to_record(cell, t, seed);
}

abx_record score_cell_exhaustive(const embedding_store& store, const alignment_index& index,
                                 const cell_spec& requested, std::uint64_t cap) {
  const auto cell = canonical(requested);
  const prepared_cell prep(store, index, cell);
  const auto total = pool_size(cell.mode, prep.m());
  if (total > cap) {
    throw invariant_error("triplet pool of " + std::to_string(total) + " exceeds enumeration cap " +
                          std::to_string(cap));
  }
  tally t;
  for_each_triplet(cell.mode, prep.m(), [&](const compact_triplet& trip) { t.add(trip, prep.half_points_of(trip)); });
  return to_record(cell, t, 0);
}

abx_record average_over_layers(const std::vector<abx_record>& records, const std::vector<int>& layers) {
  if (records.empty()) throw invariant_error("no records to average");
  const auto& first = records.front();
  std::map<int, const abx_record*> by_layer;
  for (const auto& r : records) {
    if (r.mode != first.mode || r.lang1 != first.lang1 || r.lang2 != first.lang2 || r.checkpoint != first.checkpoint) {
      throw invariant_error("layer average mixes cells of different mode, pair or checkpoint");
    }
    if (!by_layer.emplace(r.layer, &r).second) {
      throw invariant_error("layer " + std::to_string(r.layer) + " appears twice");
    }
  }
  abx_record out;
  out.mode = first.mode;
  out.lang1 = first.lang1;
  out.lang2 = first.lang2;
  out.checkpoint = first.checkpoint;
  out.layer = kAveragedLayer;
  double sum = 0.0;
  double sum_dir[2] = {0.0, 0.0};
  for (int layer : layers) {
    auto it = by_layer.find(layer);
    if (it == by_layer.end()) {
      throw coverage_error("missing layer " + std::to_string(layer) + " for " + std::string(to_string(first.mode)) +
                           " " + first.lang1 + "-" + first.lang2 + " at checkpoint " +
                           std::to_string(first.checkpoint));
    }
    const abx_record& r = *it->second;
    sum += r.score;
    out.n_triplets += r.n_triplets;
    out.tie_count += r.tie_count;
    for (int d = 0; d < 2; ++d) {
      sum_dir[d] += r.score_dir[d];
      out.n_dir[d] += r.n_dir[d];
    }
  }
  const auto k = static_cast<double>(layers.size());
  out.score = sum / k;
  for (int d = 0; d < 2; ++d) out.score_dir[d] = sum_dir[d] / k;
  return out;
}

std::vector<abx_record> average_records_over_layers(const std::vector<abx_record>& per_layer,
                                                    const std::vector<int>& layers) {
  using key = std::tuple<triplet_mode, std::string, std::string, std::int64_t>;
  std::map<key, std::vector<abx_record>> groups;
  for (const auto& r : per_layer) {
    if (r.layer == kAveragedLayer) continue;
    groups[key{r.mode, r.lang1, r.lang2, r.checkpoint}].push_back(r);
  }
  std::vector<abx_record> out;
  out.reserve(groups.size());
  for (const auto& [k, recs] : groups) {
    std::vector<abx_record> selected;
    for (const auto& r : recs) {
      if (std::find(layers.begin(), layers.end(), r.layer) != layers.end()) selected.push_back(r);
    }
    if (selected.empty()) {
      throw coverage_error("no records in the layer set for " + std::string(to_string(std::get<0>(k))) + " " +
                           std::get<1>(k) + "-" + std::get<2>(k) + " at checkpoint " + std::to_string(std::get<3>(k)));
    }
    out.push_back(average_over_layers(selected, layers));
  }
  return out;
}

std::vector<global_language_score> global_language_scores(
    const std::vector<abx_record>& records, triplet_mode mode, std::int64_t checkpoint, int layer,
    const std::vector<std::string>& languages, const std::set<std::pair<std::string, std::string>>& skipped) {
  std::map<std::pair<std::string, std::string>, double> pair_score;
  for (const auto& r : records) {
    if (r.mode != mode || r.checkpoint != checkpoint || r.layer != layer) continue;
    const auto& [lo, hi] = std::minmax(r.lang1, r.lang2);
    pair_score[{lo, hi}] = r.score;
  }
  std::vector<std::string> langs = languages;
  std::sort(langs.begin(), langs.end());
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    for (std::size_t k = i + 1; k < langs.size(); ++k) {
      const std::pair<std::string, std::string> key{langs[i], langs[k]};
      if (!pair_score.contains(key) && !skipped.contains(key)) missing.push_back(langs[i] + "-" + langs[k]);
    }
  }
  if (!missing.empty()) {
    std::string msg = "incomplete pair coverage for " + std::string(to_string(mode)) + " at checkpoint " +
                      std::to_string(checkpoint) + ", missing:";
    for (const auto& p : missing) msg += " " + p;
    throw coverage_error(msg);
  }
  std::vector<global_language_score> out;
  for (const auto& lang : langs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& other : langs) {
      if (other == lang) continue;
      const auto& [lo, hi] = std::minmax(lang, other);
      auto it = pair_score.find({lo, hi});
      if (it == pair_score.end()) continue;
      sum += it->second;
      ++n;
    }
    if (n == 0) continue;
    out.push_back({mode, lang, checkpoint, layer, sum / static_cast<double>(n), n});
  }
  return out;
}

}  // namespace abx
