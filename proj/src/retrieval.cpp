#include "abx/retrieval.hpp"

#include <algorithm>
#include <map>

#include "abx/distance.hpp"
#include "abx/error.hpp"

namespace abx {

double top1_accuracy(const std::vector<std::span<const float>>& queries,
                     const std::vector<std::span<const float>>& candidates) {
  const std::size_t n = queries.size();
  if (candidates.size() != n) throw invariant_error("query and candidate pools differ in size");
  if (n < 2) throw invariant_error("retrieval pool needs at least 2 candidates");
  std::vector<double> cand_norm(n);
  for (std::size_t j = 0; j < n; ++j) cand_norm[j] = norm_f64(candidates[j]);
  double credit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double qn = norm_f64(queries[i]);
    double best = 3.0;
    std::size_t tied = 0;
    bool truth_tied = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = cosine_distance_normed(queries[i], qn, candidates[j], cand_norm[j]);
      if (d < best) {
        best = d;
        tied = 1;
        truth_tied = j == i;
      } else if (d == best) {
        ++tied;
        truth_tied |= j == i;
      }
    }
    if (truth_tied) credit += 1.0 / static_cast<double>(tied);
  }
  return credit / static_cast<double>(n);
}

retrieval_result retrieval_top1(const embedding_store& store, const alignment_index& index, const std::string& l1,
                                const std::string& l2, int layer, std::int64_t checkpoint) {
  if (l1 == l2) throw invariant_error("retrieval needs two distinct languages");
  const auto& [lo, hi] = std::minmax(l1, l2);
  const auto shared = index.shared_meanings(lo, hi);
  if (shared.size() < 2) throw pair_skipped_error(lo, hi, shared.size(), 2);
  const auto v1 = store.get(checkpoint, layer, lo);
  const auto v2 = store.get(checkpoint, layer, hi);
  std::vector<std::span<const float>> rows1, rows2;
  rows1.reserve(shared.size());
  rows2.reserve(shared.size());
  for (meaning_id id : shared) {
    rows1.push_back(v1->vector_for(id));
    rows2.push_back(v2->vector_for(id));
  }
  retrieval_result r;
  r.lang1 = lo;
  r.lang2 = hi;
  r.layer = layer;
  r.checkpoint = checkpoint;
  r.pool_size = shared.size();
  r.accuracy_1to2 = top1_accuracy(rows1, rows2);
  r.accuracy_2to1 = top1_accuracy(rows2, rows1);
  r.accuracy_mean = 0.5 * (r.accuracy_1to2 + r.accuracy_2to1);
  return r;
}

md_retrieval_correlation correlate_md_retrieval(const std::vector<abx_record>& md_records,
                                                const std::vector<retrieval_result>& retrieval) {
  using key = std::pair<std::string, std::string>;
  std::map<key, double> md, acc;
  for (const auto& r : md_records) {
    const auto& [lo, hi] = std::minmax(r.lang1, r.lang2);
    if (!md.emplace(key{lo, hi}, r.score).second) throw coverage_error("duplicate MD record for " + lo + "-" + hi);
  }
  for (const auto& r : retrieval) {
    const auto& [lo, hi] = std::minmax(r.lang1, r.lang2);
    if (!acc.emplace(key{lo, hi}, r.accuracy_mean).second) {
      throw coverage_error("duplicate retrieval result for " + lo + "-" + hi);
    }
  }
  std::string missing;
  for (const auto& [k, v] : md) {
    if (!acc.contains(k)) missing += " " + k.first + "-" + k.second + "(retrieval)";
  }
  for (const auto& [k, v] : acc) {
    if (!md.contains(k)) missing += " " + k.first + "-" + k.second + "(md)";
  }
  if (!missing.empty()) throw coverage_error("MD/retrieval coverage mismatch:" + missing);
  std::vector<double> x, y;
  for (const auto& [k, v] : md) {
    x.push_back(v);
    y.push_back(acc.at(k));
  }
  return {pearson(x, y), spearman(x, y), x.size()};
}

}  // namespace abx
