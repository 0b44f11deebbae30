#include "abx/selection.hpp"

#include <algorithm>

#include "abx/error.hpp"
#include "abx/rng.hpp"

namespace abx {

checkpoint_selection_summary select_checkpoint_by_ld(const checkpoint_series& ld, const checkpoint_series& accuracy,
                                                     std::int64_t final_checkpoint,
                                                     const std::set<std::int64_t>& excluded) {
  if (excluded.contains(final_checkpoint)) {
    throw error("final checkpoint " + std::to_string(final_checkpoint) + " is excluded");
  }
  checkpoint_selection_summary out;
  std::vector<double> deltas;
  for (const auto& [lang, ld_row] : ld) {
    auto acc_it = accuracy.find(lang);
    if (acc_it == accuracy.end()) throw coverage_error("no accuracy series for language " + lang);
    std::map<std::int64_t, double> l, a;
    for (const auto& [c, v] : ld_row) {
      if (!excluded.contains(c)) l.emplace(c, v);
    }
    for (const auto& [c, v] : acc_it->second) {
      if (!excluded.contains(c)) a.emplace(c, v);
    }
    if (l.empty()) throw error("language " + lang + " has no checkpoints left after exclusion");
    if (l.size() != a.size() || !std::equal(l.begin(), l.end(), a.begin(),
                                            [](const auto& x, const auto& y) { return x.first == y.first; })) {
      throw coverage_error("LD and accuracy checkpoint axes differ for language " + lang);
    }
    if (!a.contains(final_checkpoint)) {
      throw coverage_error("final checkpoint " + std::to_string(final_checkpoint) + " missing for language " + lang);
    }

    checkpoint_selection s;
    s.language = lang;
    s.final_checkpoint = final_checkpoint;
    // Maps iterate in ascending checkpoint order, so strict comparisons keep the earliest.
    auto abx_it = l.begin();
    for (auto it = l.begin(); it != l.end(); ++it) {
      if (it->second < abx_it->second) abx_it = it;
    }
    auto best_it = a.begin();
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (it->second > best_it->second) best_it = it;
    }
    s.abx_checkpoint = abx_it->first;
    s.best_checkpoint = best_it->first;
    s.best_accuracy = best_it->second;
    const double acc_abx = a.at(s.abx_checkpoint);
    const double acc_final = a.at(final_checkpoint);
    s.gap_abx = s.best_accuracy - acc_abx;
    s.gap_final = s.best_accuracy - acc_final;
    s.delta = acc_abx - acc_final;
    out.n_improved += s.delta > 0.0;
    out.n_worse += s.delta < 0.0;
    deltas.push_back(s.delta);
    out.languages.push_back(std::move(s));
  }
  for (const auto& [lang, row] : accuracy) {
    if (!ld.contains(lang)) throw coverage_error("no LD series for language " + lang);
  }
  out.mean_delta = mean(deltas);
  out.sd_delta = stddev(deltas);
  if (std::any_of(deltas.begin(), deltas.end(), [](double d) { return d != 0.0; })) {
    out.wilcoxon = wilcoxon_signed_rank(deltas);
  }
  return out;
}

double win_rate_vs_random(double abx_accuracy, const std::vector<double>& candidates, std::size_t n_draws,
                          std::uint64_t seed) {
  if (candidates.empty()) throw error("win rate needs at least one candidate source");
  if (n_draws == 0) throw error("win rate needs at least one draw");
  counter_rng rng(seed_combine(seed, 0x77696eULL));
  std::uint64_t half_points = 0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double rival = candidates[rng.uniform(candidates.size())];
    half_points += abx_accuracy > rival ? 2U : (abx_accuracy == rival ? 1U : 0U);
  }
  return static_cast<double>(half_points) / (2.0 * static_cast<double>(n_draws));
}

source_selection_summary select_source_by_ld(const std::vector<std::string>& languages, const pair_table& pair_ld,
                                             const transfer_table& transfer,
                                             const source_selection_options& options) {
  std::vector<std::string> langs = languages;
  std::sort(langs.begin(), langs.end());
  langs.erase(std::unique(langs.begin(), langs.end()), langs.end());
  if (langs.size() < 2) throw error("source selection needs at least two languages");

  std::string missing;
  for (const auto& t : langs) {
    for (const auto& s : langs) {
      if (s == t) continue;
      const auto& [lo, hi] = std::minmax(s, t);
      if (!pair_ld.contains({lo, hi})) missing += " ld:" + lo + "-" + hi;
      if (!transfer.contains({s, t})) missing += " transfer:" + s + "->" + t;
    }
  }
  if (!missing.empty()) throw coverage_error("source selection missing cells:" + missing);

  source_selection_summary out;
  std::vector<double> win_rates;
  for (const auto& target : langs) {
    source_selection sel;
    sel.target = target;
    double best_ld = 0.0;
    std::vector<double> pool;
    for (const auto& s : langs) {  // sorted, so strict comparisons keep the smallest code
      if (s == target) continue;
      const auto& [lo, hi] = std::minmax(s, target);
      const double ld = pair_ld.at({lo, hi});
      const double acc = transfer.at({s, target});
      if (sel.abx_source.empty() || ld < best_ld) {
        sel.abx_source = s;
        best_ld = ld;
      }
      if (sel.true_best_source.empty() || acc > sel.best_accuracy) {
        sel.true_best_source = s;
        sel.best_accuracy = acc;
      }
    }
    sel.abx_accuracy = transfer.at({sel.abx_source, target});
    sel.rank_of_abx_source = 1;
    for (const auto& s : langs) {
      if (s == target) continue;
      const double acc = transfer.at({s, target});
      if (acc > sel.abx_accuracy) ++sel.rank_of_abx_source;
      if (options.include_self_in_pool || s != sel.abx_source) pool.push_back(acc);
    }
    for (std::size_t k : options.k_list) {
      const bool hit = sel.rank_of_abx_source <= k;
      sel.top_k_hit[k] = hit;
      out.n_top_k[k] += hit;
    }
    // An exact match means the ABX source attains the best accuracy.
    out.n_exact += sel.rank_of_abx_source == 1;
    sel.n_random_draws = options.n_draws;
    sel.win_rate =
        win_rate_vs_random(sel.abx_accuracy, pool, options.n_draws, seed_combine(options.seed, fnv1a64(target)));
    win_rates.push_back(sel.win_rate);
    out.targets.push_back(std::move(sel));
  }
  out.mean_win_rate = mean(win_rates);
  out.sd_win_rate = stddev(win_rates);
  return out;
}

}  // namespace abx
