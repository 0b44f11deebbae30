#include "abx/analysis.hpp"

#include <algorithm>
#include <map>

#include "abx/error.hpp"

namespace abx {

namespace {

std::int64_t to_i64(const std::string& s) {
  const double v = parse_double(s);
  return static_cast<std::int64_t>(v);
}

}  // namespace

checkpoint_series accuracy_from_table(const csv_table& t) {
  std::map<std::string, std::map<std::int64_t, std::pair<double, std::size_t>>> sums;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto& cell = sums[t.at(i, "language")][to_i64(t.at(i, "checkpoint"))];
    cell.first += parse_double(t.at(i, "accuracy"));
    cell.second += 1;
  }
  checkpoint_series out;
  for (const auto& [lang, row] : sums) {
    for (const auto& [c, s] : row) out[lang][c] = s.first / static_cast<double>(s.second);
  }
  return out;
}

checkpoint_series read_accuracy_table(const std::filesystem::path& path) { return accuracy_from_table(read_csv(path)); }

transfer_table transfer_from_table(const csv_table& t) {
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto& cell = sums[{t.at(i, "source"), t.at(i, "target")}];
    cell.first += parse_double(t.at(i, "accuracy"));
    cell.second += 1;
  }
  transfer_table out;
  for (const auto& [k, s] : sums) out[k] = s.first / static_cast<double>(s.second);
  return out;
}

transfer_table read_transfer_table(const std::filesystem::path& path) { return transfer_from_table(read_csv(path)); }

checkpoint_series series_from_global(const std::vector<global_language_score>& scores, triplet_mode mode, int layer) {
  checkpoint_series out;
  for (const auto& g : scores) {
    if (g.mode == mode && g.layer == layer) out[g.language][g.checkpoint] = g.score;
  }
  return out;
}

pair_table pair_scores(const std::vector<abx_record>& records, triplet_mode mode, std::int64_t checkpoint, int layer) {
  pair_table out;
  for (const auto& r : records) {
    if (r.mode != mode || r.checkpoint != checkpoint || r.layer != layer) continue;
    const auto& [lo, hi] = std::minmax(r.lang1, r.lang2);
    out[{lo, hi}] = r.score;
  }
  return out;
}

checkpoint_scope checkpoint_scope::parse(const std::string& text) {
  if (text == "last") return {kind::last, 0};
  if (text == "avg" || text == "average") return {kind::average, 0};
  return {kind::at, static_cast<std::int64_t>(parse_double(text))};
}

std::string checkpoint_scope::label() const {
  switch (what) {
    case kind::last: return "last";
    case kind::average: return "avg";
    case kind::at: return std::to_string(checkpoint);
  }
  return "?";
}

accuracy_regression regress_accuracy(const checkpoint_series& accuracy, const checkpoint_series& ld,
                                     const checkpoint_series& md, const checkpoint_scope& scope) {
  std::vector<std::string> langs;
  for (const auto& [lang, row] : accuracy) {
    if (ld.contains(lang) && md.contains(lang)) langs.push_back(lang);
  }
  if (langs.empty()) throw coverage_error("no language has accuracy, LD and MD series");
  accuracy_regression out;
  out.scope = scope;

  std::int64_t at = scope.checkpoint;
  if (scope.what == checkpoint_scope::kind::last) {
    // Largest checkpoint present in every series of every language.
    std::optional<std::int64_t> best;
    for (const auto& [c, v] : accuracy.at(langs.front())) {
      bool everywhere = true;
      for (const auto& l : langs) {
        everywhere &= accuracy.at(l).contains(c) && ld.at(l).contains(c) && md.at(l).contains(c);
      }
      if (everywhere) best = c;
    }
    if (!best) throw coverage_error("no checkpoint shared by accuracy, LD and MD series");
    at = *best;
    out.scope.checkpoint = at;
  }

  auto value = [&](const std::map<std::int64_t, double>& row, const std::string& lang) -> double {
    if (scope.what == checkpoint_scope::kind::average) {
      double s = 0.0;
      for (const auto& [c, v] : row) s += v;
      return s / static_cast<double>(row.size());
    }
    auto it = row.find(at);
    if (it == row.end()) throw coverage_error("checkpoint " + std::to_string(at) + " missing for " + lang);
    return it->second;
  };

  std::vector<double> y, x_ld, x_md;
  for (const auto& l : langs) {
    y.push_back(value(accuracy.at(l), l));
    x_ld.push_back(value(ld.at(l), l));
    x_md.push_back(value(md.at(l), l));
  }
  out.languages = langs;
  out.fit = ols_regress(y, {x_ld, x_md});
  return out;
}

accuracy_regression regress_transfer(const transfer_table& transfer, const pair_table& ld, const pair_table& md) {
  std::vector<double> y, x_ld, x_md;
  accuracy_regression out;
  out.scope = {checkpoint_scope::kind::last, 0};
  for (const auto& [k, acc] : transfer) {
    if (k.first == k.second) continue;
    const auto& [lo, hi] = std::minmax(k.first, k.second);
    auto a = ld.find({lo, hi});
    auto b = md.find({lo, hi});
    if (a == ld.end() || b == md.end()) continue;
    y.push_back(acc);
    x_ld.push_back(a->second);
    x_md.push_back(b->second);
    out.languages.push_back(k.first + "->" + k.second);
  }
  out.fit = ols_regress(y, {x_ld, x_md});
  return out;
}

csv_table regression_table(const accuracy_regression& reg) {
  csv_table t{{"term", "coefficient", "std_error", "t", "p_value"}, {}};
  const char* names[] = {"intercept", "ld", "md"};
  for (std::size_t j = 0; j < reg.fit.coefficients.size(); ++j) {
    t.rows.push_back({j < 3 ? names[j] : "x" + std::to_string(j), format_double(reg.fit.coefficients[j]),
                      format_double(reg.fit.std_errors[j]), format_double(reg.fit.t_stats[j]),
                      format_double(reg.fit.p_values[j])});
  }
  t.rows.push_back({"r_squared", format_double(reg.fit.r_squared), "", "", ""});
  t.rows.push_back({"n", std::to_string(reg.fit.n), "", "", ""});
  t.rows.push_back({"checkpoint_scope", reg.scope.label(), "", "", ""});
  return t;
}

}  // namespace abx
