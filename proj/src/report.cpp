#include "abx/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "abx/error.hpp"
#include "abx/rng.hpp"
#include "abx/tables.hpp"

namespace abx {

namespace fs = std::filesystem;
using json = nlohmann::json;

heatmap_matrix normalize_per_row(const heatmap_matrix& m) {
  heatmap_matrix out = m;
  out.tag = normalization::per_row_minmax;
  for (std::size_t r = 0; r < m.values.size(); ++r) {
    const auto& row = m.values[r];
    if (row.empty()) continue;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (std::isnan(row[c])) {
        const auto rl = r < m.row_labels.size() ? m.row_labels[r] : std::to_string(r);
        const auto cl = c < m.column_labels.size() ? m.column_labels[c] : std::to_string(c);
        throw coverage_error("heatmap cell (" + rl + ", " + cl + ") is missing");
      }
    }
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    const double min = *lo;
    const double span = *hi - *lo;
    for (std::size_t c = 0; c < row.size(); ++c) out.values[r][c] = span == 0.0 ? 0.5 : (row[c] - min) / span;
  }
  return out;
}

namespace {

constexpr std::pair<figure_kind, std::string_view> kKindNames[] = {
    {figure_kind::checkpoints_curve, "checkpoints-curve"},
    {figure_kind::layers_curve, "layers-curve"},
    {figure_kind::checkpoint_layer_grid, "checkpoint-layer-grid"},
    {figure_kind::language_checkpoint_grid, "language-checkpoint-grid"},
    {figure_kind::ld_md_scatter, "ld-md-scatter"},
    {figure_kind::ld_accuracy_scatter, "ld-accuracy-scatter"},
    {figure_kind::winrate_hist, "winrate-hist"},
};

using pair_key = std::pair<std::string, std::string>;

struct axes {
  std::set<triplet_mode> modes;
  std::vector<std::int64_t> checkpoints;
  std::vector<int> layers;
  std::map<triplet_mode, std::set<pair_key>> pairs;
};

axes collect_axes(const figure_inputs& in) {
  axes a;
  std::set<std::int64_t> ckpts;
  std::set<int> layers;
  for (const auto& r : in.records) {
    if (r.layer == kAveragedLayer) continue;
    a.modes.insert(r.mode);
    ckpts.insert(r.checkpoint);
    layers.insert(r.layer);
    a.pairs[r.mode].insert({r.lang1, r.lang2});
  }
  a.checkpoints.assign(ckpts.begin(), ckpts.end());
  if (in.layers.empty()) {
    a.layers.assign(layers.begin(), layers.end());
  } else {
    a.layers = in.layers;
    std::sort(a.layers.begin(), a.layers.end());
  }
  return a;
}

void check_coverage(const figure_inputs& in, const axes& a) {
  using cell = std::tuple<triplet_mode, std::string, std::string, std::int64_t, int>;
  std::set<cell> have;
  for (const auto& r : in.records) have.insert({r.mode, r.lang1, r.lang2, r.checkpoint, r.layer});
  std::vector<std::string> missing;
  for (auto mode : a.modes) {
    for (const auto& [l1, l2] : a.pairs.at(mode)) {
      for (auto c : a.checkpoints) {
        for (int layer : a.layers) {
          if (!have.contains({mode, l1, l2, c, layer})) {
            missing.push_back(std::string(to_string(mode)) + "/" + l1 + "-" + l2 + "/ckpt " + std::to_string(c) +
                              "/layer " + std::to_string(layer));
          }
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "record coverage gaps (" + std::to_string(missing.size()) + "):";
    for (const auto& m : missing) msg += " " + m;
    throw coverage_error(msg);
  }
}

std::vector<std::string> languages_of(const std::set<pair_key>& pairs) {
  std::set<std::string> langs;
  for (const auto& [a, b] : pairs) {
    langs.insert(a);
    langs.insert(b);
  }
  return {langs.begin(), langs.end()};
}

struct emitter {
  fs::path dir;
  json schema = json::object();
  std::vector<fs::path> written;

  void write(const std::string& name, const csv_table& table, const std::string& description) {
    const auto path = dir / name;
    write_csv(table, path);
    schema[name] = {{"columns", table.header}, {"rows", table.rows.size()}, {"description", description}};
    written.push_back(path);
  }
};

double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : mean(v); }

}  // namespace

std::string_view to_string(figure_kind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

figure_kind parse_figure_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw error("unknown figure kind '" + std::string(text) + "'");
}

const std::vector<figure_kind>& all_figure_kinds() {
  static const std::vector<figure_kind> kinds = [] {
    std::vector<figure_kind> v;
    for (const auto& [k, name] : kKindNames) v.push_back(k);
    return v;
  }();
  return kinds;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << fnv1a64(bytes);
  return "fnv1a64:" + hex.str();
}

std::vector<fs::path> emit_figure_data(const figure_inputs& in, const std::vector<figure_kind>& kinds,
                                       const fs::path& out_dir, const provenance& prov) {
  fs::create_directories(out_dir);
  const std::set<figure_kind> want(kinds.begin(), kinds.end());
  const axes ax = collect_axes(in);
  const bool record_kinds = want.contains(figure_kind::checkpoints_curve) || want.contains(figure_kind::layers_curve) ||
                            want.contains(figure_kind::checkpoint_layer_grid) ||
                            want.contains(figure_kind::language_checkpoint_grid) ||
                            want.contains(figure_kind::ld_md_scatter) ||
                            want.contains(figure_kind::ld_accuracy_scatter);
  if (record_kinds) {
    if (ax.modes.empty()) throw coverage_error("no per-layer records to report");
    check_coverage(in, ax);
  }
  const auto averaged = record_kinds ? average_records_over_layers(in.records, ax.layers) : std::vector<abx_record>{};

  emitter em;
  em.dir = out_dir;

  if (want.contains(figure_kind::checkpoints_curve)) {
    std::map<std::pair<triplet_mode, std::int64_t>, std::vector<double>> groups;
    for (const auto& r : averaged) groups[{r.mode, r.checkpoint}].push_back(r.score);
    csv_table t{{"mode", "checkpoint", "mean_score", "n_pairs"}, {}};
    for (const auto& [k, v] : groups) {
      t.rows.push_back({std::string(to_string(k.first)), std::to_string(k.second), format_double(mean_of(v)),
                        std::to_string(v.size())});
    }
    em.write("checkpoints_curve.csv", t, "Mean layer-averaged pair score per mode and checkpoint.");
  }

  std::map<std::tuple<triplet_mode, std::int64_t, int>, std::vector<double>> grid;
  for (const auto& r : in.records) {
    if (r.layer == kAveragedLayer) continue;
    if (std::find(ax.layers.begin(), ax.layers.end(), r.layer) == ax.layers.end()) continue;
    grid[{r.mode, r.checkpoint, r.layer}].push_back(r.score);
  }

  if (want.contains(figure_kind::layers_curve)) {
    const std::int64_t at = in.layer_curve_checkpoint.value_or(ax.checkpoints.back());
    if (std::find(ax.checkpoints.begin(), ax.checkpoints.end(), at) == ax.checkpoints.end()) {
      throw coverage_error("layers curve checkpoint " + std::to_string(at) + " has no records");
    }
    csv_table t{{"mode", "checkpoint", "layer", "mean_score", "n_pairs"}, {}};
    for (const auto& [k, v] : grid) {
      if (std::get<1>(k) != at) continue;
      t.rows.push_back({std::string(to_string(std::get<0>(k))), std::to_string(at), std::to_string(std::get<2>(k)),
                        format_double(mean_of(v)), std::to_string(v.size())});
    }
    em.write("layers_curve.csv", t, "Mean pair score per mode and layer at one checkpoint.");
  }

  if (want.contains(figure_kind::checkpoint_layer_grid)) {
    csv_table t{{"mode", "checkpoint", "layer", "mean_score", "n_pairs"}, {}};
    for (const auto& [k, v] : grid) {
      t.rows.push_back({std::string(to_string(std::get<0>(k))), std::to_string(std::get<1>(k)),
                        std::to_string(std::get<2>(k)), format_double(mean_of(v)), std::to_string(v.size())});
    }
    em.write("checkpoint_layer_grid.csv", t, "Mean pair score per mode, checkpoint and layer.");
  }

  // Global per-language scores, layer-averaged, keyed (mode, checkpoint).
  auto global_at = [&](triplet_mode mode, std::int64_t ckpt, int layer, const std::vector<abx_record>& source) {
    // Pairs never scored for this mode were skipped upstream; average over the rest.
    const auto langs = languages_of(ax.pairs.at(mode));
    std::set<pair_key> skipped;
    for (std::size_t i = 0; i < langs.size(); ++i) {
      for (std::size_t k = i + 1; k < langs.size(); ++k) {
        if (!ax.pairs.at(mode).contains({langs[i], langs[k]})) skipped.insert({langs[i], langs[k]});
      }
    }
    return global_language_scores(source, mode, ckpt, layer, langs, skipped);
  };

  if (want.contains(figure_kind::language_checkpoint_grid)) {
    csv_table raw{{"mode", "layer", "language", "checkpoint", "score"}, {}};
    csv_table norm = raw;
    const int last_layer = ax.layers.back();
    for (auto mode : ax.modes) {
      const auto langs = languages_of(ax.pairs.at(mode));
      for (int scope : {kAveragedLayer, last_layer}) {
        const auto& source = scope == kAveragedLayer ? averaged : in.records;
        heatmap_matrix hm;
        hm.row_labels = langs;
        for (auto c : ax.checkpoints) hm.column_labels.push_back(std::to_string(c));
        hm.values.assign(langs.size(), std::vector<double>(ax.checkpoints.size(), std::nan("")));
        for (std::size_t c = 0; c < ax.checkpoints.size(); ++c) {
          const auto scores = global_at(mode, ax.checkpoints[c], scope, source);
          for (std::size_t r = 0; r < scores.size(); ++r) hm.values[r][c] = scores[r].score;
        }
        const auto nm = normalize_per_row(hm);
        for (std::size_t r = 0; r < langs.size(); ++r) {
          for (std::size_t c = 0; c < ax.checkpoints.size(); ++c) {
            std::vector<std::string> key = {std::string(to_string(mode)), layer_text(scope), langs[r],
                                            hm.column_labels[c]};
            auto rr = key;
            rr.push_back(format_double(hm.values[r][c]));
            raw.rows.push_back(std::move(rr));
            key.push_back(format_double(nm.values[r][c]));
            norm.rows.push_back(std::move(key));
          }
        }
      }
    }
    em.write("language_checkpoint_grid_raw.csv", raw,
             "Global per-language score per checkpoint, layer-averaged (layer=avg) and last layer.");
    em.write("language_checkpoint_grid_normalized.csv", norm,
             "Same grid min-max normalized per (mode, layer scope, language) row; constant rows are 0.5.");
  }

  if (want.contains(figure_kind::ld_md_scatter) && ax.modes.contains(triplet_mode::ld) &&
      ax.modes.contains(triplet_mode::md)) {
    std::map<std::tuple<std::string, std::string, std::int64_t>, double> ld;
    for (const auto& r : averaged) {
      if (r.mode == triplet_mode::ld) ld[{r.lang1, r.lang2, r.checkpoint}] = r.score;
    }
    csv_table t{{"lang1", "lang2", "checkpoint", "ld", "md"}, {}};
    for (const auto& r : averaged) {
      if (r.mode != triplet_mode::md) continue;
      auto it = ld.find({r.lang1, r.lang2, r.checkpoint});
      if (it == ld.end()) continue;
      t.rows.push_back({r.lang1, r.lang2, std::to_string(r.checkpoint), format_double(it->second),
                        format_double(r.score)});
    }
    em.write("ld_md_scatter.csv", t, "Layer-averaged LD and MD per language pair and checkpoint.");
  }

  if (want.contains(figure_kind::ld_accuracy_scatter) && ax.modes.contains(triplet_mode::ld)) {
    if (!in.accuracy.empty()) {
      std::map<std::pair<std::string, std::int64_t>, double> gld;
      for (auto c : ax.checkpoints) {
        for (const auto& g : global_at(triplet_mode::ld, c, kAveragedLayer, averaged)) gld[{g.language, c}] = g.score;
      }
      csv_table t{{"language", "checkpoint", "ld", "accuracy"}, {}};
      for (const auto& p : in.accuracy) {
        auto it = gld.find({p.language, p.checkpoint});
        if (it == gld.end()) continue;
        t.rows.push_back({p.language, std::to_string(p.checkpoint), format_double(it->second),
                          format_double(p.accuracy)});
      }
      em.write("ld_accuracy_scatter.csv", t, "Global layer-averaged LD against probe accuracy per language.");
    }
    if (!in.transfer.empty()) {
      const auto last = ax.checkpoints.back();
      std::map<pair_key, double> pld;
      for (const auto& r : averaged) {
        if (r.mode == triplet_mode::ld && r.checkpoint == last) pld[{r.lang1, r.lang2}] = r.score;
      }
      csv_table t{{"source", "target", "checkpoint", "ld", "accuracy"}, {}};
      for (const auto& p : in.transfer) {
        const auto& [lo, hi] = std::minmax(p.source, p.target);
        auto it = pld.find({lo, hi});
        if (it == pld.end()) continue;
        t.rows.push_back({p.source, p.target, std::to_string(last), format_double(it->second),
                          format_double(p.accuracy)});
      }
      em.write("ld_transfer_scatter.csv", t, "Pair LD at the last checkpoint against transfer accuracy.");
    }
  }

  if (want.contains(figure_kind::winrate_hist) && !in.win_rates.empty()) {
    const std::size_t bins = std::max<std::size_t>(1, in.histogram_bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double w : in.win_rates) {
      auto b = static_cast<std::size_t>(std::floor(w * static_cast<double>(bins)));
      counts[std::min(b, bins - 1)]++;
    }
    csv_table t{{"bin_lo", "bin_hi", "count"}, {}};
    for (std::size_t b = 0; b < bins; ++b) {
      t.rows.push_back({format_double(static_cast<double>(b) / static_cast<double>(bins)),
                        format_double(static_cast<double>(b + 1) / static_cast<double>(bins)),
                        std::to_string(counts[b])});
    }
    em.write("winrate_hist.csv", t,
             "Histogram of per-target win rates; last bin is closed. Mean: " + format_double(mean(in.win_rates)));
  }

  json sidecar = {{"engine_version", prov.engine_version},
                  {"rng_algorithm", kRngAlgorithm},
                  {"master_seed", prov.master_seed},
                  {"store_manifest_hash", prov.store_manifest_hash},
                  {"layers", prov.layers},
                  {"checkpoints", prov.checkpoints},
                  {"files", em.schema}};
  const auto side = out_dir / "figures.json";
  std::ofstream(side, std::ios::trunc) << sidecar.dump(2) << '\n';
  em.written.push_back(side);
  std::sort(em.written.begin(), em.written.end());
  return em.written;
}

}  // namespace abx
