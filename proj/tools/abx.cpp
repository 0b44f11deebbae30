// abx: command-line front end for the ABX discrimination engine.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "abx/analysis.hpp"
#include "abx/corpus.hpp"
#include "abx/embedding_store.hpp"
#include "abx/error.hpp"
#include "abx/pipeline.hpp"
#include "abx/report.hpp"
#include "abx/retrieval.hpp"
#include "abx/scorer.hpp"
#include "abx/selection.hpp"
#include "abx/tables.hpp"
#include "abx/work_pool.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> int_list(const std::string& text, const std::vector<T>& all) {
  if (text.empty() || text == "all") return all;
  std::vector<T> out;
  for (const auto& s : split(text)) out.push_back(static_cast<T>(std::stoll(s)));
  return out;
}

std::vector<std::pair<std::string, std::string>> pair_list(const std::string& text,
                                                           const std::vector<std::string>& languages) {
  std::vector<std::pair<std::string, std::string>> out;
  if (text.empty() || text == "all") {
    for (std::size_t i = 0; i < languages.size(); ++i) {
      for (std::size_t k = i + 1; k < languages.size(); ++k) out.emplace_back(languages[i], languages[k]);
    }
    return out;
  }
  for (const auto& p : split(text)) {
    const auto dash = p.find('-');
    if (dash == std::string::npos) throw abx::error("pair '" + p + "' must look like L1-L2");
    out.emplace_back(p.substr(0, dash), p.substr(dash + 1));
  }
  return out;
}

void emit_table(const abx::csv_table& t, const std::string& out) {
  if (out.empty() || out == "-") {
    abx::write_csv(t, std::cout);
  } else {
    abx::write_csv(t, fs::path(out));
  }
}

// "path:column" -> (path, column)
std::pair<std::string, std::string> table_column(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) throw abx::error("expected <table>:<column>, got '" + spec + "'");
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

json corr_json(const abx::correlation_result& c) {
  return {{"method", abx::to_string(c.method)}, {"r", c.r}, {"p_value", c.p_value}, {"n", c.n}};
}

json regression_json(const abx::accuracy_regression& reg) {
  const char* names[] = {"intercept", "ld", "md"};
  json terms = json::array();
  for (std::size_t j = 0; j < reg.fit.coefficients.size(); ++j) {
    terms.push_back({{"term", names[j]},
                     {"coefficient", reg.fit.coefficients[j]},
                     {"std_error", reg.fit.std_errors[j]},
                     {"t", reg.fit.t_stats[j]},
                     {"p_value", reg.fit.p_values[j]}});
  }
  return {{"checkpoint_scope", reg.scope.label()},
          {"terms", terms},
          {"r_squared", reg.fit.r_squared},
          {"n", reg.fit.n},
          {"k", reg.fit.k}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABX discrimination engine for multilingual sentence embeddings"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build an alignment index from a line-delimited JSON corpus");
  std::string corpus_path, languages_csv, index_out;
  ingest->add_option("--corpus", corpus_path, "Corpus file (.jsonl)")->required();
  ingest->add_option("--languages", languages_csv, "Comma-separated language filter");
  ingest->add_option("--out", index_out, "Write the index JSON here");

  // score
  auto* score = app.add_subcommand("score", "Score ABX cells");
  std::string store_path, index_path, mode_text = "ld", pairs_text = "all", layers_text = "all",
                                      ckpts_text = "all", out_dir = "abx-scores", dump_path;
  std::uint64_t n_triplets = 100000, seed = 0;
  std::size_t jobs = 1;
  bool exhaustive = false;
  score->add_option("--store", store_path, "Store manifest")->required();
  score->add_option("--corpus-index", index_path, "Saved index (.json) or corpus (.jsonl)")->required();
  score->add_option("--mode", mode_text, "ld|md|baseline-ld|baseline-md (comma list allowed)");
  score->add_option("--pairs", pairs_text, "all or L1-L2,...");
  score->add_option("--layers", layers_text, "all or comma list");
  score->add_option("--checkpoints", ckpts_text, "all or comma list");
  score->add_option("--n-triplets", n_triplets, "Triplets per cell");
  score->add_option("--seed", seed, "Master seed");
  score->add_option("--out", out_dir, "Output directory");
  score->add_option("--jobs", jobs, "Worker threads");
  score->add_option("--dump-triplets", dump_path, "Write sampled triplets as JSON lines");
  score->add_flag("--exhaustive", exhaustive, "Score every valid triplet instead of sampling");

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Cross-lingual top-1 retrieval accuracy");
  std::string layer_text = "last", retrieve_out;
  retrieve->add_option("--store", store_path, "Store manifest")->required();
  retrieve->add_option("--corpus-index", index_path, "Saved index (.json) or corpus (.jsonl)")->required();
  retrieve->add_option("--layer", layer_text, "last or layer number");
  retrieve->add_option("--pairs", pairs_text, "all or L1-L2,...");
  retrieve->add_option("--checkpoints", ckpts_text, "all or comma list");
  retrieve->add_option("--jobs", jobs, "Worker threads");
  retrieve->add_option("--out", retrieve_out, "Output CSV (default stdout)");

  // correlate
  auto* correlate = app.add_subcommand("correlate", "Pearson and Spearman correlation between two table columns");
  std::string x_spec, y_spec, join_on, group_by, corr_out;
  correlate->add_option("--x", x_spec, "<table>:<column>")->required();
  correlate->add_option("--y", y_spec, "<table>:<column>")->required();
  correlate->add_option("--join-on", join_on, "Key columns (default: shared key columns)");
  correlate->add_option("--group-by", group_by, "Correlate separately per value of these columns");
  correlate->add_option("--out", corr_out, "Output JSON (default stdout)");

  // regress
  auto* regress = app.add_subcommand("regress", "OLS of accuracy on LD and MD");
  std::string acc_path, ld_path, md_path, join_mode = "language", scope_text = "last", reg_out;
  regress->add_option("--accuracy", acc_path, "Accuracy table (language or source,target keyed)")->required();
  regress->add_option("--ld", ld_path, "LD table (global scores or pair records)")->required();
  regress->add_option("--md", md_path, "MD table (global scores or pair records)")->required();
  regress->add_option("--join-on", join_mode, "language|pair")->check(CLI::IsMember({"language", "pair"}));
  regress->add_option("--checkpoint", scope_text, "last|avg|<step>");
  regress->add_option("--out", reg_out, "Output prefix: writes <out>.csv and <out>.json (default stdout JSON)");

  // select-checkpoint
  auto* selck = app.add_subcommand("select-checkpoint", "Per-language checkpoint choice by minimal LD");
  std::int64_t final_ckpt = 0;
  std::string exclude_text, selck_out;
  selck->add_option("--ld", ld_path, "Global scores table")->required();
  selck->add_option("--accuracy", acc_path, "Accuracy table")->required();
  selck->add_option("--final", final_ckpt, "Final checkpoint")->required();
  selck->add_option("--exclude", exclude_text, "Comma list of excluded checkpoints");
  selck->add_option("--out", selck_out, "Output prefix: writes <out>.csv and <out>.json");

  // select-source
  auto* selsrc = app.add_subcommand("select-source", "Per-target source choice by minimal pair LD");
  std::string transfer_path, topk_text = "1,3", selsrc_out;
  std::size_t n_draws = 100;
  std::int64_t at_ckpt = -1;
  bool exclude_self = false;
  selsrc->add_option("--ld", ld_path, "Pair records table (layer-averaged)")->required();
  selsrc->add_option("--transfer", transfer_path, "Transfer matrix CSV source,target,accuracy")->required();
  selsrc->add_option("--top-k", topk_text, "Comma list of k");
  selsrc->add_option("--n-draws", n_draws, "Random draws per target");
  selsrc->add_option("--seed", seed, "Seed for random draws");
  selsrc->add_option("--checkpoint", at_ckpt, "Checkpoint of the LD records (default: last)");
  selsrc->add_flag("--exclude-self", exclude_self, "Keep the ABX source out of the random pool");
  selsrc->add_option("--out", selsrc_out, "Output prefix: writes <out>.csv and <out>.json");

  // report
  auto* report = app.add_subcommand("report", "Emit tidy figure data from score records");
  std::string records_dir, figures_text = "all", report_out = "figures", winrates_path;
  report->add_option("--records", records_dir, "Directory holding scores.csv")->required();
  report->add_option("--figures", figures_text, "all or comma list of figure kinds");
  report->add_option("--out", report_out, "Output directory");
  report->add_option("--layers", layers_text, "Layer set for averaging (default all present)");
  report->add_option("--accuracy", acc_path, "Accuracy table for the LD-accuracy scatter");
  report->add_option("--transfer", transfer_path, "Transfer table for the LD-transfer scatter");
  report->add_option("--win-rates", winrates_path, "source_selection.csv for the win-rate histogram");
  report->add_option("--store", store_path, "Store manifest (recorded as a hash)");
  report->add_option("--seed", seed, "Master seed to record");

  // run
  auto* runcmd = app.add_subcommand("run", "Run the whole pipeline from a configuration file");
  std::string config_path;
  std::vector<std::string> overrides;
  bool dry_run = false;
  std::size_t run_jobs = 0;
  runcmd->add_option("--config", config_path, "JSON or key=value config file")->required();
  runcmd->add_option("--set", overrides, "Override a config field: key=value (repeatable)");
  runcmd->add_option("--jobs", run_jobs, "Worker threads");
  runcmd->add_flag("--dry-run", dry_run, "Print the cell plan and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      std::optional<std::vector<std::string>> filter;
      if (!languages_csv.empty()) filter = split(languages_csv);
      const auto index = abx::ingest_corpus(corpus_path, filter);
      if (!index_out.empty()) abx::save_index(index, index_out);
      std::cout << abx::index_summary_json(index) << '\n';
      return 0;
    }

    if (*score) {
      const auto store = abx::embedding_store::open(store_path);
      const auto index = abx::load_index_or_corpus(index_path);
      std::vector<abx::triplet_mode> modes;
      for (const auto& m : split(mode_text)) modes.push_back(abx::parse_mode(m));
      const auto layers = int_list<int>(layers_text, store.manifest().layers);
      const auto ckpts = int_list<std::int64_t>(ckpts_text, store.manifest().checkpoints);
      std::vector<std::string> langs;
      for (const auto& l : store.manifest().languages) {
        if (index.has_language(l)) langs.push_back(l);
      }
      std::vector<abx::cell_spec> cells;
      for (auto mode : modes) {
        for (const auto& [l1, l2] : pair_list(pairs_text, langs)) {
          for (auto c : ckpts) {
            for (int layer : layers) cells.push_back({mode, l1, l2, layer, c});
          }
        }
      }
      if (!dump_path.empty()) {
        std::ofstream dump(dump_path, std::ios::trunc);
        for (const auto& cell : cells) {
          const auto [lo, hi] = std::minmax(cell.lang1, cell.lang2);
          try {
            for (const auto& t : abx::sample_triplets(index, cell.mode, lo, hi, n_triplets,
                                                      abx::cell_seed(seed, cell))) {
              abx::write_triplet_jsonl(dump, t);
            }
          } catch (const abx::pair_skipped_error&) {
          }
        }
      }
      std::vector<std::optional<abx::abx_record>> recs(cells.size());
      std::vector<std::string> errs(cells.size());
      abx::parallel_for_index(cells.size(), jobs, [&](std::size_t i) {
        try {
          recs[i] = exhaustive ? abx::score_cell_exhaustive(store, index, cells[i])
                               : abx::score_cell(store, index, cells[i], n_triplets, abx::cell_seed(seed, cells[i]));
        } catch (const std::exception& e) {
          errs[i] = e.what();
        }
      });
      std::vector<abx::abx_record> records;
      int status = 0;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (recs[i]) {
          records.push_back(*recs[i]);
        } else {
          std::cerr << "error: " << errs[i] << '\n';
          status = 2;
        }
      }
      abx::sort_records(records);
      fs::create_directories(out_dir);
      abx::write_csv(abx::records_table(records), fs::path(out_dir) / "scores.csv");
      abx::write_records_jsonl(records, fs::path(out_dir) / "scores.jsonl");
      return status;
    }

    if (*retrieve) {
      const auto store = abx::embedding_store::open(store_path);
      const auto index = abx::load_index_or_corpus(index_path);
      const int layer = layer_text == "last" ? store.manifest().layers.back() : std::stoi(layer_text);
      std::vector<std::string> langs;
      for (const auto& l : store.manifest().languages) {
        if (index.has_language(l)) langs.push_back(l);
      }
      struct job {
        std::string l1, l2;
        std::int64_t c;
      };
      std::vector<job> todo;
      for (auto c : int_list<std::int64_t>(ckpts_text, store.manifest().checkpoints)) {
        for (const auto& [l1, l2] : pair_list(pairs_text, langs)) todo.push_back({l1, l2, c});
      }
      std::vector<std::optional<abx::retrieval_result>> res(todo.size());
      std::vector<std::string> errs(todo.size());
      abx::parallel_for_index(todo.size(), jobs, [&](std::size_t i) {
        try {
          res[i] = abx::retrieval_top1(store, index, todo[i].l1, todo[i].l2, layer, todo[i].c);
        } catch (const std::exception& e) {
          errs[i] = e.what();
        }
      });
      std::vector<abx::retrieval_result> results;
      int status = 0;
      for (std::size_t i = 0; i < todo.size(); ++i) {
        if (res[i]) {
          results.push_back(*res[i]);
        } else {
          std::cerr << "error: " << errs[i] << '\n';
          status = 2;
        }
      }
      emit_table(abx::retrieval_table(results), retrieve_out);
      return status;
    }

    if (*correlate) {
      const auto [xp, xc] = table_column(x_spec);
      const auto [yp, yc] = table_column(y_spec);
      const auto xt = abx::read_csv(xp);
      const auto yt = abx::read_csv(yp);
      std::vector<std::string> keys;
      if (!join_on.empty()) {
        keys = split(join_on);
      } else {
        for (const auto& h : xt.header) {
          static const std::set<std::string> key_like = {"mode",   "lang1",  "lang2",      "language",
                                                         "source", "target", "checkpoint", "layer"};
          if (key_like.contains(h) && yt.has_column(h) && h != xc && h != yc) keys.push_back(h);
        }
      }
      const auto groups = split(group_by);
      auto key_of = [](const abx::csv_table& t, std::size_t row, const std::vector<std::string>& cols) {
        std::string k;
        for (const auto& c : cols) k += t.at(row, c) + "\x1f";
        return k;
      };
      std::map<std::string, std::string> ykeyed;
      for (std::size_t i = 0; i < yt.rows.size(); ++i) ykeyed[key_of(yt, i, keys)] = yt.at(i, yc);
      std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
      std::size_t unmatched = 0;
      for (std::size_t i = 0; i < xt.rows.size(); ++i) {
        auto it = ykeyed.find(key_of(xt, i, keys));
        if (it == ykeyed.end()) {
          ++unmatched;
          continue;
        }
        auto& s = series[key_of(xt, i, groups)];
        s.first.push_back(abx::parse_double(xt.at(i, xc)));
        s.second.push_back(abx::parse_double(it->second));
      }
      json out = json::array();
      for (const auto& [g, s] : series) {
        json entry = {{"group", split(g, '\x1f')}, {"n", s.first.size()}};
        entry["pearson"] = corr_json(abx::pearson(s.first, s.second));
        entry["spearman"] = corr_json(abx::spearman(s.first, s.second));
        out.push_back(entry);
      }
      json doc = {{"x", x_spec}, {"y", y_spec}, {"join_on", keys}, {"group_by", groups}, {"unmatched_x_rows", unmatched},
                  {"results", out}};
      if (corr_out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        std::ofstream(corr_out, std::ios::trunc) << doc.dump(2) << '\n';
      }
      return 0;
    }

    if (*regress) {
      abx::accuracy_regression reg;
      if (join_mode == "language") {
        const auto ld = abx::global_scores_from_table(abx::read_csv(ld_path));
        const auto md = abx::global_scores_from_table(abx::read_csv(md_path));
        reg = abx::regress_accuracy(abx::read_accuracy_table(acc_path), abx::series_from_global(ld, abx::triplet_mode::ld),
                                    abx::series_from_global(md, abx::triplet_mode::md),
                                    abx::checkpoint_scope::parse(scope_text));
      } else {
        const auto ldr = abx::records_from_table(abx::read_csv(ld_path));
        const auto mdr = abx::records_from_table(abx::read_csv(md_path));
        std::int64_t c = 0;
        for (const auto& r : ldr) c = std::max(c, r.checkpoint);
        if (scope_text != "last") c = std::stoll(scope_text);
        reg = abx::regress_transfer(abx::read_transfer_table(acc_path),
                                    abx::pair_scores(ldr, abx::triplet_mode::ld, c),
                                    abx::pair_scores(mdr, abx::triplet_mode::md, c));
        reg.scope = {abx::checkpoint_scope::kind::at, c};
      }
      if (reg_out.empty()) {
        std::cout << regression_json(reg).dump(2) << '\n';
      } else {
        abx::write_csv(abx::regression_table(reg), fs::path(reg_out + ".csv"));
        std::ofstream(reg_out + ".json", std::ios::trunc) << regression_json(reg).dump(2) << '\n';
      }
      return 0;
    }

    if (*selck) {
      const auto globals = abx::global_scores_from_table(abx::read_csv(ld_path));
      std::set<std::int64_t> excluded;
      for (auto c : int_list<std::int64_t>(exclude_text, {})) excluded.insert(c);
      const auto sel = abx::select_checkpoint_by_ld(abx::series_from_global(globals, abx::triplet_mode::ld),
                                                    abx::read_accuracy_table(acc_path), final_ckpt, excluded);
      abx::csv_table t{{"language", "abx_checkpoint", "final_checkpoint", "best_checkpoint", "delta"}, {}};
      for (const auto& s : sel.languages) {
        t.rows.push_back({s.language, std::to_string(s.abx_checkpoint), std::to_string(s.final_checkpoint),
                          std::to_string(s.best_checkpoint), abx::format_double(s.delta)});
      }
      json summary = {{"n_languages", sel.languages.size()}, {"n_improved", sel.n_improved},
                      {"mean_delta", sel.mean_delta},         {"sd_delta", sel.sd_delta}};
      if (sel.wilcoxon) summary["wilcoxon_p"] = sel.wilcoxon->p_value;
      if (selck_out.empty()) {
        abx::write_csv(t, std::cout);
        std::cout << summary.dump(2) << '\n';
      } else {
        abx::write_csv(t, fs::path(selck_out + ".csv"));
        std::ofstream(selck_out + ".json", std::ios::trunc) << summary.dump(2) << '\n';
      }
      return 0;
    }

    if (*selsrc) {
      const auto records = abx::records_from_table(abx::read_csv(ld_path));
      std::int64_t c = at_ckpt;
      if (c < 0) {
        for (const auto& r : records) c = std::max(c, r.checkpoint);
      }
      const auto transfer = abx::read_transfer_table(transfer_path);
      std::set<std::string> langs;
      for (const auto& [k, v] : transfer) {
        langs.insert(k.first);
        langs.insert(k.second);
      }
      abx::source_selection_options opts;
      opts.k_list.clear();
      for (const auto& k : split(topk_text)) opts.k_list.push_back(std::stoul(k));
      opts.n_draws = n_draws;
      opts.seed = seed;
      opts.include_self_in_pool = !exclude_self;
      const auto sel = abx::select_source_by_ld({langs.begin(), langs.end()},
                                                abx::pair_scores(records, abx::triplet_mode::ld, c), transfer, opts);
      abx::csv_table t{{"target", "abx_source", "true_best_source", "rank_of_abx_source", "win_rate"}, {}};
      for (const auto& s : sel.targets) {
        t.rows.push_back({s.target, s.abx_source, s.true_best_source, std::to_string(s.rank_of_abx_source),
                          abx::format_double(s.win_rate)});
      }
      json topk = json::object();
      for (const auto& [k, n] : sel.n_top_k) topk[std::to_string(k)] = n;
      json summary = {{"n_targets", sel.targets.size()}, {"n_exact", sel.n_exact}, {"n_top_k", topk},
                      {"mean_win_rate", sel.mean_win_rate}, {"sd_win_rate", sel.sd_win_rate}};
      if (selsrc_out.empty()) {
        abx::write_csv(t, std::cout);
        std::cout << summary.dump(2) << '\n';
      } else {
        abx::write_csv(t, fs::path(selsrc_out + ".csv"));
        std::ofstream(selsrc_out + ".json", std::ios::trunc) << summary.dump(2) << '\n';
      }
      return 0;
    }

    if (*report) {
      abx::figure_inputs in;
      in.records = abx::records_from_table(abx::read_csv(fs::path(records_dir) / "scores.csv"));
      in.layers = int_list<int>(layers_text, {});
      if (!acc_path.empty()) {
        for (const auto& [lang, row] : abx::read_accuracy_table(acc_path)) {
          for (const auto& [c, v] : row) in.accuracy.push_back({lang, c, v});
        }
      }
      if (!transfer_path.empty()) {
        for (const auto& [k, v] : abx::read_transfer_table(transfer_path)) in.transfer.push_back({k.first, k.second, v});
      }
      if (!winrates_path.empty()) {
        const auto t = abx::read_csv(winrates_path);
        for (std::size_t i = 0; i < t.rows.size(); ++i) in.win_rates.push_back(abx::parse_double(t.at(i, "win_rate")));
      }
      std::vector<abx::figure_kind> kinds;
      if (figures_text == "all") {
        kinds = abx::all_figure_kinds();
      } else {
        for (const auto& k : split(figures_text)) kinds.push_back(abx::parse_figure_kind(k));
      }
      abx::provenance prov;
      prov.engine_version = std::string(abx::kEngineVersion);
      prov.master_seed = seed;
      if (!store_path.empty()) prov.store_manifest_hash = abx::file_digest(store_path);
      std::set<int> layers;
      std::set<std::int64_t> ckpts;
      for (const auto& r : in.records) {
        layers.insert(r.layer);
        ckpts.insert(r.checkpoint);
      }
      prov.layers = in.layers.empty() ? std::vector<int>(layers.begin(), layers.end()) : in.layers;
      prov.checkpoints.assign(ckpts.begin(), ckpts.end());
      for (const auto& f : abx::emit_figure_data(in, kinds, report_out, prov)) std::cout << f.string() << '\n';
      return 0;
    }

    if (*runcmd) {
      auto config = abx::load_run_config(config_path);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw abx::error("--set expects key=value, got '" + o + "'");
        abx::apply_config_value(config, o.substr(0, eq), o.substr(eq + 1));
      }
      if (run_jobs > 0) config.jobs = run_jobs;
      if (dry_run) {
        abx::print_plan(abx::plan_run(config), std::cout);
        return 0;
      }
      const auto result = abx::run(config);
      json errs = json::array();
      for (const auto& e : result.errors) {
        errs.push_back({{"stage", e.stage}, {"cell", e.cell}, {"kind", e.kind}, {"message", e.message}});
      }
      std::cout << json({{"exit_status", result.exit_status}, {"out", config.out.string()}, {"errors", errs}}).dump(2)
                << '\n';
      return result.exit_status;
    }
  } catch (const std::exception& e) {
    std::cerr << json({{"error", e.what()}}).dump() << '\n';
    return 1;
  }
  return 0;
}
