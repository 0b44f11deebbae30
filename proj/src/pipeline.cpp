#include "abx/pipeline.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "abx/analysis.hpp"
#include "abx/corpus.hpp"
#include "abx/embedding_store.hpp"
#include "abx/error.hpp"
#include "abx/report.hpp"
#include "abx/retrieval.hpp"
#include "abx/rng.hpp"
#include "abx/tables.hpp"
#include "abx/work_pool.hpp"

namespace abx {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool is_all(const std::string& v) { return v.empty() || v == "all"; }

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  if (is_all(text)) return out;
  for (const auto& s : split_csv(text)) out.push_back(static_cast<T>(std::stoll(s)));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw error("not a boolean: '" + v + "'");
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const pair_skipped_error*>(&e)) return "pair_skipped";
  if (dynamic_cast<const missing_matrix_error*>(&e)) return "missing_matrix";
  if (dynamic_cast<const lookup_error*>(&e)) return "lookup";
  if (dynamic_cast<const coverage_error*>(&e)) return "coverage";
  if (dynamic_cast<const stats_error*>(&e)) return "stats";
  if (dynamic_cast<const invariant_error*>(&e)) return "invariant";
  if (dynamic_cast<const io_error*>(&e)) return "io";
  if (dynamic_cast<const format_error*>(&e)) return "format";
  return "error";
}

std::string cell_label(const cell_spec& c) {
  return std::string(to_string(c.mode)) + "/" + c.lang1 + "-" + c.lang2 + "/ckpt " + std::to_string(c.checkpoint) +
         "/layer " + std::to_string(c.layer);
}

json correlation_json(const correlation_result& c) {
  return {{"method", to_string(c.method)}, {"r", c.r}, {"p_value", c.p_value}, {"n", c.n}};
}

}  // namespace

void apply_config_value(run_config& c, const std::string& key, const std::string& value) {
  if (key == "store") c.store = value;
  else if (key == "corpus" || key == "corpus_index") c.corpus = value;
  else if (key == "languages") c.languages = is_all(value) ? std::vector<std::string>{} : split_csv(value);
  else if (key == "layers") c.layers = parse_list<int>(value);
  else if (key == "checkpoints") c.checkpoints = parse_list<std::int64_t>(value);
  else if (key == "exclude_checkpoints" || key == "exclude") {
    auto v = parse_list<std::int64_t>(value);
    c.exclude_checkpoints = {v.begin(), v.end()};
  } else if (key == "modes") {
    c.modes.clear();
    for (const auto& m : split_csv(value)) c.modes.push_back(parse_mode(m));
  } else if (key == "n_triplets") c.n_triplets = std::stoull(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "out") c.out = value;
  else if (key == "jobs") c.jobs = std::stoull(value);
  else if (key == "retrieval") c.retrieval = parse_bool(value);
  else if (key == "retrieval_layer") {
    if (value == "last" || value.empty()) c.retrieval_layer.reset();
    else c.retrieval_layer = std::stoi(value);
  } else if (key == "accuracy") c.accuracy = value;
  else if (key == "transfer") c.transfer = value;
  else if (key == "final_checkpoint") c.final_checkpoint = std::stoll(value);
  else if (key == "figures") c.figures = parse_bool(value);
  else throw error("unknown config key '" + key + "'");
}

run_config load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  run_config c;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw format_error("config " + path.string() + ": " + e.what());
    }
    for (const auto& [key, v] : j.items()) {
      std::string value;
      if (v.is_array()) {
        for (const auto& item : v) {
          if (!value.empty()) value += ",";
          value += item.is_string() ? item.get<std::string>() : item.dump();
        }
      } else if (v.is_string()) {
        value = v.get<std::string>();
      } else {
        value = v.dump();
      }
      apply_config_value(c, key, value);
    }
  } else {
    std::istringstream lines(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(lines, line)) {
      ++no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw format_error(path.string() + ":" + std::to_string(no) + ": expected key=value");
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
      };
      apply_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }
  // Relative paths in a config file resolve against its directory.
  const auto base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.store);
  resolve(c.corpus);
  resolve(c.out);
  if (c.accuracy) resolve(*c.accuracy);
  if (c.transfer) resolve(*c.transfer);
  return c;
}

run_plan plan_run(const run_config& config) {
  if (config.store.empty()) throw error("config: store manifest path is required");
  if (config.corpus.empty()) throw error("config: corpus path is required");
  if (config.n_triplets == 0) throw error("config: n_triplets must be positive");
  const auto manifest = read_manifest(config.store);
  run_plan plan;

  if (config.languages.empty()) {
    const auto index = load_index_or_corpus(config.corpus);
    for (const auto& l : manifest.languages) {
      if (index.has_language(l)) plan.languages.push_back(l);
    }
  } else {
    for (const auto& l : config.languages) {
      if (std::find(manifest.languages.begin(), manifest.languages.end(), l) == manifest.languages.end()) {
        throw unknown_language_error("language '" + l + "' is not in the store");
      }
    }
    plan.languages = config.languages;
  }
  std::sort(plan.languages.begin(), plan.languages.end());
  plan.languages.erase(std::unique(plan.languages.begin(), plan.languages.end()), plan.languages.end());

  plan.layers = config.layers.empty() ? manifest.layers : config.layers;
  std::sort(plan.layers.begin(), plan.layers.end());
  for (auto c : config.checkpoints.empty() ? manifest.checkpoints : config.checkpoints) {
    if (!config.exclude_checkpoints.contains(c)) plan.checkpoints.push_back(c);
  }
  std::sort(plan.checkpoints.begin(), plan.checkpoints.end());
  if (plan.layers.empty() || plan.checkpoints.empty()) throw error("empty layer or checkpoint set");

  auto modes = config.modes;
  std::sort(modes.begin(), modes.end());
  for (auto mode : modes) {
    for (std::size_t i = 0; i < plan.languages.size(); ++i) {
      for (std::size_t k = i + 1; k < plan.languages.size(); ++k) {
        for (auto ckpt : plan.checkpoints) {
          for (int layer : plan.layers) {
            cell_spec cell{mode, plan.languages[i], plan.languages[k], layer, ckpt};
            plan.cells.push_back({cell, cell_seed(config.seed, cell)});
          }
        }
      }
    }
  }
  return plan;
}

void print_plan(const run_plan& plan, std::ostream& out) {
  out << "languages:";
  for (const auto& l : plan.languages) out << ' ' << l;
  out << "\nlayers:";
  for (int l : plan.layers) out << ' ' << l;
  out << "\ncheckpoints:";
  for (auto c : plan.checkpoints) out << ' ' << c;
  out << "\ncells: " << plan.cells.size() << '\n';
  for (const auto& pc : plan.cells) out << cell_label(pc.cell) << " seed=" << pc.seed << '\n';
}

run_result run(const run_config& config) {
  run_result result;
  fs::create_directories(config.out);

  static std::atomic<int> run_counter{0};
  auto log = spdlog::basic_logger_mt("abx-run-" + std::to_string(run_counter++), (config.out / "run.log").string(),
                                     true);
  log->set_pattern(R"({"time":"%Y-%m-%dT%H:%M:%S.%e","level":"%l","msg":%v})");
  log->flush_on(spdlog::level::info);
  auto quoted = [](const std::string& s) { return json(s).dump(); };
  struct drop_logger {
    std::string name;
    ~drop_logger() { spdlog::drop(name); }
  } dropper{log->name()};

  auto record_error = [&](std::string stage, std::string cell, const std::exception& e) {
    result.errors.push_back({std::move(stage), std::move(cell), error_kind(e), e.what()});
    log->warn(quoted(result.errors.back().stage + " " + result.errors.back().cell + ": " + e.what()));
  };
  auto write_table = [&](const csv_table& t, const std::string& name) {
    write_csv(t, config.out / name);
    result.files.push_back(config.out / name);
  };

  auto finish = [&]() -> run_result& {
    json errs = json::array();
    for (const auto& e : result.errors) {
      errs.push_back({{"stage", e.stage}, {"cell", e.cell}, {"kind", e.kind}, {"message", e.message}});
    }
    std::ofstream(config.out / "errors.json", std::ios::trunc) << errs.dump(2) << '\n';
    result.files.push_back(config.out / "errors.json");
    result.files.push_back(config.out / "run.log");
    json files = json::array();
    std::sort(result.files.begin(), result.files.end());
    for (const auto& f : result.files) files.push_back(fs::relative(f, config.out).string());
    files.push_back("run_manifest.json");
    std::ofstream(config.out / "run_manifest.json", std::ios::trunc)
        << json({{"engine_version", kEngineVersion},
                 {"rng_algorithm", kRngAlgorithm},
                 {"exit_status", result.exit_status},
                 {"files", files}})
               .dump(2)
        << '\n';
    result.files.push_back(config.out / "run_manifest.json");
    if (result.exit_status == 0 && !result.errors.empty()) result.exit_status = 2;
    log->info(quoted("run finished with " + std::to_string(result.errors.size()) + " errors"));
    return result;
  };

  std::optional<embedding_store> store;
  alignment_index index;
  run_plan plan;
  try {
    plan = plan_run(config);
    store.emplace(embedding_store::open(config.store));
    index = load_index_or_corpus(config.corpus, plan.languages);
  } catch (const std::exception& e) {
    record_error("setup", "", e);
    result.exit_status = 1;
    return finish();
  }
  log->info(quoted("planned " + std::to_string(plan.cells.size()) + " cells over " +
                   std::to_string(plan.languages.size()) + " languages, jobs=" + std::to_string(config.jobs)));

  // Score every cell; failures stay confined to their slot.
  struct cell_outcome {
    std::optional<abx_record> record;
    std::string error_what;
    std::string error_kind_name;
    double seconds = 0.0;
  };
  std::vector<cell_outcome> outcomes(plan.cells.size());
  parallel_for_index(plan.cells.size(), config.jobs, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      outcomes[i].record = score_cell(*store, index, plan.cells[i].cell, config.n_triplets, plan.cells[i].seed);
    } catch (const std::exception& e) {
      outcomes[i].error_what = e.what();
      outcomes[i].error_kind_name = error_kind(e);
    }
    outcomes[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<abx_record> records;
  std::map<triplet_mode, std::set<std::pair<std::string, std::string>>> skipped;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto label = cell_label(plan.cells[i].cell);
    if (outcomes[i].record) {
      records.push_back(*outcomes[i].record);
      log->info(json({{"cell", label}, {"score", outcomes[i].record->score}, {"seconds", outcomes[i].seconds}})
                    .dump());
    } else {
      result.errors.push_back({"score", label, outcomes[i].error_kind_name, outcomes[i].error_what});
      if (outcomes[i].error_kind_name == "pair_skipped") {
        const auto& c = plan.cells[i].cell;
        skipped[c.mode].insert(std::minmax(c.lang1, c.lang2));
      }
      log->warn(quoted("score " + label + ": " + outcomes[i].error_what));
    }
  }
  sort_records(records);
  write_table(records_table(records), "scores.csv");
  write_records_jsonl(records, config.out / "scores.jsonl");
  result.files.push_back(config.out / "scores.jsonl");

  // Layer averages for complete groups only.
  std::vector<abx_record> averaged;
  {
    std::map<std::tuple<triplet_mode, std::string, std::string, std::int64_t>, std::vector<abx_record>> groups;
    for (const auto& r : records) groups[{r.mode, r.lang1, r.lang2, r.checkpoint}].push_back(r);
    for (const auto& [k, recs] : groups) {
      try {
        averaged.push_back(average_over_layers(recs, plan.layers));
      } catch (const std::exception& e) {
        record_error("layer-average", std::string(to_string(std::get<0>(k))) + "/" + std::get<1>(k) + "-" +
                                          std::get<2>(k) + "/ckpt " + std::to_string(std::get<3>(k)),
                     e);
      }
    }
  }
  sort_records(averaged);
  write_table(records_table(averaged), "scores_avg.csv");

  std::vector<global_language_score> globals;
  for (auto mode : config.modes) {
    for (auto ckpt : plan.checkpoints) {
      for (int scope : {kAveragedLayer, plan.layers.back()}) {
        try {
          auto g = global_language_scores(scope == kAveragedLayer ? averaged : records, mode, ckpt, scope,
                                          plan.languages, skipped[mode]);
          globals.insert(globals.end(), g.begin(), g.end());
        } catch (const std::exception& e) {
          record_error("global-scores",
                       std::string(to_string(mode)) + "/ckpt " + std::to_string(ckpt) + "/layer " + layer_text(scope),
                       e);
        }
      }
    }
  }
  write_table(global_scores_table(globals), "global_scores.csv");

  const std::int64_t final_ckpt = config.final_checkpoint.value_or(plan.checkpoints.back());
  json analysis = json::object();

  if (config.retrieval) {
    const int rlayer = config.retrieval_layer.value_or(plan.layers.back());
    struct pair_job {
      std::string l1, l2;
      std::int64_t ckpt;
    };
    std::vector<pair_job> jobs;
    for (auto ckpt : plan.checkpoints) {
      for (std::size_t i = 0; i < plan.languages.size(); ++i) {
        for (std::size_t k = i + 1; k < plan.languages.size(); ++k) {
          jobs.push_back({plan.languages[i], plan.languages[k], ckpt});
        }
      }
    }
    std::vector<std::optional<retrieval_result>> rres(jobs.size());
    std::vector<std::string> rerr(jobs.size());
    parallel_for_index(jobs.size(), config.jobs, [&](std::size_t i) {
      try {
        rres[i] = retrieval_top1(*store, index, jobs[i].l1, jobs[i].l2, rlayer, jobs[i].ckpt);
      } catch (const std::exception& e) {
        rerr[i] = error_kind(e) + "\n" + e.what();
      }
    });
    std::vector<retrieval_result> retrieval;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (rres[i]) {
        retrieval.push_back(*rres[i]);
      } else {
        const auto nl = rerr[i].find('\n');
        result.errors.push_back({"retrieval",
                                 jobs[i].l1 + "-" + jobs[i].l2 + "/ckpt " + std::to_string(jobs[i].ckpt) + "/layer " +
                                     std::to_string(rlayer),
                                 rerr[i].substr(0, nl), rerr[i].substr(nl + 1)});
      }
    }
    write_table(retrieval_table(retrieval), "retrieval.csv");

    if (std::find(config.modes.begin(), config.modes.end(), triplet_mode::md) != config.modes.end()) {
      try {
        std::vector<abx_record> md;
        for (const auto& r : averaged) {
          if (r.mode == triplet_mode::md && r.checkpoint == final_ckpt) md.push_back(r);
        }
        std::vector<retrieval_result> rr;
        for (const auto& r : retrieval) {
          if (r.checkpoint == final_ckpt) rr.push_back(r);
        }
        const auto corr = correlate_md_retrieval(md, rr);
        analysis["md_vs_retrieval"] = {{"checkpoint", final_ckpt},
                                       {"md_layer", "avg"},
                                       {"retrieval_layer", rlayer},
                                       {"pearson", correlation_json(corr.pearson)},
                                       {"spearman", correlation_json(corr.spearman)}};
      } catch (const std::exception& e) {
        record_error("correlate-md-retrieval", "ckpt " + std::to_string(final_ckpt), e);
      }
    }
  }

  const bool have_ld = std::find(config.modes.begin(), config.modes.end(), triplet_mode::ld) != config.modes.end();
  const bool have_md = std::find(config.modes.begin(), config.modes.end(), triplet_mode::md) != config.modes.end();
  if (have_ld && have_md) {
    try {
      std::vector<double> ld, md;
      const auto ldp = pair_scores(averaged, triplet_mode::ld, final_ckpt);
      const auto mdp = pair_scores(averaged, triplet_mode::md, final_ckpt);
      for (const auto& [k, v] : ldp) {
        auto it = mdp.find(k);
        if (it == mdp.end()) continue;
        ld.push_back(v);
        md.push_back(it->second);
      }
      analysis["ld_vs_md_final"] = {{"checkpoint", final_ckpt},
                                    {"pearson", correlation_json(pearson(ld, md))},
                                    {"spearman", correlation_json(spearman(ld, md))}};
      ld.clear();
      md.clear();
      for (const auto& a : averaged) {
        if (a.mode != triplet_mode::ld) continue;
        for (const auto& b : averaged) {
          if (b.mode == triplet_mode::md && b.lang1 == a.lang1 && b.lang2 == a.lang2 && b.checkpoint == a.checkpoint) {
            ld.push_back(a.score);
            md.push_back(b.score);
          }
        }
      }
      analysis["ld_vs_md_all_checkpoints"] = {{"pearson", correlation_json(pearson(ld, md))},
                                              {"spearman", correlation_json(spearman(ld, md))}};
    } catch (const std::exception& e) {
      record_error("correlate-ld-md", "", e);
    }
  }

  std::vector<accuracy_point> accuracy_points;
  std::vector<transfer_point> transfer_points;
  std::vector<double> win_rates;
  if (config.accuracy && have_ld && have_md) {
    try {
      const auto acc = read_accuracy_table(*config.accuracy);
      for (const auto& [lang, row] : acc) {
        for (const auto& [c, v] : row) accuracy_points.push_back({lang, c, v});
      }
      const auto ld = series_from_global(globals, triplet_mode::ld);
      const auto md = series_from_global(globals, triplet_mode::md);
      for (const char* scope : {"avg", "last"}) {
        try {
          const auto reg = regress_accuracy(acc, ld, md, checkpoint_scope::parse(scope));
          write_table(regression_table(reg), std::string("regression_") + scope + ".csv");
        } catch (const std::exception& e) {
          record_error("regress", scope, e);
        }
      }
      const auto sel = select_checkpoint_by_ld(ld, acc, final_ckpt, config.exclude_checkpoints);
      csv_table t{{"language", "abx_checkpoint", "final_checkpoint", "best_checkpoint", "best_accuracy", "gap_abx",
                   "gap_final", "delta"},
                  {}};
      for (const auto& s : sel.languages) {
        t.rows.push_back({s.language, std::to_string(s.abx_checkpoint), std::to_string(s.final_checkpoint),
                          std::to_string(s.best_checkpoint), format_double(s.best_accuracy), format_double(s.gap_abx),
                          format_double(s.gap_final), format_double(s.delta)});
      }
      write_table(t, "checkpoint_selection.csv");
      json summary = {{"n_languages", sel.languages.size()},
                      {"n_improved", sel.n_improved},
                      {"n_worse", sel.n_worse},
                      {"mean_delta", sel.mean_delta},
                      {"sd_delta", sel.sd_delta}};
      if (sel.wilcoxon) {
        summary["wilcoxon"] = {{"W", sel.wilcoxon->statistic},
                               {"n_effective", sel.wilcoxon->n_effective},
                               {"p_value", sel.wilcoxon->p_value}};
      }
      analysis["checkpoint_selection"] = summary;
    } catch (const std::exception& e) {
      record_error("select-checkpoint", "", e);
    }
  }

  if (config.transfer && have_ld) {
    try {
      const auto transfer = read_transfer_table(*config.transfer);
      std::set<std::string> langs;
      for (const auto& [k, v] : transfer) {
        transfer_points.push_back({k.first, k.second, v});
        langs.insert(k.first);
        langs.insert(k.second);
      }
      source_selection_options opts;
      opts.seed = config.seed;
      const auto sel = select_source_by_ld({langs.begin(), langs.end()},
                                           pair_scores(averaged, triplet_mode::ld, final_ckpt), transfer, opts);
      csv_table t{{"target", "abx_source", "true_best_source", "abx_accuracy", "best_accuracy", "rank_of_abx_source",
                   "top1_hit", "top3_hit", "win_rate", "n_draws"},
                  {}};
      for (const auto& s : sel.targets) {
        t.rows.push_back({s.target, s.abx_source, s.true_best_source, format_double(s.abx_accuracy),
                          format_double(s.best_accuracy), std::to_string(s.rank_of_abx_source),
                          s.top_k_hit.at(1) ? "1" : "0", s.top_k_hit.at(3) ? "1" : "0", format_double(s.win_rate),
                          std::to_string(s.n_random_draws)});
        win_rates.push_back(s.win_rate);
      }
      write_table(t, "source_selection.csv");
      analysis["source_selection"] = {{"n_targets", sel.targets.size()},
                                      {"n_exact", sel.n_exact},
                                      {"n_top3", sel.n_top_k.at(3)},
                                      {"mean_win_rate", sel.mean_win_rate},
                                      {"sd_win_rate", sel.sd_win_rate}};
    } catch (const std::exception& e) {
      record_error("select-source", "", e);
    }
  }

  std::ofstream(config.out / "analysis.json", std::ios::trunc) << analysis.dump(2) << '\n';
  result.files.push_back(config.out / "analysis.json");

  if (config.figures && !records.empty()) {
    try {
      figure_inputs fin;
      fin.records = records;
      fin.layers = plan.layers;
      fin.accuracy = accuracy_points;
      fin.transfer = transfer_points;
      fin.win_rates = win_rates;
      provenance prov{std::string(kEngineVersion), config.seed, file_digest(config.store), plan.layers,
                      plan.checkpoints};
      auto files = emit_figure_data(fin, all_figure_kinds(), config.out / "figures", prov);
      result.files.insert(result.files.end(), files.begin(), files.end());
    } catch (const std::exception& e) {
      record_error("report", "", e);
    }
  }
  return finish();
}

}  // namespace abx
