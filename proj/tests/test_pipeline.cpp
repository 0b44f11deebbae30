#include <doctest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "abx/error.hpp"
#include "abx/pipeline.hpp"
#include "abx/tables.hpp"
#include "fixtures.hpp"

using namespace abx;
using abx::testing::temp_dir;
namespace fs = std::filesystem;

namespace {

struct pipeline_fixture {
  temp_dir dir{"abx-pipe"};
  run_config config;

  explicit pipeline_fixture(bool with_disjoint_language = false) {
    abx::testing::store_spec spec;
    spec.checkpoints = {1000, 1500, 2000};
    spec.layers = {0, 1, 2};
    spec.dim = 8;
    const std::vector<std::string> langs = {"de", "en", "fr", "sw"};
    spec.meanings = abx::testing::full_alignment(langs, 12);
    if (with_disjoint_language) {
      for (meaning_id id = 100; id < 106; ++id) spec.meanings["zu"].push_back(id);
    }
    config.store = abx::testing::write_store(dir / "store", spec, abx::testing::gaussian_vectors(3, 8));
    config.corpus = abx::testing::write_corpus(dir / "corpus.jsonl", spec.meanings);

    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u;
    std::ofstream acc(dir / "accuracy.csv");
    acc << "language,checkpoint,accuracy\n";
    for (const auto& l : langs) {
      for (auto c : spec.checkpoints) acc << l << ',' << c << ',' << u(gen) << '\n';
    }
    std::ofstream tr(dir / "transfer.csv");
    tr << "source,target,accuracy\n";
    for (const auto& s : langs) {
      for (const auto& t : langs) {
        if (s != t) tr << s << ',' << t << ',' << u(gen) << '\n';
      }
    }
    config.accuracy = dir / "accuracy.csv";
    config.transfer = dir / "transfer.csv";
    config.n_triplets = 1000;
    config.seed = 42;
    config.out = dir / "out";
  }
};

}  // namespace

TEST_CASE("full synthetic pipeline writes every table") {
  pipeline_fixture f;
  const auto result = run(f.config);
  CHECK(result.exit_status == 0);
  CHECK(result.errors.empty());
  for (const char* name : {"scores.csv", "scores_avg.csv", "global_scores.csv", "retrieval.csv", "regression_avg.csv",
                           "regression_last.csv", "checkpoint_selection.csv", "source_selection.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(f.config.out / name));
    CHECK_FALSE(read_csv(f.config.out / name).rows.empty());
  }
  for (const auto& entry : fs::directory_iterator(f.config.out / "figures")) {
    if (entry.path().extension() == ".csv") {
      CAPTURE(entry.path().string());
      CHECK_FALSE(read_csv(entry.path()).rows.empty());
    }
  }
  // 2 modes x 6 pairs x 3 checkpoints x 3 layers.
  CHECK(read_csv(f.config.out / "scores.csv").rows.size() == 108);
  const auto analysis = nlohmann::json::parse(abx::testing::read_file(f.config.out / "analysis.json"));
  CHECK(analysis.contains("md_vs_retrieval"));
  CHECK(analysis.contains("ld_vs_md_final"));
  const auto manifest = nlohmann::json::parse(abx::testing::read_file(f.config.out / "run_manifest.json"));
  CHECK(manifest["rng_algorithm"] == "splitmix64-ctr/v1");
}

TEST_CASE("a language sharing no meanings is skipped and the run continues") {
  pipeline_fixture f(true);
  const auto result = run(f.config);
  CHECK(result.exit_status == 2);
  std::size_t skipped = 0;
  for (const auto& e : result.errors) {
    if (e.kind == "pair_skipped") {
      ++skipped;
      CHECK(e.cell.find("zu") != std::string::npos);
    }
  }
  // 4 pairs with zu x 2 modes x 3 checkpoints x 3 layers, plus retrieval at 3 checkpoints.
  CHECK(skipped == 4 * 2 * 3 * 3 + 4 * 3);
  CHECK(read_csv(f.config.out / "scores.csv").rows.size() == 108);
  const auto globals = read_csv(f.config.out / "global_scores.csv");
  CHECK_FALSE(globals.rows.empty());
  for (std::size_t i = 0; i < globals.rows.size(); ++i) CHECK(globals.at(i, "language") != "zu");
  const auto errs = nlohmann::json::parse(abx::testing::read_file(f.config.out / "errors.json"));
  CHECK(errs.size() == result.errors.size());
}

TEST_CASE("excluded checkpoints are absent from every table") {
  pipeline_fixture f;
  f.config.exclude_checkpoints = {1500};
  const auto result = run(f.config);
  CHECK(result.exit_status == 0);
  for (const auto& path : result.files) {
    if (path.extension() != ".csv") continue;
    const auto t = read_csv(path);
    for (const char* col : {"checkpoint", "abx_checkpoint", "best_checkpoint", "final_checkpoint"}) {
      if (!t.has_column(col)) continue;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CAPTURE(path.string());
        CHECK(t.at(i, col) != "1500");
      }
    }
  }
  CHECK(read_csv(f.config.out / "scores.csv").rows.size() == 72);
}

TEST_CASE("output tables do not depend on the number of jobs") {
  pipeline_fixture f;
  f.config.out = f.dir / "serial";
  f.config.jobs = 1;
  REQUIRE(run(f.config).exit_status == 0);
  f.config.out = f.dir / "parallel";
  f.config.jobs = 4;
  REQUIRE(run(f.config).exit_status == 0);
  for (const char* name : {"scores.csv", "scores.jsonl", "scores_avg.csv", "global_scores.csv", "retrieval.csv",
                           "checkpoint_selection.csv", "source_selection.csv", "analysis.json"}) {
    CAPTURE(name);
    CHECK(abx::testing::read_file(f.dir / "serial" / name) == abx::testing::read_file(f.dir / "parallel" / name));
  }
}

TEST_CASE("config files accept JSON and key=value forms") {
  temp_dir dir;
  std::ofstream(dir / "a.json") << R"({"store": "s/manifest.json", "corpus": "c.jsonl", "layers": [0, 2],
    "modes": ["ld", "baseline-md"], "n_triplets": 500, "exclude_checkpoints": [7], "jobs": 2})";
  const auto a = load_run_config(dir / "a.json");
  CHECK(a.store == dir / "s/manifest.json");
  CHECK(a.layers == std::vector<int>{0, 2});
  CHECK(a.modes == std::vector<triplet_mode>{triplet_mode::ld, triplet_mode::baseline_md});
  CHECK(a.n_triplets == 500);
  CHECK(a.exclude_checkpoints.contains(7));
  CHECK(a.jobs == 2);

  std::ofstream(dir / "b.conf") << "# comment\nstore = s/manifest.json\ncorpus = c.jsonl\nlayers = 1,3\nseed = 9\n";
  const auto b = load_run_config(dir / "b.conf");
  CHECK(b.layers == std::vector<int>{1, 3});
  CHECK(b.seed == 9);

  run_config c;
  CHECK_THROWS_AS(apply_config_value(c, "colour", "blue"), error);
}

TEST_CASE("dry-run plan lists seeded cells in order") {
  pipeline_fixture f;
  f.config.exclude_checkpoints = {1500};
  const auto plan = plan_run(f.config);
  CHECK(plan.checkpoints == std::vector<std::int64_t>{1000, 2000});
  CHECK(plan.cells.size() == 2 * 6 * 2 * 3);
  std::ostringstream out;
  print_plan(plan, out);
  CHECK(out.str().find("seed=") != std::string::npos);
}
