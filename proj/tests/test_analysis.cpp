#include <doctest.h>

#include <fstream>
#include <random>

#include "abx/analysis.hpp"
#include "abx/error.hpp"
#include "abx/report.hpp"
#include "abx/tables.hpp"
#include "fixtures.hpp"

using namespace abx;
using abx::testing::temp_dir;

TEST_CASE("format_double round trips") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("x1"), format_error);
}

TEST_CASE("records table round trips") {
  abx_record r;
  r.mode = triplet_mode::baseline_md;
  r.lang1 = "de";
  r.lang2 = "en";
  r.layer = kAveragedLayer;
  r.checkpoint = 12000;
  r.score = 0.1 + 0.2;
  r.n_triplets = 101;
  r.tie_count = 3;
  r.seed = 0xffffffffffffffffULL;
  r.score_dir[0] = 0.25;
  r.score_dir[1] = 1.0 / 3;
  r.n_dir[0] = 51;
  r.n_dir[1] = 50;
  temp_dir dir;
  write_csv(records_table({r}), dir / "s.csv");
  const auto back = records_from_table(read_csv(dir / "s.csv"));
  REQUIRE(back.size() == 1);
  CHECK(back[0].mode == r.mode);
  CHECK(back[0].layer == kAveragedLayer);
  CHECK(back[0].score == r.score);
  CHECK(back[0].seed == r.seed);
  CHECK(back[0].score_dir[1] == r.score_dir[1]);
  CHECK(back[0].n_dir[0] == 51);
}

TEST_CASE("csv reader rejects ragged rows and unknown columns") {
  temp_dir dir;
  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
  CHECK_THROWS_AS(read_csv(dir / "bad.csv"), format_error);
  const csv_table t{{"a"}, {{"1"}}};
  CHECK_THROWS_AS(t.column("b"), format_error);
}

TEST_CASE("accuracy tables average repeated seeds") {
  temp_dir dir;
  std::ofstream(dir / "acc.csv") << "language,checkpoint,seed,accuracy\nen,1,0,0.5\nen,1,1,0.7\nfr,1,0,0.4\n";
  const auto acc = read_accuracy_table(dir / "acc.csv");
  CHECK(acc.at("en").at(1) == doctest::Approx(0.6));
  CHECK(acc.at("fr").at(1) == 0.4);
  std::ofstream(dir / "tr.csv") << "source,target,accuracy\nen,fr,0.8\n";
  CHECK(read_transfer_table(dir / "tr.csv").at({"en", "fr"}) == 0.8);
}

TEST_CASE("checkpoint scope parsing") {
  CHECK(checkpoint_scope::parse("last").what == checkpoint_scope::kind::last);
  CHECK(checkpoint_scope::parse("avg").what == checkpoint_scope::kind::average);
  const auto at = checkpoint_scope::parse("500");
  CHECK(at.what == checkpoint_scope::kind::at);
  CHECK(at.checkpoint == 500);
  CHECK_THROWS_AS(checkpoint_scope::parse("soon"), error);
}

TEST_CASE("accuracy regression uses the requested checkpoint scope") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u;
  checkpoint_series acc, ld, md;
  std::vector<double> y, xl, xm, ya, xla, xma;
  for (int l = 0; l < 12; ++l) {
    const std::string lang = "q" + std::to_string(l);
    double sa = 0, sl = 0, sm = 0;
    for (std::int64_t c : {10, 20, 30}) {
      ld[lang][c] = u(gen);
      md[lang][c] = u(gen);
      acc[lang][c] = 0.3 - 0.5 * ld[lang][c] + 0.2 * md[lang][c] + 0.05 * u(gen);
      sa += acc[lang][c];
      sl += ld[lang][c];
      sm += md[lang][c];
    }
    y.push_back(acc[lang][30]);
    xl.push_back(ld[lang][30]);
    xm.push_back(md[lang][30]);
    ya.push_back(sa / 3);
    xla.push_back(sl / 3);
    xma.push_back(sm / 3);
  }
  const auto last = regress_accuracy(acc, ld, md, checkpoint_scope::parse("last"));
  const auto direct = ols_regress(y, {xl, xm});
  CHECK(last.languages.size() == 12);
  for (int j = 0; j < 3; ++j) CHECK(last.fit.coefficients[j] == doctest::Approx(direct.coefficients[j]).epsilon(1e-12));
  const auto avg = regress_accuracy(acc, ld, md, checkpoint_scope::parse("avg"));
  const auto direct_avg = ols_regress(ya, {xla, xma});
  for (int j = 0; j < 3; ++j) {
    CHECK(avg.fit.coefficients[j] == doctest::Approx(direct_avg.coefficients[j]).epsilon(1e-12));
  }
  const auto table = regression_table(last);
  CHECK(table.rows.size() >= 3);
  CHECK(table.at(0, "term") == "intercept");
}

TEST_CASE("per-row normalization") {
  heatmap_matrix m;
  m.row_labels = {"a", "b"};
  m.column_labels = {"1", "2", "3"};
  m.values = {{2, 4, 6}, {3, 3, 3}};
  const auto n = normalize_per_row(m);
  CHECK(n.values[0] == std::vector<double>{0, 0.5, 1});
  CHECK(n.values[1] == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(n.tag == normalization::per_row_minmax);
  m.values[1][1] = std::nan("");
  CHECK_THROWS_AS(normalize_per_row(m), coverage_error);

  std::mt19937_64 gen(36);
  std::uniform_real_distribution<double> u;
  heatmap_matrix big;
  big.values.assign(36, std::vector<double>(20));
  for (auto& row : big.values) {
    for (auto& v : row) v = u(gen);
  }
  for (const auto& row : normalize_per_row(big).values) {
    CHECK(*std::min_element(row.begin(), row.end()) == 0.0);
    CHECK(*std::max_element(row.begin(), row.end()) == 1.0);
  }
}

namespace {

std::vector<abx_record> synthetic_records(const std::vector<triplet_mode>& modes, const std::vector<std::int64_t>& ckpts,
                                          const std::vector<int>& layers) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u;
  std::vector<abx_record> out;
  const std::vector<std::pair<std::string, std::string>> pairs = {{"a", "b"}, {"a", "c"}, {"b", "c"}};
  for (auto mode : modes) {
    for (const auto& [l1, l2] : pairs) {
      for (auto c : ckpts) {
        for (int layer : layers) {
          abx_record r;
          r.mode = mode;
          r.lang1 = l1;
          r.lang2 = l2;
          r.checkpoint = c;
          r.layer = layer;
          r.score = u(gen);
          r.n_triplets = 10;
          out.push_back(r);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("figure data row counts and normalized grid") {
  temp_dir dir;
  figure_inputs in;
  in.records = synthetic_records({triplet_mode::ld, triplet_mode::md}, {100, 200, 300}, {0, 1});
  in.win_rates = {0.0, 0.45, 1.0};
  const auto files = emit_figure_data(in, all_figure_kinds(), dir.path(), {"0.1.0", 7, "h", {0, 1}, {100, 200, 300}});
  CHECK(read_csv(dir / "checkpoints_curve.csv").rows.size() == 6);
  CHECK(read_csv(dir / "checkpoint_layer_grid.csv").rows.size() == 2 * 3 * 2);
  CHECK(read_csv(dir / "layers_curve.csv").rows.size() == 2 * 2);
  CHECK(read_csv(dir / "ld_md_scatter.csv").rows.size() == 3 * 3);
  const auto hist = read_csv(dir / "winrate_hist.csv");
  CHECK(hist.rows.size() == 10);
  CHECK(hist.at(9, "count") == "1");

  const auto raw = read_csv(dir / "language_checkpoint_grid_raw.csv");
  const auto norm = read_csv(dir / "language_checkpoint_grid_normalized.csv");
  REQUIRE(raw.rows.size() == norm.rows.size());
  // Re-derive the normalization from the raw grid, row by row.
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    rows[raw.at(i, "mode") + "/" + raw.at(i, "layer") + "/" + raw.at(i, "language")].push_back(i);
  }
  for (const auto& [key, idx] : rows) {
    CHECK(idx.size() == 3);
    heatmap_matrix one;
    one.values.emplace_back();
    for (auto i : idx) one.values[0].push_back(parse_double(raw.at(i, "score")));
    const auto expect = normalize_per_row(one).values[0];
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK(parse_double(norm.at(idx[k], "score")) == expect[k]);
  }
  CHECK(std::filesystem::exists(dir / "figures.json"));
  CHECK(std::is_sorted(files.begin(), files.end()));
}

TEST_CASE("figure data refuses incomplete grids") {
  temp_dir dir;
  figure_inputs in;
  in.records = synthetic_records({triplet_mode::ld}, {100, 200}, {0, 1});
  in.records.pop_back();
  try {
    emit_figure_data(in, {figure_kind::checkpoint_layer_grid}, dir.path(), {});
    FAIL("expected coverage_error");
  } catch (const coverage_error& e) {
    CHECK(std::string(e.what()).find("200") != std::string::npos);
  }
}
