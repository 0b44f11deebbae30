#include <doctest.h>

#include <cmath>
#include <random>

#include "abx/distance.hpp"
#include "abx/error.hpp"
#include "abx/scorer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace abx;
using abx::testing::temp_dir;

namespace {

constexpr triplet_mode kAllModes[] = {triplet_mode::ld, triplet_mode::md, triplet_mode::baseline_ld,
                                      triplet_mode::baseline_md};

// Meaning vector plus a per-language offset `scale` times longer than it.
abx::testing::vector_fn planted_offsets(std::size_t dim, float scale) {
  const auto meaning = abx::testing::gaussian_vectors(10, dim);
  const auto offset = abx::testing::gaussian_vectors(20, dim);
  return [=](std::int64_t c, int layer, const std::string& lang, meaning_id id) {
    auto v = meaning(0, 0, "shared", id);
    double mn = 0;
    for (float f : v) mn += f * f;
    auto o = offset(c, layer, lang, 0);
    double on = 0;
    for (float f : o) on += f * f;
    const double k = scale * std::sqrt(mn / on);
    for (std::size_t i = 0; i < dim; ++i) v[i] += static_cast<float>(k * o[i]);
    return v;
  };
}

abx::testing::vector_fn one_hot() {
  return [](std::int64_t, int, const std::string&, meaning_id id) {
    std::vector<float> v(16, 0.0f);
    v[id % 16] = 1.0f;
    return v;
  };
}

struct fixture {
  temp_dir dir;
  alignment_index index;
  std::optional<embedding_store> store;

  fixture(const abx::testing::store_spec& spec, const abx::testing::vector_fn& fn)
      : index(alignment_index::from_lists(spec.meanings)),
        store(embedding_store::open(abx::testing::write_store(dir.path(), spec, fn))) {}
};

}  // namespace

TEST_CASE("cosine distance examples") {
  const std::vector<float> e1{1, 0}, e2{0, 1}, neg{-1, 0}, three{3, 0};
  CHECK(cosine_distance(e1, e1) == 0.0);
  CHECK(cosine_distance(e1, e2) == 1.0);
  CHECK(cosine_distance(e1, neg) == 2.0);
  CHECK(cosine_distance(three, e1) == 0.0);
  const std::vector<float> zero{0, 0}, longer{1, 0, 0};
  CHECK_THROWS_AS(cosine_distance(e1, zero), invariant_error);
  CHECK_THROWS_AS(cosine_distance(e1, longer), invariant_error);
}

TEST_CASE("score_triplet examples") {
  const std::vector<float> x{1, 0}, near{0.9f, 0.1f}, far{0, 1};
  CHECK(score_triplet(x, near, far) == 1.0);
  CHECK(score_triplet(x, far, near) == 0.0);
  CHECK(score_triplet(x, far, far) == 0.5);
}

TEST_CASE("planted language offsets give LD of exactly one at every layer") {
  abx::testing::store_spec spec;
  spec.layers = {0, 1, 2};
  spec.dim = 8;
  spec.meanings = abx::testing::full_alignment({"de", "en", "fr"}, 9);
  fixture f(spec, planted_offsets(8, 10.0f));
  for (int layer : spec.layers) {
    for (const auto& [a, b] : {std::pair{"de", "en"}, {"de", "fr"}, {"en", "fr"}}) {
      const cell_spec cell{triplet_mode::ld, a, b, layer, 0};
      CHECK(score_cell(*f.store, f.index, cell, 5000, 1).score == 1.0);
      CHECK(score_cell_exhaustive(*f.store, f.index, cell).score == 1.0);
    }
  }
}

TEST_CASE("shared orthonormal meanings give MD of exactly one") {
  abx::testing::store_spec spec;
  spec.dim = 16;
  spec.meanings = abx::testing::full_alignment({"en", "fr", "sw"}, 10);
  fixture f(spec, one_hot());
  const cell_spec cell{triplet_mode::md, "en", "sw", 0, 0};
  CHECK(score_cell(*f.store, f.index, cell, 5000, 9).score == 1.0);
  CHECK(score_cell_exhaustive(*f.store, f.index, cell).score == 1.0);
}

TEST_CASE("identical vectors everywhere score one half in every mode") {
  abx::testing::store_spec spec;
  spec.dim = 4;
  spec.meanings = abx::testing::full_alignment({"en", "fr"}, 5);
  fixture f(spec, [](auto, auto, const auto&, auto) { return std::vector<float>{1, 2, 3, 4}; });
  for (auto mode : kAllModes) {
    const auto r = score_cell(*f.store, f.index, {mode, "en", "fr", 0, 0}, 1000, 3);
    CHECK(r.score == 0.5);
    CHECK(r.tie_count == 1000);
    CHECK(score_cell_exhaustive(*f.store, f.index, {mode, "en", "fr", 0, 0}).score == 0.5);
  }
}

TEST_CASE("exhaustive score matches a brute-force oracle") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 10; ++trial) {
    abx::testing::store_spec spec;
    spec.dim = 2 + gen() % 15;
    abx::testing::meaning_lists lists;
    for (const std::string lang : {"aa", "bb"}) {
      for (meaning_id id = 0; id < 10; ++id) {
        if (gen() % 4 != 0) lists[lang].push_back(id);
      }
    }
    spec.meanings = lists;
    const auto fn = abx::testing::gaussian_vectors(gen(), spec.dim);
    fixture f(spec, fn);
    const auto shared = f.index.shared_meanings("aa", "bb");
    for (auto mode : kAllModes) {
      if (shared.size() < min_shared_meanings(mode)) continue;
      const auto r = score_cell_exhaustive(*f.store, f.index, {mode, "aa", "bb", 0, 0});
      CHECK(r.n_triplets == pool_size(mode, shared.size()));
      CHECK(r.score == doctest::Approx(abx::testing::naive_exhaustive_score(mode, "aa", "bb", shared, fn, 0, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampled score lies within three binomial sigma of the exhaustive score") {
  abx::testing::store_spec spec;
  spec.dim = 6;
  spec.meanings = abx::testing::full_alignment({"en", "fr"}, 7);
  fixture f(spec, abx::testing::gaussian_vectors(8, 6));
  const std::uint64_t n = 200000;
  for (auto mode : kAllModes) {
    const cell_spec cell{mode, "en", "fr", 0, 0};
    const double p = score_cell_exhaustive(*f.store, f.index, cell).score;
    const double s = score_cell(*f.store, f.index, cell, n, 77).score;
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    CHECK(std::abs(s - p) <= 3 * sigma + 1e-12);
  }
}

TEST_CASE("score record bookkeeping") {
  abx::testing::store_spec spec;
  spec.meanings = abx::testing::full_alignment({"en", "fr"}, 5);
  fixture f(spec, abx::testing::gaussian_vectors(4, 8));
  const auto a = score_cell(*f.store, f.index, {triplet_mode::ld, "fr", "en", 0, 0}, 1001, 5);
  const auto b = score_cell(*f.store, f.index, {triplet_mode::ld, "en", "fr", 0, 0}, 1001, 5);
  CHECK(a.lang1 == "en");
  CHECK(a.lang2 == "fr");
  CHECK(a.score == b.score);
  CHECK(a.n_triplets == 1001);
  CHECK(a.n_dir[0] == 501);
  CHECK(a.n_dir[1] == 500);
  CHECK(a.seed == 5);
  const double recombined = (a.score_dir[0] * a.n_dir[0] + a.score_dir[1] * a.n_dir[1]) / 1001;
  CHECK(a.score == doctest::Approx(recombined).epsilon(1e-12));
}

TEST_CASE("scoring surfaces missing matrices and skipped pairs") {
  abx::testing::store_spec spec;
  spec.meanings = {{"en", {1, 2, 3}}, {"fr", {3, 4}}};
  fixture f(spec, abx::testing::gaussian_vectors(4, 8));
  CHECK_THROWS_AS(score_cell(*f.store, f.index, {triplet_mode::ld, "en", "fr", 0, 0}, 10, 0), pair_skipped_error);
  const auto idx = alignment_index::from_lists({{"en", {1, 2, 3}}, {"sw", {1, 2, 3}}});
  CHECK_THROWS_AS(score_cell(*f.store, idx, {triplet_mode::ld, "en", "sw", 0, 0}, 10, 0), missing_matrix_error);
  CHECK_THROWS_AS(score_cell(*f.store, f.index, {triplet_mode::ld, "en", "fr", 4, 0}, 10, 0), error);
}

TEST_CASE("cell seeds depend on every coordinate but not on pair order") {
  const cell_spec base{triplet_mode::ld, "en", "fr", 3, 100};
  auto s = cell_seed(1, base);
  CHECK(s == cell_seed(1, {triplet_mode::ld, "fr", "en", 3, 100}));
  CHECK(s != cell_seed(2, base));
  CHECK(s != cell_seed(1, {triplet_mode::md, "en", "fr", 3, 100}));
  CHECK(s != cell_seed(1, {triplet_mode::ld, "en", "de", 3, 100}));
  CHECK(s != cell_seed(1, {triplet_mode::ld, "en", "fr", 4, 100}));
  CHECK(s != cell_seed(1, {triplet_mode::ld, "en", "fr", 3, 200}));
}

TEST_CASE("layer averaging") {
  auto rec = [](int layer, double score) {
    abx_record r;
    r.lang1 = "en";
    r.lang2 = "fr";
    r.layer = layer;
    r.score = score;
    r.n_triplets = 10;
    return r;
  };
  const auto avg = average_over_layers({rec(0, 1.0), rec(1, 0.5), rec(2, 0.0)}, {0, 1, 2});
  CHECK(avg.score == 0.5);
  CHECK(avg.layer == kAveragedLayer);
  CHECK(avg.n_triplets == 30);
  CHECK(average_over_layers({rec(4, 0.73)}, {4}).score == 0.73);
  CHECK_THROWS_AS(average_over_layers({rec(0, 1.0)}, {0, 1}), coverage_error);

  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u;
  std::vector<abx_record> recs;
  std::vector<int> layers;
  double sum = 0;
  for (int l = 0; l < 13; ++l) {
    recs.push_back(rec(l, u(gen)));
    layers.push_back(l);
    sum += recs.back().score;
  }
  CHECK(average_over_layers(recs, layers).score == doctest::Approx(sum / 13).epsilon(1e-15));
}

TEST_CASE("global language scores average each language's pairs") {
  auto rec = [](std::string a, std::string b, double s) {
    abx_record r;
    r.lang1 = std::move(a);
    r.lang2 = std::move(b);
    r.layer = kAveragedLayer;
    r.score = s;
    return r;
  };
  const std::vector<abx_record> recs = {rec("A", "B", 0.6), rec("A", "C", 0.8), rec("B", "C", 1.0)};
  const auto g = global_language_scores(recs, triplet_mode::ld, 0, kAveragedLayer, {"A", "B", "C"});
  REQUIRE(g.size() == 3);
  CHECK(g[0].score == doctest::Approx(0.7));
  CHECK(g[1].score == doctest::Approx(0.8));
  CHECK(g[2].score == doctest::Approx(0.9));
  CHECK(g[0].n_pairs == 2);
  CHECK_THROWS_AS(global_language_scores(recs, triplet_mode::ld, 0, kAveragedLayer, {"A", "B", "C", "D"}),
                  coverage_error);

  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 2; ++trial) {
    const std::vector<std::string> langs = {"a", "b", "c", "d", "e"};
    std::vector<abx_record> rs;
    std::map<std::string, std::vector<double>> by_lang;
    for (std::size_t i = 0; i < langs.size(); ++i) {
      for (std::size_t k = i + 1; k < langs.size(); ++k) {
        rs.push_back(rec(langs[i], langs[k], u(gen)));
        by_lang[langs[i]].push_back(rs.back().score);
        by_lang[langs[k]].push_back(rs.back().score);
      }
    }
    for (const auto& s : global_language_scores(rs, triplet_mode::ld, 0, kAveragedLayer, langs)) {
      double sum = 0;
      for (double v : by_lang[s.language]) sum += v;
      CHECK(s.score == doctest::Approx(sum / 4).epsilon(1e-14));
    }
  }
}
