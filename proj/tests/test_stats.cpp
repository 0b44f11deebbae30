#include <doctest.h>

#include <cmath>
#include <random>

#include "abx/error.hpp"
#include "abx/stats.hpp"

using namespace abx;

namespace {

// Two-sided exact signed-rank p-value by listing all 2^n sign patterns.
// Ranks are doubled so tied magnitudes stay integral.
double brute_force_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (d != 0) nz.push_back(d);
  }
  const std::size_t n = nz.size();
  std::vector<long> rank2(n);
  for (std::size_t i = 0; i < n; ++i) {
    long below = 0, equal = 0;
    for (std::size_t k = 0; k < n; ++k) {
      below += std::abs(nz[k]) < std::abs(nz[i]);
      equal += std::abs(nz[k]) == std::abs(nz[i]);
    }
    rank2[i] = 2 * below + equal + 1;
  }
  long observed = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank2[i];
    if (nz[i] > 0) observed += rank2[i];
  }
  const double centre = total / 2.0;
  std::size_t extreme = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    long w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += rank2[i];
    }
    extreme += std::abs(w - centre) >= std::abs(observed - centre) - 1e-9;
  }
  return static_cast<double>(extreme) / static_cast<double>(1ULL << n);
}

}  // namespace

TEST_CASE("pearson closed forms") {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  CHECK(pearson(x, y).r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, y).p_value == 0.0);
  const std::vector<double> flat{5, 5, 5};
  CHECK_THROWS_AS(pearson(x, flat), stats_error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{2}), stats_error);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), stats_error);
  CHECK(pearson(std::vector<double>{1, 2}, std::vector<double>{3, 1}).p_value == 1.0);
}

TEST_CASE("pearson and spearman against reference values") {
  // Reference values from scipy.stats 1.15 pearsonr / spearmanr.
  const std::vector<double> v1{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
  const std::vector<double> v2{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
  const auto p = pearson(v1, v2);
  CHECK(p.r == doctest::Approx(-0.033621194725622014).epsilon(1e-12));
  CHECK(p.p_value == doctest::Approx(0.926536715854247).epsilon(1e-10));
  const auto s = spearman(v1, v2);
  CHECK(s.r == doctest::Approx(-0.16363636363636364).epsilon(1e-12));
  CHECK(s.p_value == doctest::Approx(0.6514773427962428).epsilon(1e-10));
  const std::vector<double> tied{17, 86, 60, 77, 47, 3, 70, 47, 88, 92};
  const auto st = spearman(tied, v2);
  CHECK(st.r == doctest::Approx(0.024316221747202587).epsilon(1e-12));
  CHECK(st.p_value == doctest::Approx(0.9468397049085097).epsilon(1e-10));
}

TEST_CASE("spearman on monotone and tied data") {
  const std::vector<double> x{1, 2, 3}, y{10, 100, 1000}, rev{1000, 100, 10};
  CHECK(spearman(x, y).r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, rev).r == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> tx{1, 1, 2}, ty{3, 3, 4};
  CHECK(average_ranks(tx) == std::vector<double>{1.5, 1.5, 3});
  CHECK(spearman(tx, ty).r == doctest::Approx(pearson(average_ranks(tx), average_ranks(ty)).r).epsilon(1e-15));
}

TEST_CASE("independent samples rarely correlate") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  int small_p = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1000), y(1000);
    for (auto& v : x) v = normal(gen);
    for (auto& v : y) v = normal(gen);
    const auto c = pearson(x, y);
    CHECK(std::abs(c.r) < 0.15);
    small_p += c.p_value < 0.05;
  }
  // About 10 of 200 expected under the null; 25 is more than four sd away.
  CHECK(small_p < 25);
}

TEST_CASE("ols recovers an exact line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 + 3 * v);
  const auto r = ols_regress(y, {x});
  CHECK(r.coefficients[0] == doctest::Approx(2).epsilon(1e-12));
  CHECK(r.coefficients[1] == doctest::Approx(3).epsilon(1e-12));
  CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  for (double e : r.residuals) CHECK(std::abs(e) < 1e-12);
}

TEST_CASE("ols against reference values") {
  // Reference values from statsmodels OLS.
  const std::vector<double> y{1.2, 2.3, 2.9, 4.8, 5.1, 5.9, 7.4, 8.1};
  const std::vector<double> a{0.1, 0.5, 0.3, 0.9, 1.1, 0.7, 1.6, 1.2};
  const std::vector<double> b{3.0, 2.0, 2.5, 1.0, 1.5, 0.5, 0.2, 0.9};
  const auto r = ols_regress(y, {a, b});
  const double beta[] = {4.62316059, 2.31801202, -1.21728979};
  const double se[] = {2.33808437, 1.5617106, 0.79115274};
  const double pv[] = {0.10493593, 0.19785752, 0.18451167};
  for (int j = 0; j < 3; ++j) {
    CHECK(r.coefficients[j] == doctest::Approx(beta[j]).epsilon(1e-7));
    CHECK(r.std_errors[j] == doctest::Approx(se[j]).epsilon(1e-7));
    CHECK(r.p_values[j] == doctest::Approx(pv[j]).epsilon(1e-6));
  }
  CHECK(r.r_squared == doctest::Approx(0.8614743009569674).epsilon(1e-12));
}

TEST_CASE("ols residuals are orthogonal to the design and R2 is corr(fitted, y)^2") {
  std::mt19937_64 gen(36);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(36), a(36), b(36);
    for (auto& v : y) v = normal(gen);
    for (auto& v : a) v = normal(gen);
    for (auto& v : b) v = normal(gen);
    const auto r = ols_regress(y, {a, b});
    double ya = 0, yb = 0, y1 = 0, na = 0, nb = 0, ne = 0, n1 = 36;
    for (std::size_t i = 0; i < 36; ++i) {
      ya += r.residuals[i] * a[i];
      yb += r.residuals[i] * b[i];
      y1 += r.residuals[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
      ne += r.residuals[i] * r.residuals[i];
    }
    CHECK(std::abs(ya) <= 1e-8 * std::sqrt(na * ne));
    CHECK(std::abs(yb) <= 1e-8 * std::sqrt(nb * ne));
    CHECK(std::abs(y1) <= 1e-8 * std::sqrt(n1 * ne));
    const double c = pearson(r.fitted, y).r;
    CHECK(r.r_squared == doctest::Approx(c * c).epsilon(1e-10));
  }
}

TEST_CASE("ols rejects degenerate designs") {
  const std::vector<double> y{1, 2, 3, 4, 5};
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK_THROWS_AS(ols_regress(y, {a, a}), stats_error);
  CHECK_THROWS_AS(ols_regress(std::vector<double>{1, 2, 3}, {{1, 2, 4}, {3, 1, 2}}), stats_error);
  CHECK_THROWS_AS(ols_regress(y, {{1, 2}}), stats_error);
}

TEST_CASE("wilcoxon exact closed forms") {
  const std::vector<double> six{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const auto r = wilcoxon_signed_rank(six);
  CHECK(r.method == wilcoxon_method::exact);
  CHECK(r.p_value == 0.03125);
  CHECK(r.statistic == 21);
  CHECK(brute_force_wilcoxon_p(six) == 0.03125);
  const std::vector<double> sym{0.7, -0.7};
  CHECK(wilcoxon_signed_rank(sym).p_value == 1.0);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{0, 0}), stats_error);
}

TEST_CASE("wilcoxon exact matches sign enumeration on random inputs with ties and zeros") {
  std::mt19937_64 gen(64);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen() % 14;
    std::vector<double> d(n);
    for (auto& v : d) v = static_cast<double>(static_cast<int>(gen() % 9) - 4);
    bool any = false;
    for (double v : d) any = any || v != 0;
    if (!any) continue;
    const auto r = wilcoxon_signed_rank(d, wilcoxon_method::exact);
    CHECK(r.p_value == doctest::Approx(brute_force_wilcoxon_p(d)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation against reference values") {
  // scipy.stats.wilcoxon(method="approx", correction=True).
  const std::vector<double> d{0.5, -1.2, 2.3, 3.1, -0.4, 1.7, 2.2, -2.5, 0.9, 1.1, 1.3, -0.6, 2.8,
                              3.3, 0.7, -1.9, 2.6, 1.4, 0.8, -0.3, 1.6, 2.1, -0.2, 3.0, 1.0};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.method == wilcoxon_method::normal);
  CHECK(r.statistic == 325 - 58);
  CHECK(r.p_value == doctest::Approx(0.005136937937857966).epsilon(1e-9));
  const std::vector<double> tied{1, 1, 2, 2, -3, 4, 5, 5, -1, 6};
  CHECK(wilcoxon_signed_rank(tied, wilcoxon_method::normal).p_value ==
        doctest::Approx(0.05186541479146726).epsilon(1e-9));
}

TEST_CASE("wilcoxon exact and normal agree near the switch-over size") {
  std::mt19937_64 gen(30);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(20);
    for (auto& v : d) v = normal(gen) + 0.3;
    const double e = wilcoxon_signed_rank(d, wilcoxon_method::exact).p_value;
    const double a = wilcoxon_signed_rank(d, wilcoxon_method::normal).p_value;
    CHECK(std::abs(e - a) < 0.02);
  }
}

TEST_CASE("mean and sample standard deviation") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5);
  CHECK(stddev(v) == doctest::Approx(std::sqrt(32.0 / 7)).epsilon(1e-15));
  CHECK(stddev(std::vector<double>{3}) == 0);
}
