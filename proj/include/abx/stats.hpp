#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace abx {

enum class correlation_method { pearson, spearman };

struct correlation_result {
  correlation_method method = correlation_method::pearson;
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

std::string_view to_string(correlation_method m) noexcept;

// Sample correlation with a two-sided p-value from t = r*sqrt((n-2)/(1-r^2))
// on n-2 degrees of freedom (p is 1 when n == 2, 0 when |r| == 1).
// Throws stats_error on length mismatch, n < 2 or zero variance.
correlation_result pearson(std::span<const double> x, std::span<const double> y);

// Pearson on average (fractional) ranks.
correlation_result spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks; ties share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> v);

// Two-sided p-value of a t statistic with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

struct regression_result {
  std::vector<double> coefficients;  // intercept first
  std::vector<double> std_errors;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  std::vector<double> fitted;
  std::vector<double> residuals;
  double r_squared = 0.0;
  double sigma2 = 0.0;  // residual variance estimate SSR / (n - k - 1)
  std::size_t n = 0;
  std::size_t k = 0;  // predictors, intercept excluded
};

// OLS of y on an intercept plus the given columns, solved by column-pivoted
// Householder QR. Throws stats_error when n <= k + 1, on ragged columns, or
// when the design is rank deficient.
regression_result ols_regress(std::span<const double> y, const std::vector<std::vector<double>>& columns);

enum class wilcoxon_method { automatic, exact, normal };

struct rank_test_result {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  std::size_t n_effective = 0;
  double p_value = 1.0;
  wilcoxon_method method = wilcoxon_method::exact;  // exact or normal, never automatic
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

// Two-sided signed-rank test. Zero differences are dropped; tied magnitudes
// share average ranks. `automatic` uses the exact null distribution when
// n_effective <= kWilcoxonExactMax and the continuity- and tie-corrected
// normal approximation otherwise. Throws stats_error if every difference is 0.
rank_test_result wilcoxon_signed_rank(std::span<const double> diffs,
                                      wilcoxon_method method = wilcoxon_method::automatic);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> v);

}  // namespace abx
