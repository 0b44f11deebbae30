#include "abx/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "abx/error.hpp"

namespace abx {

std::string_view to_string(correlation_method m) noexcept {
  return m == correlation_method::pearson ? "pearson" : "spearman";
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t_distribution<double> dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    // Positions i..j-1 hold equal values: ranks i+1..j, mean (i+1+j)/2.
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

correlation_result pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw stats_error("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw stats_error("correlation needs at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw stats_error("correlation undefined: zero variance");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  correlation_result out{correlation_method::pearson, r, 1.0, n};
  if (n > 2) {
    const double df = static_cast<double>(n - 2);
    out.p_value = std::fabs(r) == 1.0 ? 0.0 : t_two_sided_p(r * std::sqrt(df / ((1.0 - r) * (1.0 + r))), df);
  }
  return out;
}

correlation_result spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw stats_error("correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  auto out = pearson(rx, ry);
  out.method = correlation_method::spearman;
  return out;
}

regression_result ols_regress(std::span<const double> y, const std::vector<std::vector<double>>& columns) {
  const std::size_t n = y.size();
  const std::size_t k = columns.size();
  const std::size_t p = k + 1;
  if (n <= p) {
    throw stats_error("regression needs n > k + 1 (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  }
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    target(i) = y[i];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (columns[c].size() != n) throw stats_error("design column " + std::to_string(c) + " has wrong length");
    for (std::size_t i = 0; i < n; ++i) design(i, c + 1) = columns[c][i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(p)) throw stats_error("design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(target);
  const Eigen::VectorXd fitted = design * beta;
  const Eigen::VectorXd resid = target - fitted;

  regression_result out;
  out.n = n;
  out.k = k;
  const double ssr = resid.squaredNorm();
  const double ybar = target.mean();
  const double sst = (target.array() - ybar).square().sum();
  if (sst == 0.0) throw stats_error("regression undefined: zero variance in y");
  out.r_squared = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
  const double df = static_cast<double>(n - p);
  out.sigma2 = ssr / df;

  // (X'X)^-1 = P R^-1 R^-T P' for X P = Q R.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                       static_cast<Eigen::Index>(p)));
  const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
  const auto perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * cov_perm * perm.transpose();

  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double se = std::sqrt(out.sigma2 * xtx_inv(jj, jj));
    const double t = se > 0.0 ? beta(jj) / se : std::copysign(INFINITY, beta(jj));
    out.coefficients.push_back(beta(jj));
    out.std_errors.push_back(se);
    out.t_stats.push_back(t);
    out.p_values.push_back(se > 0.0 ? t_two_sided_p(t, df) : (beta(jj) == 0.0 ? 1.0 : 0.0));
  }
  out.fitted.assign(fitted.data(), fitted.data() + n);
  out.residuals.assign(resid.data(), resid.data() + n);
  return out;
}

namespace {

// Null distribution of 2*W+ given doubled integer ranks: counts[s] is the
// number of sign assignments with doubled positive-rank sum s.
std::vector<double> doubled_sum_counts(const std::vector<std::uint64_t>& doubled_ranks) {
  const std::uint64_t total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), std::uint64_t{0});
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  std::uint64_t reach = 0;
  for (std::uint64_t r : doubled_ranks) {
    reach += r;
    for (std::uint64_t s = reach; s >= r; --s) {
      counts[s] += counts[s - r];
      if (s == r) break;
    }
  }
  return counts;
}

}  // namespace

rank_test_result wilcoxon_signed_rank(std::span<const double> diffs, wilcoxon_method method) {
  std::vector<double> nonzero;
  for (double d : diffs) {
    if (d != 0.0) nonzero.push_back(d);
  }
  if (nonzero.empty()) throw stats_error("Wilcoxon test undefined: all differences are zero");
  const std::size_t n = nonzero.size();
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::fabs(nonzero[i]);
  const auto ranks = average_ranks(mags);

  rank_test_result out;
  out.n_effective = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (nonzero[i] > 0.0) out.statistic += ranks[i];
  }
  if (method == wilcoxon_method::automatic) {
    method = n <= kWilcoxonExactMax ? wilcoxon_method::exact : wilcoxon_method::normal;
  }
  out.method = method;

  if (method == wilcoxon_method::exact) {
    if (n > 62) throw stats_error("exact Wilcoxon enumeration limited to 62 differences");
    std::vector<std::uint64_t> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = static_cast<std::uint64_t>(std::llround(2.0 * ranks[i]));
    const auto counts = doubled_sum_counts(doubled);
    const auto w2 = static_cast<std::uint64_t>(std::llround(2.0 * out.statistic));
    double le = 0.0, ge = 0.0;
    for (std::uint64_t s = 0; s < counts.size(); ++s) {
      if (s <= w2) le += counts[s];
      if (s >= w2) ge += counts[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    out.p_value = std::min(1.0, 2.0 * std::min(le, ge) / all);
    return out;
  }

  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::fabs(out.statistic - mu) - 0.5) / std::sqrt(var);
  boost::math::normal_distribution<double> norm;
  out.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(norm, z)), 0.0, 1.0);
  return out;
}

}  // namespace abx
