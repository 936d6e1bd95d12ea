#ifndef XSHIFT_STATS_HPP_
#define XSHIFT_STATS_HPP_

#include "xshift/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xshift {

enum class TestMethod { KS, Wasserstein1, PSI };

inline std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::KS: return "ks";
    case TestMethod::Wasserstein1: return "wasserstein";
    case TestMethod::PSI: return "psi";
  }
  return "?";
}

/// Outcome of a two-sample comparison. p_value is set for KS only.
struct TestResult {
  double statistic = 0.0;
  std::optional<double> p_value;
  TestMethod method = TestMethod::KS;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

inline constexpr int kDefaultPsiBins = 10;
inline constexpr double kPsiFloor = 1e-4;

namespace detail {

inline std::vector<double> sorted_checked(std::span<const double> v, std::size_t min_size, const char* what) {
  if (v.size() < min_size) {
    throw ConfigError(std::string(what) + ": need at least " + std::to_string(min_size) + " values");
  }
  if (!all_finite(v)) throw ConfigError(std::string(what) + ": non-finite input");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace detail

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
/// Below lambda = 1.18 the alternating series converges slowly, so the
/// equivalent theta-function form
///   1 - sqrt(2 pi)/lambda sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lambda^2))
/// is used instead. Terms are summed until they drop below 1e-12.
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  double q = 0.0;
  if (lambda < 1.18) {
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k < 1000; ++k) {
      const double m = 2.0 * k - 1.0;
      const double term = std::exp(-m * m * c);
      sum += term;
      if (term < 1e-12) break;
    }
    q = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
  } else {
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k < 1000; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      sum += sign * term;
      sign = -sign;
      if (term < 1e-12) break;
    }
    q = 2.0 * sum;
  }
  return std::clamp(q, 0.0, 1.0);
}

/// Asymptotic p-value of the two-sample statistic d with effective size n_a n_b / (n_a + n_b).
inline double ks_p_value(double d, std::size_t n_a, std::size_t n_b) {
  const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) / static_cast<double>(n_a + n_b);
  const double sq = std::sqrt(ne);
  return kolmogorov_survival(d * (sq + 0.12 + 0.11 / sq));
}

namespace detail {

inline TestResult ks_sorted(std::span<const double> sa, std::span<const double> sb) {
  const auto na = sa.size();
  const auto nb = sb.size();
  std::size_t i = 0;
  std::size_t j = 0;
  // Work in integer units of 1 / (na * nb) so D is exact up to the final division.
  std::uint64_t best = 0;
  while (i < na && j < nb) {
    const double v = std::min(sa[i], sb[j]);
    while (i < na && sa[i] == v) ++i;
    while (j < nb && sb[j] == v) ++j;
    const auto fa = static_cast<std::uint64_t>(i) * nb;
    const auto fb = static_cast<std::uint64_t>(j) * na;
    best = std::max(best, fa > fb ? fa - fb : fb - fa);
  }
  TestResult r;
  r.method = TestMethod::KS;
  r.n_a = na;
  r.n_b = nb;
  r.statistic = static_cast<double>(best) / (static_cast<double>(na) * static_cast<double>(nb));
  r.p_value = ks_p_value(r.statistic, na, nb);
  return r;
}

}  // namespace detail

/// D = sup |F_a - F_b| by a merged sweep over both sorted samples; tied values
/// are consumed together before the gap is measured.
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  return detail::ks_sorted(detail::sorted_checked(a, 2, "ks_two_sample"),
                           detail::sorted_checked(b, 2, "ks_two_sample"));
}

namespace detail {

inline TestResult wasserstein_sorted(std::span<const double> sa, std::span<const double> sb) {
  const auto na = sa.size();
  const auto nb = sb.size();
  std::size_t i = 0;
  std::size_t j = 0;
  double acc = 0.0;  // in units of 1 / (na * nb)
  double prev = std::min(sa.front(), sb.front());
  while (i < na || j < nb) {
    double v;
    if (j >= nb || (i < na && sa[i] <= sb[j])) {
      v = sa[i];
    } else {
      v = sb[j];
    }
    const auto fa = static_cast<std::int64_t>(i * nb);
    const auto fb = static_cast<std::int64_t>(j * na);
    const auto gap = fa > fb ? fa - fb : fb - fa;
    if (gap != 0) acc += static_cast<double>(gap) * (v - prev);
    prev = v;
    while (i < na && sa[i] == v) ++i;
    while (j < nb && sb[j] == v) ++j;
  }
  TestResult r;
  r.method = TestMethod::Wasserstein1;
  r.n_a = na;
  r.n_b = nb;
  r.statistic = acc / (static_cast<double>(na) * static_cast<double>(nb));
  return r;
}

}  // namespace detail

/// W1 = integral |F_a(x) - F_b(x)| dx over the merged support of both samples.
inline TestResult wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  return detail::wasserstein_sorted(detail::sorted_checked(a, 1, "wasserstein_1d"),
                                    detail::sorted_checked(b, 1, "wasserstein_1d"));
}

/// Quantile of sorted data with linear interpolation between order statistics.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline TestResult psi_sorted(std::span<const double> sa, std::span<const double> sb, int bins) {
  if (sa.front() == sa.back()) throw ConfigError("psi: reference sample is constant, bins are degenerate");

  std::vector<double> edges;
  for (int k = 1; k < bins; ++k) edges.push_back(quantile_sorted(sa, static_cast<double>(k) / bins));

  auto proportions = [&](std::span<const double> s) {
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double v : s) {
      const auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
      counts[k] += 1.0;
    }
    double total = 0.0;
    for (auto& c : counts) {
      c = std::max(c / static_cast<double>(s.size()), kPsiFloor);
      total += c;
    }
    for (auto& c : counts) c /= total;
    return counts;
  };
  const auto p = proportions(sa);
  const auto q = proportions(sb);
  double value = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) value += (p[k] - q[k]) * std::log(p[k] / q[k]);

  TestResult r;
  r.method = TestMethod::PSI;
  r.n_a = sa.size();
  r.n_b = sb.size();
  r.statistic = std::max(value, 0.0);
  return r;
}

}  // namespace detail

/// Population Stability Index of b against reference a. Inner bin edges are the
/// k/bins quantiles of a; proportions are floored at 1e-4 and renormalised.
inline TestResult psi(std::span<const double> a, std::span<const double> b, int bins = kDefaultPsiBins) {
  if (bins < 1) throw ConfigError("psi: bins must be positive");
  return detail::psi_sorted(detail::sorted_checked(a, static_cast<std::size_t>(bins), "psi"),
                            detail::sorted_checked(b, 1, "psi"), bins);
}

inline TestResult compare(std::span<const double> a, std::span<const double> b, TestMethod method,
                          int psi_bins = kDefaultPsiBins) {
  switch (method) {
    case TestMethod::KS: return ks_two_sample(a, b);
    case TestMethod::Wasserstein1: return wasserstein_1d(a, b);
    case TestMethod::PSI: return psi(a, b, psi_bins);
  }
  throw ConfigError("compare: unknown method");
}

/// A reference sample sorted once and compared against many others.
class ReferenceSample {
 public:
  explicit ReferenceSample(std::span<const double> values)
      : sorted_(detail::sorted_checked(values, 1, "ReferenceSample")) {}

  std::size_t size() const { return sorted_.size(); }

  TestResult compare(std::span<const double> other, TestMethod method, int psi_bins = kDefaultPsiBins) const {
    switch (method) {
      case TestMethod::KS:
        if (sorted_.size() < 2) throw ConfigError("ks_two_sample: need at least 2 values");
        return detail::ks_sorted(sorted_, detail::sorted_checked(other, 2, "ks_two_sample"));
      case TestMethod::Wasserstein1:
        return detail::wasserstein_sorted(sorted_, detail::sorted_checked(other, 1, "wasserstein_1d"));
      case TestMethod::PSI:
        if (psi_bins < 1 || sorted_.size() < static_cast<std::size_t>(psi_bins)) {
          throw ConfigError("psi: reference smaller than bin count");
        }
        return detail::psi_sorted(sorted_, detail::sorted_checked(other, 1, "psi"), psi_bins);
    }
    throw ConfigError("compare: unknown method");
  }

 private:
  std::vector<double> sorted_;
};

struct FeatureComparison {
  Eigen::Index feature = 0;
  TestResult result;
  /// p < alpha; set for KS only.
  std::optional<bool> distinct;
};

/// Column-wise comparison of two matrices with equal column counts.
inline std::vector<FeatureComparison> per_feature_compare(const DataMatrix& a, const DataMatrix& b, TestMethod method,
                                                          double alpha, int psi_bins = kDefaultPsiBins) {
  if (a.cols() != b.cols()) {
    throw ConfigError("per_feature_compare: column mismatch (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()) + ")");
  }
  std::vector<FeatureComparison> out;
  out.reserve(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    FeatureComparison fc;
    fc.feature = j;
    fc.result = compare(column(a, j), column(b, j), method, psi_bins);
    if (fc.result.p_value) fc.distinct = *fc.result.p_value < alpha;
    out.push_back(std::move(fc));
  }
  return out;
}

}  // namespace xshift

#endif  // XSHIFT_STATS_HPP_
