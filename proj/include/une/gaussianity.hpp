#pragma once

// Univariate normality tests (Anderson-Darling, D'Agostino-Pearson,
// Shapiro-Wilk) and the random 1-D projection battery built on them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "une/error.hpp"
#include "une/latent_store.hpp"
#include "une/normal.hpp"
#include "une/parallel.hpp"

namespace une {

/// Stephens' 5% critical value for the corrected composite-normality A*^2.
inline constexpr double kAdCritical5 = 0.752;
inline constexpr double kPValueAlpha = 0.05;

struct AdResult {
  double statistic = 0.0;      ///< corrected A*^2 = A^2 (1 + 0.75/n + 2.25/n^2)
  double raw_statistic = 0.0;  ///< uncorrected A^2
  bool accept = false;         ///< statistic < 0.752
};

struct DpResult {
  double k2 = 0.0;
  double p_value = 0.0;
  double z_skew = 0.0;
  double z_kurt = 0.0;
  bool accept = false;  ///< p_value > 0.05
};

struct SwResult {
  double w = 0.0;
  double p_value = 0.0;
  bool accept = false;  ///< p_value > 0.05
};

namespace detail {

inline std::vector<double> sorted_copy(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return s;
}

inline void require_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw DataError("sample contains non-finite values");
  }
}

/// log Phi(z), with an asymptotic tail once erfc underflows.
inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal::cdf(z));
  const double z2 = z * z;
  // Mills-ratio series: Phi(z) ~ phi(z)/|z| * (1 - 1/z^2 + 3/z^4)
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

inline double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

/// Anderson-Darling test for normality with mean and variance estimated from
/// the sample.
inline AdResult anderson_darling(std::span<const double> sample) {
  detail::require_finite(sample);
  const std::size_t n = sample.size();
  if (n < 8) throw DegenerateSample("Anderson-Darling needs at least 8 points");
  const auto x = detail::sorted_copy(sample);
  if (x.front() == x.back()) throw DegenerateSample("zero-variance sample");

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw DegenerateSample("zero-variance sample");

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = (x[i] - mean) / sd;
    const double hi = (x[n - 1 - i] - mean) / sd;
    acc += static_cast<double>(2 * i + 1) * (detail::log_normal_cdf(lo) + detail::log_normal_cdf(-hi));
  }
  const double nd = static_cast<double>(n);
  AdResult r;
  r.raw_statistic = -nd - acc / nd;
  r.statistic = r.raw_statistic * (1.0 + 0.75 / nd + 2.25 / (nd * nd));
  r.accept = r.statistic < kAdCritical5;
  return r;
}

/// D'Agostino-Pearson omnibus K^2 test. Z_skew and Z_kurt use D'Agostino's
/// and Anscombe-Glynn's normalising transforms; p-value from chi^2(2).
inline DpResult dagostino_pearson(std::span<const double> sample) {
  detail::require_finite(sample);
  const std::size_t n_sz = sample.size();
  if (n_sz < 20) throw InsufficientData("D'Agostino-Pearson needs at least 20 points");
  const double n = static_cast<double>(n_sz);

  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : sample) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw DegenerateSample("zero-variance sample");
  const double b1 = m3 / std::pow(m2, 1.5);
  const double b2 = m4 / (m2 * m2);

  DpResult r;
  {
    const double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
    const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                         ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
    const double alpha = std::sqrt(2.0 / (w2 - 1.0));
    r.z_skew = delta * std::asinh(y / alpha);
  }
  {
    const double e = 3.0 * (n - 1.0) / (n + 1.0);
    const double var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    const double x = (b2 - e) / std::sqrt(var_b2);
    const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                              std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
    const double a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
    const double term1 = 1.0 - 2.0 / (9.0 * a);
    const double denom = 1.0 + x * std::sqrt(2.0 / (a - 4.0));
    if (denom == 0.0) throw DegenerateSample("kurtosis transform is singular for this sample");
    const double term2 = std::copysign(std::cbrt((1.0 - 2.0 / a) / std::abs(denom)), denom);
    r.z_kurt = (term1 - term2) / std::sqrt(2.0 / (9.0 * a));
  }
  r.k2 = r.z_skew * r.z_skew + r.z_kurt * r.z_kurt;
  r.p_value = std::exp(-0.5 * r.k2);
  r.accept = r.p_value > kPValueAlpha;
  return r;
}

/// Shapiro-Wilk coefficients a_1..a_{n/2} (Royston's AS R94), positive and
/// applied as sum a_i (x_(n+1-i) - x_(i)). Cached per n; thread-safe.
inline const std::vector<double>& shapiro_wilk_coefficients(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;

  const std::size_t half = n / 2;
  std::vector<double> a(half + 1, 0.0);  // 1-based
  if (n == 3) {
    a[1] = std::numbers::sqrt2 / 2.0;
  } else {
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    const double an = static_cast<double>(n);
    const double an25 = an + 0.25;
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= half; ++i) {
      a[i] = normal::quantile((static_cast<double>(i) - 0.375) / an25);
      summ2 += a[i] * a[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - a[1] / ssumm2;
    std::size_t i1;
    double fac;
    if (n > 5) {
      i1 = 3;
      const double a2 = -a[2] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      i1 = 2;
      fac = std::sqrt((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = i1; i <= half; ++i) a[i] /= -fac;
  }
  return cache.emplace(n, std::move(a)).first->second;
}

/// Shapiro-Wilk W with Royston's normalising approximation for the p-value
/// (exact for n = 3). Valid for 3 <= n <= 5000.
inline SwResult shapiro_wilk(std::span<const double> sample) {
  detail::require_finite(sample);
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) {
    throw UnsupportedSampleSize("Shapiro-Wilk supports 3 <= n <= 5000, got " + std::to_string(n));
  }
  const auto x = detail::sorted_copy(sample);
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw DegenerateSample("all sample values are tied");

  const auto& a = shapiro_wilk_coefficients(n);
  // Squared correlation between the sorted data and the antisymmetric
  // coefficient vector; 1 - W is formed directly to keep precision near W = 1.
  const double nd = static_cast<double>(n);
  auto coef = [&](std::size_t i) {
    const std::size_t j = n - 1 - i;
    if (i == j) return 0.0;
    return i < j ? -a[i + 1] : a[j + 1];
  };
  double sa = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += coef(i);
    sx += x[i] / range;
  }
  sa /= nd;
  sx /= nd;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coef(i) - sa;
    const double xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
  w1 = std::max(w1, 0.0);

  SwResult r;
  r.w = 1.0 - w1;
  if (n == 3) {
    constexpr double pi6 = 6.0 / std::numbers::pi;
    constexpr double stqr = std::numbers::pi / 3.0;
    r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(r.w)) - stqr), 0.0, 1.0);
  } else if (w1 == 0.0) {
    r.p_value = 1.0;
  } else {
    double y = std::log(w1);
    const double xx = std::log(nd);
    double m, s;
    if (n <= 11) {
      static constexpr double g[] = {-2.273, 0.459};
      static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
      static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
      const double gamma = detail::poly(g, nd);
      if (y >= gamma) {
        r.p_value = 1e-99;
        r.accept = false;
        return r;
      }
      y = -std::log(gamma - y);
      m = detail::poly(c3, nd);
      s = std::exp(detail::poly(c4, nd));
    } else {
      static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
      static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
      m = detail::poly(c5, xx);
      s = std::exp(detail::poly(c6, xx));
    }
    r.p_value = normal::sf((y - m) / s);
  }
  r.accept = r.p_value > kPValueAlpha;
  return r;
}

// ---------------------------------------------------------------------------
// Projection battery
// ---------------------------------------------------------------------------

struct BatteryOptions {
  std::size_t n_projections = 5000;
  std::size_t subset_size = 250;
  std::uint64_t seed = 0;
  /// Draw a fresh row subset per projection instead of one fixed subset.
  bool resample_subset = false;
  /// Magnitude of the +/- jitter added to each projected value before
  /// testing, so that exactly tied samples (point masses) stay testable.
  double jitter = 1e-12;
};

struct NormalityReport {
  double avg_ad_statistic = 0.0;
  double ad_accept_rate = 0.0;
  double avg_dp_pvalue = 0.0;
  double dp_accept_rate = 0.0;
  double avg_sw_pvalue = 0.0;
  double sw_accept_rate = 0.0;
  std::size_t n_projections = 0;
  std::size_t subset_size = 0;
  std::uint64_t seed = 0;
  bool resample_subset = false;
  double jitter = 0.0;
  /// Projections whose sample was degenerate for a test; counted as
  /// rejections and left out of the averages.
  std::size_t n_degenerate = 0;
};

namespace detail {

struct ProjectionOutcome {
  AdResult ad;
  DpResult dp;
  SwResult sw;
  bool degenerate = false;
};

inline std::vector<std::size_t> draw_subset(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(idx[i]));
  return out;
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Uniformly random unit vector in R^d (normalised i.i.d. standard normals).
template <class Rng>
Vector random_unit_vector(Index d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(d);
  double norm = 0.0;
  do {
    for (Index j = 0; j < d; ++j) u(j) = gauss(rng);
    norm = u.norm();
  } while (!(norm > 0.0));
  return u / norm;
}

/// Runs all three tests on many random 1-D projections of a row subset and
/// aggregates averages and acceptance fractions. Deterministic given the
/// options, independent of the worker count.
inline NormalityReport projection_battery(const LatentMatrix& m, const BatteryOptions& opt,
                                          unsigned workers = worker_count()) {
  const auto n = static_cast<std::size_t>(m.rows());
  if (opt.n_projections < 1) throw ConfigError("n_projections must be at least 1");
  if (opt.subset_size > n) {
    throw InsufficientData("subset size " + std::to_string(opt.subset_size) + " exceeds row count " +
                           std::to_string(n));
  }
  if (opt.subset_size < 20) throw InsufficientData("subset size must be at least 20");

  constexpr std::uint64_t kSubsetStream = 1, kProjectionStream = 2;
  Matrix fixed_subset;
  if (!opt.resample_subset) {
    auto rng = detail::substream(opt.seed, kSubsetStream, 0);
    fixed_subset = detail::gather_rows(m.data(), detail::draw_subset(n, opt.subset_size, rng));
  }

  std::vector<detail::ProjectionOutcome> outcomes(opt.n_projections);
  parallel_for(
      opt.n_projections,
      [&](std::size_t p) {
        auto rng = detail::substream(opt.seed, kProjectionStream, p);
        Matrix local;
        if (opt.resample_subset) local = detail::gather_rows(m.data(), detail::draw_subset(n, opt.subset_size, rng));
        const Matrix& rows = opt.resample_subset ? local : fixed_subset;
        const Vector u = random_unit_vector(m.cols(), rng);
        Vector y = rows * u;
        std::bernoulli_distribution coin(0.5);
        for (Index i = 0; i < y.size(); ++i) y(i) += coin(rng) ? opt.jitter : -opt.jitter;
        const std::span<const double> s(y.data(), static_cast<std::size_t>(y.size()));
        auto& out = outcomes[p];
        try {
          out.ad = anderson_darling(s);
          out.dp = dagostino_pearson(s);
          out.sw = shapiro_wilk(s);
        } catch (const DegenerateSample&) {
          out = detail::ProjectionOutcome{};
          out.degenerate = true;
        }
      },
      workers);

  NormalityReport r;
  r.n_projections = opt.n_projections;
  r.subset_size = opt.subset_size;
  r.seed = opt.seed;
  r.resample_subset = opt.resample_subset;
  r.jitter = opt.jitter;
  std::size_t ad_ok = 0, dp_ok = 0, sw_ok = 0, valid = 0;
  double ad_sum = 0.0, dp_sum = 0.0, sw_sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.degenerate) {
      ++r.n_degenerate;
      continue;
    }
    ++valid;
    ad_sum += o.ad.statistic;
    dp_sum += o.dp.p_value;
    sw_sum += o.sw.p_value;
    ad_ok += o.ad.accept;
    dp_ok += o.dp.accept;
    sw_ok += o.sw.accept;
  }
  const double total = static_cast<double>(opt.n_projections);
  if (valid > 0) {
    r.avg_ad_statistic = ad_sum / static_cast<double>(valid);
    r.avg_dp_pvalue = dp_sum / static_cast<double>(valid);
    r.avg_sw_pvalue = sw_sum / static_cast<double>(valid);
  }
  r.ad_accept_rate = static_cast<double>(ad_ok) / total;
  r.dp_accept_rate = static_cast<double>(dp_ok) / total;
  r.sw_accept_rate = static_cast<double>(sw_ok) / total;
  return r;
}

}  // namespace une
