#include "relq/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relq/error.hpp"

namespace relq {

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
      throw ValidationError("rate", "rate fit needs positive finite points");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const std::size_t n = lx.size();
  if (n < 2) throw ValidationError("rate", "rate fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (sxx <= 0.0) throw ValidationError("rate", "rate fit needs distinct abscissae");
  const double slope = sxy / sxx;
  RateFit f;
  f.exponent = -slope;
  f.intercept = my - slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

SampleMoments sample_moments(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  if (n < 2) throw ValidationError("runs", "covariance needs at least two samples");
  SampleMoments m;
  m.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - m.mean.transpose();
  m.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

double normal_cdf(double x, double variance) {
  if (variance <= 0.0) return x < 0.0 ? 0.0 : 1.0;
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

double normal_pdf(double x, double variance) {
  if (variance <= 0.0) return x == 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * M_PI * variance);
}

double ks_statistic(std::vector<double> s, const std::function<double(double)>& cdf) {
  if (s.empty()) throw ValidationError("samples", "KS statistic needs samples");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = cdf(s[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return d;
}

double ks_critical_value(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0) || n == 0) throw ValidationError("alpha", "need alpha in (0,1) and n > 0");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

double quantile(std::vector<double> s, double p) {
  if (s.empty()) throw ValidationError("samples", "quantile of an empty sample");
  std::sort(s.begin(), s.end());
  const double pos = p * (s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - lo) * (s[hi] - s[lo]);
}

Histogram freedman_diaconis_histogram(const std::vector<double>& s) {
  if (s.empty()) throw ValidationError("samples", "histogram of an empty sample");
  const auto [mn_it, mx_it] = std::minmax_element(s.begin(), s.end());
  double lo = *mn_it, hi = *mx_it;
  const double n = static_cast<double>(s.size());
  std::size_t bins;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
    bins = 1;
  } else {
    const double iqr = quantile(s, 0.75) - quantile(s, 0.25);
    if (iqr > 0.0) {
      const double width = 2.0 * iqr / std::cbrt(n);
      bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    } else {
      bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;
    }
    bins = std::clamp<std::size_t>(bins, 1, 10000);
  }
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / bins;
  for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + width * k;
  h.edges[bins] = hi;
  for (double v : s) {
    std::size_t k = static_cast<std::size_t>((v - lo) / width);
    if (k >= bins) k = bins - 1;
    ++h.counts[k];
  }
  return h;
}

}  // namespace relq
