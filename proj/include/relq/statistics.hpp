#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "relq/mdp.hpp"

namespace relq {

struct RateFit {
  double exponent = 0.0;  // minus the log-log slope
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log y against log x; needs at least two positive points.
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

// Sample mean and unbiased covariance of the rows.
struct SampleMoments {
  Vector mean;
  Matrix covariance;
};
SampleMoments sample_moments(const Matrix& rows);

double normal_cdf(double x, double variance);
double normal_pdf(double x, double variance);

// sup |F_n - F| for the empirical cdf of the samples.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
// Asymptotic Kolmogorov critical value sqrt(-log(alpha/2)/2) / sqrt(n).
double ks_critical_value(double alpha, std::size_t n);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<long> counts;
};

// Freedman-Diaconis bin width; falls back to Sturges when the IQR vanishes.
Histogram freedman_diaconis_histogram(const std::vector<double>& samples);

double quantile(std::vector<double> samples, double p);

}  // namespace relq
